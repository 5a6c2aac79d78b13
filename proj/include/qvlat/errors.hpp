#pragma once

#include <stdexcept>
#include <string>

namespace qvlat {

struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

struct QuadratureFailure : std::runtime_error {
    explicit QuadratureFailure(const std::string& what) : std::runtime_error(what) {}
};

struct IntegrationFailure : std::runtime_error {
    explicit IntegrationFailure(const std::string& what) : std::runtime_error(what) {}
};

struct Unclassifiable : std::runtime_error {
    explicit Unclassifiable(const std::string& what) : std::runtime_error(what) {}
};

struct NonGradient : std::runtime_error {
    explicit NonGradient(const std::string& what) : std::runtime_error(what) {}
};

struct NotDegreePreserving : std::runtime_error {
    explicit NotDegreePreserving(const std::string& what) : std::runtime_error(what) {}
};

struct Degenerate : std::runtime_error {
    explicit Degenerate(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidWalk : std::invalid_argument {
    explicit InvalidWalk(const std::string& what) : std::invalid_argument(what) {}
};

struct FiberTooLarge : std::runtime_error {
    explicit FiberTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct RateOverflow : std::runtime_error {
    explicit RateOverflow(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateRecentering : std::runtime_error {
    explicit DegenerateRecentering(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qvlat
