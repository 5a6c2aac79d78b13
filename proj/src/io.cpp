#include "qvlat/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace qvlat::io {

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string metadata_line(std::uint64_t config_hash) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "config_hash=%016llx version=%s",
                  static_cast<unsigned long long>(config_hash), kToolVersion);
    return buf;
}

struct CsvWriter::Impl {
    std::ofstream out;
};

CsvWriter::CsvWriter(const std::string& path, const std::string& meta,
                     const std::vector<std::string>& header)
    : impl_(std::make_unique<Impl>()) {
    impl_->out.open(path);
    if (!impl_->out) throw std::runtime_error("cannot open " + path);
    impl_->out << "# " << meta << "\n";
    for (std::size_t i = 0; i < header.size(); ++i)
        impl_->out << header[i] << (i + 1 < header.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        impl_->out << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

}  // namespace qvlat::io
