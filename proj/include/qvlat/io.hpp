#pragma once

// Artifact output. Every CSV starts with a single '#' metadata line that
// embeds the tool version and a hash of the originating config, then a
// header row. Formatting is fixed (%.17g) so identical runs produce
// byte-identical files.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace qvlat::io {

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a64(const std::string& data);

std::string format_double(double v);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& meta,
              const std::vector<std::string>& header);
    ~CsvWriter();

    void row(const std::vector<std::string>& cells);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string metadata_line(std::uint64_t config_hash);

}  // namespace qvlat::io
