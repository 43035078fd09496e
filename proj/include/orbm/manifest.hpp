#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace orbm {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_bytes(const std::string& data);

struct ManifestEntry {
    std::string file;  ///< relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Record of one run: the echoed configuration, seed, versions, wall time
/// and every output file with its content hash.
struct Manifest {
    std::string subcommand;
    std::string config_path;
    std::string config_echo;
    std::uint64_t seed = 0;
    int threads = 1;
    int exit_code = 0;
    double wall_time_s = 0.0;
    std::vector<ManifestEntry> outputs;

    /// Hashes `dir/file` and appends it.
    void add_output(const std::string& dir, const std::string& file);
    /// Writes dir/manifest.json.
    void write(const std::string& dir) const;
};

}  // namespace orbm
