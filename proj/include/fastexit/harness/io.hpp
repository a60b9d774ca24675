#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fastexit {

inline constexpr const char* kVersion = "0.1.0";

/// Lowercase hex SHA-256 of a byte string or a file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::runtime_error if absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Formats a double with round-trip precision.
std::string fmt_double(double v);

struct RunManifest {
    std::string config_hash;
    std::string version = kVersion;
    std::vector<std::pair<std::string, std::string>> outputs;  // relative name, sha256
    double wall_seconds = 0.0;
    std::uint64_t paths = 0;

    nlohmann::json to_json() const;
};

/// Hashes every listed output (relative to `dir`) and writes manifest.json.
RunManifest write_manifest(const std::filesystem::path& dir, const std::string& config_hash,
                           const std::vector<std::string>& outputs, double wall_seconds, std::uint64_t paths);

}  // namespace fastexit
