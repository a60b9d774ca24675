#include "fastexit/harness/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fastexit {

namespace {

std::string to_hex(const unsigned char* data, unsigned int n) {
    std::ostringstream os;
    for (unsigned int i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(data[i]);
    return os.str();
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: digest init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const char* p, std::size_t n) {
        if (EVP_DigestUpdate(ctx_, p, n) != 1) throw std::runtime_error("sha256: update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md.data(), &len) != 1) throw std::runtime_error("sha256: final failed");
        return to_hex(md.data(), len);
    }

private:
    EVP_MD_CTX* ctx_;
};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (is) {
        is.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(is.gcount()));
    }
    return h.hex();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("CSV column '" + name + "' not found");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path.string() + " is empty");
    t.header = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    auto put = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    };
    put(table.header);
    for (const auto& r : table.rows) put(r);
}

std::string fmt_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& [name, sum] : outputs) outs.push_back({{"file", name}, {"sha256", sum}});
    return {{"config_hash", config_hash},
            {"version", version},
            {"outputs", outs},
            {"wall_seconds", wall_seconds},
            {"paths", paths}};
}

RunManifest write_manifest(const std::filesystem::path& dir, const std::string& config_hash,
                           const std::vector<std::string>& outputs, double wall_seconds, std::uint64_t paths) {
    RunManifest m;
    m.config_hash = config_hash;
    m.wall_seconds = wall_seconds;
    m.paths = paths;
    for (const auto& name : outputs) m.outputs.emplace_back(name, sha256_file(dir / name));
    write_json(dir / "manifest.json", m.to_json());
    return m;
}

}  // namespace fastexit
