#include "emt/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "emt/error.hpp"

namespace emt::io {

namespace {

static_assert(std::endian::native == std::endian::little, "raw arrays assume a little-endian host");

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    ensure_parent(path);
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + path);
    return out;
}

}  // namespace

void write_raw_f64(const std::string& path, const std::vector<double>& data) {
    auto out = open_out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::vector<double> read_raw_f64(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error(ErrorCode::Io, "cannot open: " + path);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    std::vector<double> data(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    return data;
}

void write_json(const std::string& path, const nlohmann::json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

void write_text(const std::string& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ss(line);
        std::vector<double> row;
        double v = 0.0;
        while (ss >> v) row.push_back(v);
        if (row.size() != columns) {
            if (rows.empty() && row.empty()) continue;  // header
            throw Error(ErrorCode::Io, "malformed row in " + path + ": " + line);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace emt::io
