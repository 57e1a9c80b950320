#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace emt::io {

// Raw little-endian float64 array.
void write_raw_f64(const std::string& path, const std::vector<double>& data);
std::vector<double> read_raw_f64(const std::string& path);

void write_json(const std::string& path, const nlohmann::json& doc);
void write_text(const std::string& path, const std::string& text);

// Numeric CSV with a fixed column count; blank, '#' and non-numeric header lines are skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t columns);

std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

}  // namespace emt::io
