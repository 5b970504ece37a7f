#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace vehicount {

/// Ordered `key = value` pairs. Blank lines and `#` comments are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::istream& is);
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

// Strict value parsers; each throws ConfigError naming the key on bad input.
int parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<int> parse_int_list(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);

/// Shortest text that parses back to exactly v.
std::string format_double(double v);
std::string format_double_list(const std::vector<double>& values);
std::string format_int_list(const std::vector<int>& values);

}  // namespace vehicount
