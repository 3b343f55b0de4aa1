#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dff {

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; duplicate keys are an error.
std::map<std::string, std::string> parse_key_values(const std::string& text);

double parse_real(const std::string& s);
int parse_int(const std::string& s);
std::vector<double> parse_real_list(const std::string& s);

/// Shortest text that parses back to the same double.
std::string format_real(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dff
