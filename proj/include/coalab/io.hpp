#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace coalab {

/// Writes to a sibling temp file, then renames over the destination. Parent
/// directories are created. Throws std::runtime_error on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// skipped. Duplicate keys and lines without '=' are errors naming the line.
std::map<std::string, std::string> parse_key_values(std::string_view text);
std::string format_key_values(const std::map<std::string, std::string>& values);

}  // namespace coalab
