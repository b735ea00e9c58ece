#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace pllhb::io {

/// Flat key=value configuration. Keys are unique; later lines win.
using KeyValueConfig = std::map<std::string, std::string, std::less<>>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; anything else without '=' is a ParameterError.
KeyValueConfig parse_key_value(std::string_view text);

/// Looks up a required floating-point key.
double require_double(const KeyValueConfig& config, std::string_view key);

/// Shortest-safe round-trip representation: 17 significant digits.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pllhb::io
