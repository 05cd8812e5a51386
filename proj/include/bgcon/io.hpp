#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bgcon::io {

/// Writes to `path.tmp` and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
void write_binary_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);

std::string read_file(const std::string& path);
std::vector<std::uint8_t> read_binary(const std::string& path);

/// Splits one CSV record on commas and trims surrounding whitespace.
std::vector<std::string> split_csv(std::string_view line);

/// Shortest round-trippable decimal representation.
std::string format_double(double x);

double parse_double(const std::string& text, const std::string& path, std::size_t line);
long long parse_int(const std::string& text, const std::string& path, std::size_t line);

}  // namespace bgcon::io
