#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fte {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

/// Parses a full field as a double; throws FormatError naming `context` on failure.
double parse_number(std::string_view text, std::string_view context);

std::vector<std::string_view> split_fields(std::string_view line, char separator = ',');

std::string_view trim(std::string_view text);

/// Throws FormatError (with the path in the message) when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

/// Throws ExportError when the file cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace fte
