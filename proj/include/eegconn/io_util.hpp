#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace eegconn {

// Shortest decimal representation that parses back to the same double.
void append_double(std::string& out, double v);
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::string_view trim(std::string_view s);  // spaces, tabs, trailing CR

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);  // throws DataError

}  // namespace eegconn
