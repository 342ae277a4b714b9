#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace nsnmf {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// RFC 4180 field: quoted when it contains a comma, quote, CR or LF.
std::string csv_field(std::string_view value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace nsnmf
