#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bhplab {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Strict full-string number parse; accepts "a/b" fractions when allow_fraction.
bool parse_double(std::string_view text, double& out, bool allow_fraction = false);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);
std::string read_file(const std::string& path);

}  // namespace bhplab
