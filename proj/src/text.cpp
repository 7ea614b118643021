#include "bhplab/text.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "bhplab/error.hpp"

namespace bhplab {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

bool parse_plain(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

bool parse_double(std::string_view text, double& out, bool allow_fraction) {
  text = trim(text);
  if (allow_fraction) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      double num = 0.0, den = 0.0;
      if (!parse_plain(trim(text.substr(0, slash)), num) || !parse_plain(trim(text.substr(slash + 1)), den) ||
          den == 0.0)
        return false;
      out = num / den;
      return true;
    }
  }
  return parse_plain(text, out);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace bhplab
