#include "bhplab/domain_io.hpp"

#include <fstream>

#include "bhplab/error.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

std::vector<std::string> list_domains() {
  return {"square", "slit_square", "comb_3", "L_shape", "double_slit", "big_square"};
}

Domain preset_domain(std::string_view name) {
  Domain d;
  d.name = std::string(name);
  const Rect unit{0.0, 0.0, 1.0, 1.0};
  if (name == "square") {
    d.rectangles = {unit};
  } else if (name == "slit_square") {
    d.rectangles = {unit};
    d.slits = {{{0.0, 0.5}, {0.5, 0.5}}};
  } else if (name == "comb_3") {
    d.rectangles = {unit};
    for (double x : {0.25, 0.5, 0.75}) d.slits.push_back({{x, 0.0}, {x, 0.75}});
  } else if (name == "L_shape") {
    d.rectangles = {{0.0, 0.0, 1.0, 0.5}, {0.0, 0.0, 0.5, 1.0}};
  } else if (name == "double_slit") {
    d.rectangles = {unit};
    d.slits = {{{0.0, 0.375}, {0.625, 0.375}}, {{0.375, 0.625}, {1.0, 0.625}}};
  } else if (name == "big_square") {
    d.rectangles = {{-1.0, -1.0, 1.0, 1.0}};
  } else {
    throw Error(ErrorKind::ConfigError, "unknown domain preset '" + std::string(name) + "'");
  }
  return d;
}

Domain parse_domain(std::string_view text) {
  Domain d;
  enum class Section { none, rectangles, slits } section = Section::none;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorKind::ParseError, "domain line " + std::to_string(line_no) + ": " + what);
    };
    if (line.front() == '[') {
      if (line == "[rectangles]") {
        section = Section::rectangles;
      } else if (line == "[slits]") {
        section = Section::slits;
      } else {
        fail("unknown section " + std::string(line));
      }
      continue;
    }
    if (auto eq = line.find('='); eq != std::string_view::npos && section == Section::none) {
      if (trim(line.substr(0, eq)) != "name") fail("unknown key");
      d.name = std::string(trim(line.substr(eq + 1)));
      continue;
    }
    const auto fields = split_whitespace(line);
    if (section == Section::none) fail("data outside a section");
    if (fields.size() != 4) fail("expected four numbers");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      if (!parse_double(fields[k], v[k])) fail("malformed number '" + std::string(fields[k]) + "'");
    }
    if (section == Section::rectangles) {
      d.rectangles.push_back({v[0], v[1], v[2], v[3]});
    } else {
      d.slits.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
  }
  if (d.rectangles.empty()) throw Error(ErrorKind::ParseError, "domain has no [rectangles] entries");
  return d;
}

Domain read_domain(const std::string& path) { return parse_domain(read_file(path)); }

std::string format_domain(const Domain& domain) {
  std::string out = "name = " + domain.name + "\n[rectangles]\n";
  for (const Rect& r : domain.rectangles) {
    out += format_double(r.x0) + " " + format_double(r.y0) + " " + format_double(r.x1) + " " +
           format_double(r.y1) + "\n";
  }
  out += "[slits]\n";
  for (const Slit& s : domain.slits) {
    out += format_double(s.a.x) + " " + format_double(s.a.y) + " " + format_double(s.b.x) + " " +
           format_double(s.b.y) + "\n";
  }
  return out;
}

void write_domain(const Domain& domain, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write '" + path + "'");
  out << format_domain(domain);
}

Domain load_domain(const std::string& spec) {
  constexpr std::string_view prefix = "preset:";
  if (spec.rfind(prefix, 0) == 0) return preset_domain(std::string_view(spec).substr(prefix.size()));
  return read_domain(spec);
}

}  // namespace bhplab
