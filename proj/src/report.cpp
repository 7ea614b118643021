#include "bhplab/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bhplab/error.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) out[k] = digits[v & 0xf];
  return out;
}

std::string RunStamp::comment(std::string_view prefix) const {
  return std::string(prefix) + " bhplab experiment=" + experiment + " config_hash=" + config_hash +
         " seed=" + std::to_string(seed);
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(double v) {
  rows_.back().push_back(format_double(v));
  return *this;
}

CsvTable& CsvTable::add(long long v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::add(std::string_view v) {
  const bool quote = v.find_first_of(",\"\n") != std::string_view::npos;
  if (!quote) {
    rows_.back().emplace_back(v);
    return *this;
  }
  std::string q = "\"";
  for (char c : v) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  rows_.back().push_back(std::move(q));
  return *this;
}

std::string CsvTable::body() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out += ',';
      out += cells[k];
    }
    out += '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
  return out;
}

void Summary::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

void Summary::set(std::string key, double value) { set(std::move(key), format_double(value)); }
void Summary::set(std::string key, long long value) { set(std::move(key), std::to_string(value)); }
void Summary::set(std::string key, bool value) { set(std::move(key), std::string(value ? "true" : "false")); }

std::string Summary::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return {};
}

std::string Summary::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

std::string tick_label(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v) const {
    const double t = log ? std::log10(v) : v;
    return (t - lo) / (hi - lo);
  }
};

Axis make_axis(const std::vector<double>& values, bool log) {
  Axis a;
  a.log = log;
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values) {
    if (!std::isfinite(v) || (log && !(v > 0.0))) continue;
    const double t = log ? std::log10(v) : v;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    lo -= pad;
    hi += pad;
  }
  const double pad = 0.05 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::vector<double> xs, ys;
  for (const PlotSeries& s : plot.series) {
    for (auto [x, y] : s.points) {
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  const Axis ax = make_axis(xs, plot.log_x);
  const Axis ay = make_axis(ys, plot.log_y);
  auto px = [&](double x) { return L + ax.map(x) * (W - L - R); };
  auto py = [&](double y) { return H - B - ay.map(y) * (H - T - B); };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  out += "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
         escape_xml(plot.title) + "</text>\n";
  out += "<rect x=\"" + fixed(L) + "\" y=\"" + fixed(T) + "\" width=\"" + fixed(W - L - R) + "\" height=\"" +
         fixed(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double vx = ax.log ? std::pow(10.0, fx) : fx;
    const double vy = ay.log ? std::pow(10.0, fy) : fy;
    const double sx = L + (W - L - R) * k / 4.0;
    const double sy = H - B - (H - T - B) * k / 4.0;
    out += "<text x=\"" + fixed(sx) + "\" y=\"" + fixed(H - B + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(vx) + "</text>\n";
    out += "<text x=\"" + fixed(L - 6) + "\" y=\"" + fixed(sy + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + tick_label(vy) + "</text>\n";
  }
  out += "<text x=\"" + fixed((L + W - R) / 2) + "\" y=\"" + fixed(H - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape_xml(plot.x_label) +
         "</text>\n";
  out += "<text transform=\"translate(16," + fixed((T + H - B) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         escape_xml(plot.y_label) + "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const PlotSeries& s = plot.series[k];
    const std::string color = colors[k % 6];
    std::string path;
    for (auto [x, y] : s.points) {
      if ((ax.log && !(x > 0.0)) || (ay.log && !(y > 0.0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
      path += (path.empty() ? "" : " ") + fixed(px(x)) + "," + fixed(py(y));
      out += "<circle cx=\"" + fixed(px(x)) + "\" cy=\"" + fixed(py(y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    if (!s.markers_only && !path.empty()) {
      out += "<polyline points=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
    out += "<text x=\"" + fixed(W - R - 8) + "\" y=\"" + fixed(T + 16 + 15 * k) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" + color + "\">" +
           escape_xml(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_file(const std::string& path, std::string_view content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw Error(ErrorKind::ConfigError, "failed writing " + path);
}

}  // namespace bhplab
