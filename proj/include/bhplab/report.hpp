#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bhplab {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

/// Identity line written as the first line of every output file.
struct RunStamp {
  std::string experiment;
  std::string config_hash;  // hex of fnv1a over the canonical config
  std::uint64_t seed = 0;

  std::string comment(std::string_view prefix) const;
};

/// CSV table built in memory; numbers use the shortest round-trip form so
/// identical runs give identical bytes.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  CsvTable& row();
  CsvTable& add(double v);
  CsvTable& add(long long v);
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(bool v) { return add(static_cast<long long>(v ? 1 : 0)); }
  CsvTable& add(std::string_view v);

  std::size_t rows() const { return rows_.size(); }
  std::string body() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Ordered "key = value" lines.
class Summary {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value);
  void set(std::string key, long long value);
  void set(std::string key, int value) { set(std::move(key), static_cast<long long>(value)); }
  void set(std::string key, bool value);
  /// Value of a key, or empty when absent.
  std::string get(std::string_view key) const;
  std::string text() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool markers_only = false;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Self-contained SVG line/scatter plot with linear or log axes.
std::string render_svg(const Plot& plot);

void write_file(const std::string& path, std::string_view content);

}  // namespace bhplab
