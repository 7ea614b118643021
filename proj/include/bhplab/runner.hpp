#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bhplab/geometry.hpp"
#include "bhplab/report.hpp"

namespace bhplab {

/// Parsed experiment configuration.
///
///     # comment
///     [run]
///     experiment = capacity
///     domain = preset:big_square        # or a domain file, relative to the config
///     coefficients = preset:laplacian   # or a coefficient file
///     h = 1/128
///     stencil = 8                       # 8 or 16
///     seed = 1
///     output = out/capacity
///     workers = 1
///     [params]
///     center = 0, 0
///     R = 1
///     radii = 0.5, 0.25
///
/// Parameter names depend on the experiment; see experiment_parameters().
struct RunConfig {
  std::string base_dir = ".";
  std::string experiment;
  std::string domain = "preset:square";
  std::string coefficients = "preset:laplacian";
  std::string h_text;
  double h = 0.0;
  Stencil stencil = Stencil::eight;
  std::uint64_t seed = 1;
  std::string output = "out";
  int workers = 1;
  std::map<std::string, std::string> params;

  /// Sorted key=value lines of everything that affects results
  /// (output directory and worker count excluded).
  std::string canonical() const;
  std::string hash() const;
  /// "preset:NAME" or a file path, with relative paths resolved against base_dir.
  std::string resolve(const std::string& spec) const;
};

/// Throws ConfigError or ParseError.
RunConfig parse_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::vector<std::string> experiment_kinds();

struct ParameterInfo {
  std::string name;
  std::string type;  // number, integer, list, point, points, text, boolean
  std::string fallback;  // empty when required
  std::string help;
};

std::vector<ParameterInfo> experiment_parameters(const std::string& experiment);

/// "error: ..." and "warning: ..." lines; empty for a valid config.
std::vector<std::string> validate_config(const RunConfig& config);

struct RunResult {
  std::vector<std::string> files;
  Summary summary;
};

/// Runs the experiment and writes CSV, summary and SVG files into
/// config.output. Throws Error.
RunResult run_experiment(const RunConfig& config);

/// Calls fn(0..n-1) on up to `workers` threads; rethrows the exception of the
/// lowest failing index.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace bhplab
