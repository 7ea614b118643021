#include "bhplab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <memory>
#include <numbers>
#include <random>
#include <thread>

#include "bhplab/bhp.hpp"
#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"
#include "bhplab/forms.hpp"
#include "bhplab/potential.hpp"
#include "bhplab/solve.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config parsing

std::string RunConfig::canonical() const {
  std::vector<std::string> lines = {
      "run.coefficients=" + coefficients,
      "run.domain=" + domain,
      "run.experiment=" + experiment,
      "run.h=" + format_double(h),
      "run.seed=" + std::to_string(seed),
      std::string("run.stencil=") + (stencil == Stencil::eight ? "8" : "16"),
  };
  for (const auto& [k, v] : params) lines.push_back("params." + k + "=" + v);
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a(canonical())); }

std::string RunConfig::resolve(const std::string& spec) const {
  if (spec.starts_with("preset:")) return spec;
  const fs::path p(spec);
  return p.is_absolute() ? spec : (fs::path(base_dir) / p).string();
}

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

std::uint64_t parse_seed(std::string_view v) {
  std::uint64_t out = 0;
  if (v.empty()) config_error("seed is empty");
  for (char c : v) {
    if (c < '0' || c > '9') config_error("seed must be a non-negative integer, got '" + std::string(v) + "'");
    out = out * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return out;
}

int parse_int(std::string_view v, const std::string& what) {
  double d = 0.0;
  if (!parse_double(v, d) || d != std::floor(d) || std::abs(d) > 1e9) {
    config_error(what + " must be an integer, got '" + std::string(v) + "'");
  }
  return static_cast<int>(d);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  std::string section;
  std::map<std::string, std::string> run;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::ParseError, where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "run" && section != "params") {
        throw Error(ErrorKind::ParseError, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::ParseError, where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorKind::ParseError, where + "empty key");
    if (section.empty()) throw Error(ErrorKind::ParseError, where + "key outside a section");
    auto& target = section == "run" ? run : cfg.params;
    if (!target.emplace(key, value).second) {
      throw Error(ErrorKind::ParseError, where + "duplicate key '" + key + "'");
    }
    if (end == text.size()) break;
  }

  for (const auto& [k, v] : run) {
    if (k == "experiment") {
      cfg.experiment = v;
    } else if (k == "domain") {
      cfg.domain = v;
    } else if (k == "coefficients") {
      cfg.coefficients = v;
    } else if (k == "h") {
      cfg.h_text = v;
      if (!parse_double(v, cfg.h, true)) config_error("h must be a number or fraction, got '" + v + "'");
    } else if (k == "stencil") {
      if (v == "8") {
        cfg.stencil = Stencil::eight;
      } else if (v == "16") {
        cfg.stencil = Stencil::sixteen;
      } else {
        config_error("stencil must be 8 or 16, got '" + v + "'");
      }
    } else if (k == "seed") {
      cfg.seed = parse_seed(v);
    } else if (k == "output") {
      cfg.output = v;
    } else if (k == "workers") {
      cfg.workers = parse_int(v, "workers");
    } else {
      config_error("unknown key '" + k + "' in [run]");
    }
  }
  if (cfg.experiment.empty()) config_error("[run] experiment is required");
  if (const auto kinds = experiment_kinds(); std::find(kinds.begin(), kinds.end(), cfg.experiment) == kinds.end()) {
    config_error("unknown experiment '" + cfg.experiment + "'");
  }
  if (cfg.h_text.empty()) config_error("[run] h is required");
  if (!(cfg.h > 0.0)) config_error("h must be positive");
  if (cfg.workers < 1) config_error("workers must be at least 1");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  const std::string text = read_file(path);
  const fs::path parent = fs::path(path).parent_path();
  RunConfig cfg = parse_config(text, parent.empty() ? "." : parent.string());
  if (!cfg.output.empty() && fs::path(cfg.output).is_relative()) cfg.output = (parent / cfg.output).string();
  return cfg;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::string> experiment_kinds() {
  return {"capacity", "width", "harnack", "heat", "carleson", "green_bhp", "solution_bhp", "decay", "geometry_audit"};
}

std::vector<ParameterInfo> experiment_parameters(const std::string& experiment) {
  const std::vector<ParameterInfo> boundary = {
      {"xi", "point", "", "boundary point, snapped to the nearest boundary vertex"},
      {"side", "integer", "0", "slit side of xi: 1, -1, or 0 for any"},
  };
  const std::vector<ParameterInfo> uniformity = {
      {"c_u", "number", "0.5", "cigar constant of the domain"},
      {"C_u", "number", "1.2", "length constant of the domain"},
  };
  auto join = [](std::vector<ParameterInfo> a, const std::vector<ParameterInfo>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  if (experiment == "capacity") {
    return {{"center", "point", "auto", "center x of the balls (default: bounding-box center)"},
            {"R", "number", "", "radius of the outer ball"},
            {"radii", "list", "auto", "inner radii (default R/2, R/4, R/8, R/16)"}};
  }
  if (experiment == "width") {
    return {{"thickness", "list", "", "collar thicknesses t: U = {delta < t}"},
            {"eta", "number", "1/3", "capacity fraction"},
            {"max_samples", "integer", "48", "points of U tested per radius"},
            {"xi", "point", "none", "restrict collars to the inner ball B(xi, R)"},
            {"side", "integer", "0", "slit side of xi"},
            {"R", "number", "auto", "inner-ball radius when xi is set (default: diameter)"},
            {"c_u", "number", "0.5", "cigar constant for the bound 2 / c_u + 1"}};
  }
  if (experiment == "harnack") {
    return {{"point", "point", "", "center x"},
            {"radii", "list", "", "scales r"},
            {"mode", "text", "elliptic", "elliptic or parabolic"},
            {"trials", "integer", "50", "random data sets per scale"},
            {"tau", "number", "1", "parabolic time scale"},
            {"delta", "number", "0.5", "parabolic box shrink factor"},
            {"steps", "integer", "256", "parabolic time steps over tau r^2"}};
  }
  if (experiment == "heat") {
    return {{"point", "point", "", "source x"},
            {"t", "number", "", "final time"},
            {"steps", "integer", "256", "Crank-Nicolson steps"},
            {"adjoint", "boolean", "false", "evolve with the adjoint operator"}};
  }
  if (experiment == "carleson") {
    return join(join(boundary, uniformity),
                {{"r", "number", "", "scale"},
                 {"c_omega", "number", "1", "comparability constant"},
                 {"green_radius", "number", "auto", "Green ball radius in units of r (default c_omega * A3)"},
                 {"x_samples", "integer", "50", "sampled x in B(xi, r)"}});
  }
  if (experiment == "green_bhp" || experiment == "solution_bhp") {
    std::vector<ParameterInfo> p = join(join(boundary, uniformity),
                                        {{"radii", "list", "", "scales r"},
                                         {"A0", "number", "auto", "Y' radius multiplier (default A3 + 7)"},
                                         {"poles", "integer", "auto", "poles on the 6r sphere"}});
    if (experiment == "solution_bhp") {
      p.push_back({"pairs", "integer", "200", "minimum number of solution pairs"});
      p.push_back({"sectors", "integer", "8", "angular sectors for harmonic measures"});
      p.push_back({"mixtures", "integer", "64", "random mixtures"});
    }
    return p;
  }
  if (experiment == "decay") {
    return {{"thickness", "number", "", "U = {delta < thickness}"},
            {"points", "points", "", "sample points x, as 'x, y; x, y'"},
            {"scales", "list", "3, 4.5, 6, 7.5, 9, 10.5", "radii in units of w(U)"},
            {"width", "number", "auto", "w(U) (default: computed capacity width)"},
            {"eta", "number", "1/3", "capacity fraction for w(U)"}};
  }
  if (experiment == "geometry_audit") {
    return {{"samples", "integer", "100", "sampled (x, r)"},
            {"pairs", "integer", "100", "sampled pairs for the uniformity certificate"},
            {"C", "number", "2", "length constant to certify"},
            {"candidates", "list", "0.5, 0.4, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05", "cigar constants tried"},
            {"r_min", "number", "auto", "smallest sampled radius (default 4h)"},
            {"r_max", "number", "auto", "largest sampled radius (default diameter / 4)"}};
  }
  config_error("unknown experiment '" + experiment + "'");
}

namespace {

class Params {
 public:
  explicit Params(const RunConfig& cfg) : cfg_(cfg), info_(experiment_parameters(cfg.experiment)) {
    for (const auto& [k, v] : cfg.params) {
      if (!find(k)) config_error("unknown parameter '" + k + "' for experiment " + cfg.experiment);
    }
  }

  bool is_auto(const std::string& key) const {
    const std::string v = raw(key);
    return v == "auto" || v == "none";
  }

  double number(const std::string& key) const {
    double d = 0.0;
    const std::string v = raw(key);
    if (!parse_double(v, d, true)) bad(key, "a number", v);
    return d;
  }

  int integer(const std::string& key) const {
    double d = 0.0;
    const std::string v = raw(key);
    if (!parse_double(v, d) || d != std::floor(d) || std::abs(d) > 1e9) bad(key, "an integer", v);
    return static_cast<int>(d);
  }

  std::vector<double> list(const std::string& key) const {
    const std::string v = raw(key);
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const std::size_t end = std::min(v.find(',', pos), v.size());
      double d = 0.0;
      if (!parse_double(trim(std::string_view(v).substr(pos, end - pos)), d, true)) bad(key, "a list of numbers", v);
      out.push_back(d);
      pos = end + 1;
    }
    if (out.empty()) bad(key, "a list of numbers", v);
    return out;
  }

  Vec2 point(const std::string& key) const {
    const std::vector<double> xy = list(key);
    if (xy.size() != 2) bad(key, "a point 'x, y'", raw(key));
    return {xy[0], xy[1]};
  }

  std::vector<Vec2> points(const std::string& key) const {
    const std::string v = raw(key);
    std::vector<Vec2> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const std::size_t end = std::min(v.find(';', pos), v.size());
      const std::string_view item = trim(std::string_view(v).substr(pos, end - pos));
      const std::size_t comma = item.find(',');
      double x = 0.0, y = 0.0;
      if (comma == std::string_view::npos || !parse_double(trim(item.substr(0, comma)), x, true) ||
          !parse_double(trim(item.substr(comma + 1)), y, true)) {
        bad(key, "points 'x, y; x, y'", v);
      }
      out.push_back({x, y});
      pos = end + 1;
    }
    return out;
  }

  std::string text(const std::string& key) const { return raw(key); }

  bool boolean(const std::string& key) const {
    const std::string v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad(key, "true or false", v);
  }

  // Parses every parameter by its declared type.
  void check_all() const {
    for (const ParameterInfo& p : info_) {
      if (is_auto(p.name) && (p.fallback == "auto" || p.fallback == "none")) continue;
      if (p.type == "number") number(p.name);
      else if (p.type == "integer") integer(p.name);
      else if (p.type == "list") list(p.name);
      else if (p.type == "point") point(p.name);
      else if (p.type == "points") points(p.name);
      else if (p.type == "boolean") boolean(p.name);
      else raw(p.name);
    }
  }

 private:
  const ParameterInfo* find(const std::string& key) const {
    for (const ParameterInfo& p : info_) {
      if (p.name == key) return &p;
    }
    return nullptr;
  }

  std::string raw(const std::string& key) const {
    if (auto it = cfg_.params.find(key); it != cfg_.params.end()) return it->second;
    const ParameterInfo* p = find(key);
    if (!p) config_error("internal: undeclared parameter '" + key + "'");
    if (p->fallback.empty()) config_error("parameter '" + key + "' is required for experiment " + cfg_.experiment);
    return p->fallback;
  }

  [[noreturn]] static void bad(const std::string& key, const std::string& expected, const std::string& got) {
    config_error("parameter '" + key + "' must be " + expected + ", got '" + got + "'");
  }

  const RunConfig& cfg_;
  std::vector<ParameterInfo> info_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate_config(const RunConfig& cfg) {
  std::vector<std::string> out;
  const std::vector<std::string> kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), cfg.experiment) == kinds.end()) {
    out.push_back("error: unknown experiment '" + cfg.experiment + "'");
    return out;
  }
  try {
    Params(cfg).check_all();
  } catch (const Error& e) {
    out.push_back(std::string("error: ") + e.what());
  }
  if (!(cfg.h > 0.0)) out.push_back("error: h must be positive");
  try {
    const Domain domain = load_domain(cfg.resolve(cfg.domain));
    domain.validate();
    for (std::size_t k = 0; k < domain.slits.size(); ++k) {
      if (cfg.h > domain.slits[k].length()) {
        out.push_back("warning: h = " + format_double(cfg.h) + " exceeds the length " +
                      format_double(domain.slits[k].length()) + " of slit " + std::to_string(k) +
                      "; the slit is not resolved");
      }
    }
    const Rect bb = domain.bounding_box();
    if (cfg.h > 0.25 * std::min(bb.x1 - bb.x0, bb.y1 - bb.y0)) {
      out.push_back("warning: h is coarser than a quarter of the smallest domain extent");
    }
  } catch (const Error& e) {
    out.push_back(std::string("error: domain: ") + e.what());
  }
  try {
    CoefficientField::load(cfg.resolve(cfg.coefficients));
  } catch (const Error& e) {
    out.push_back(std::string("error: coefficients: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(workers, 1, n);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

struct Context {
  const RunConfig& cfg;
  Params params;
  std::shared_ptr<const Grid> grid;
  std::unique_ptr<AssembledForm> form;
  RunStamp stamp;
  Summary summary;
  std::vector<std::pair<std::string, std::string>> files;  // name, content

  void csv(const std::string& name, const CsvTable& table) {
    files.emplace_back(name, stamp.comment("#") + "\n" + table.body());
  }
  void svg(const std::string& name, const Plot& plot) {
    files.emplace_back(name, stamp.comment("<!--") + " -->\n" + render_svg(plot));
  }

  int node_near(Vec2 p, const std::string& what) const {
    const int n = grid->nearest_node(p);
    if (n < 0) config_error("no grid node near " + what);
    return n;
  }

  int boundary_point() const {
    const Vec2 p = params.point("xi");
    const int side = params.integer("side");
    if (side < -1 || side > 1) config_error("side must be -1, 0 or 1");
    const int b = grid->find_boundary(p, side);
    if (b < 0) config_error("no boundary vertex with the requested side near xi");
    return b;
  }

  BhpConfig bhp_config() const {
    BhpConfig b;
    b.xi = boundary_point();
    b.c_u = params.number("c_u");
    b.C_u = params.number("C_u");
    if (!(b.c_u > 0.0) || b.c_u > 1.0) config_error("c_u must lie in (0, 1]");
    if (!(b.C_u >= 1.0)) config_error("C_u must be at least 1");
    b.seed = cfg.seed;
    return b;
  }

  void record_xi(int xi) {
    const BoundaryNode& b = grid->boundary()[xi];
    summary.set("xi_x", b.position.x);
    summary.set("xi_y", b.position.y);
    summary.set("xi_side", b.side);
  }
};

void run_capacity(Context& ctx) {
  const Grid& grid = *ctx.grid;
  const Rect bb = grid.domain().bounding_box();
  const Vec2 center =
      ctx.params.is_auto("center") ? Vec2{(bb.x0 + bb.x1) / 2, (bb.y0 + bb.y1) / 2} : ctx.params.point("center");
  const double R = ctx.params.number("R");
  if (!(R > 0.0)) config_error("R must be positive");
  std::vector<double> radii = ctx.params.is_auto("radii") ? std::vector<double>{R / 2, R / 4, R / 8, R / 16}
                                                          : ctx.params.list("radii");
  for (double r : radii) {
    if (!(r > 0.0 && r < R)) config_error("every radius must lie in (0, R)");
  }
  const int x = ctx.node_near(center, "center");
  std::vector<CapacityEstimateRow> rows(radii.size());
  parallel_for(static_cast<int>(radii.size()), ctx.cfg.workers, [&](int k) {
    const double r = radii[k];
    rows[k] = verify_capacity_estimate(*ctx.form, x, std::vector<double>{r}, R).rows.front();
  });

  CsvTable table({"r", "R", "cap", "integral", "rho", "disk_oracle"});
  double lo = INFINITY, hi = 0.0;
  Plot plot{"rho(r) = Cap * integral of s / V(x, s)", "r", "rho", true, false, {{"rho", {}, false}}};
  for (const CapacityEstimateRow& row : rows) {
    table.row().add(row.r).add(R).add(row.cap).add(row.integral).add(row.rho).add(
        2.0 * std::numbers::pi / std::log(R / row.r));
    lo = std::min(lo, row.rho);
    hi = std::max(hi, row.rho);
    plot.series[0].points.emplace_back(row.r, row.rho);
  }
  ctx.csv("capacity.csv", table);
  ctx.svg("capacity.svg", plot);
  ctx.summary.set("center_x", grid.position(x).x);
  ctx.summary.set("center_y", grid.position(x).y);
  ctx.summary.set("R", R);
  ctx.summary.set("rho_min", lo);
  ctx.summary.set("rho_max", hi);
  ctx.summary.set("A_squared_estimate", hi / lo);
}

void run_width(Context& ctx) {
  const Grid& grid = *ctx.grid;
  const std::vector<double> thickness = ctx.params.list("thickness");
  const double eta = ctx.params.number("eta");
  if (!(eta > 0.0 && eta <= 1.0)) config_error("eta must lie in (0, 1]");
  WidthOptions options;
  options.max_samples = ctx.params.integer("max_samples");
  const bool collar = !ctx.params.is_auto("xi");
  int xi = -1;
  double R = 0.0;
  if (collar) {
    xi = ctx.boundary_point();
    R = ctx.params.is_auto("R") ? grid.diameter() : ctx.params.number("R");
    ctx.record_xi(xi);
    ctx.summary.set("R", R);
  }
  const double c_u = ctx.params.number("c_u");
  const double A7 = 2.0 / c_u + 1.0;

  const AmbientContext ambient = make_ambient(*ctx.form);
  std::vector<NodeSet> sets(thickness.size());
  std::vector<WidthResult> results(thickness.size());
  parallel_for(static_cast<int>(thickness.size()), ctx.cfg.workers, [&](int k) {
    const double t = thickness[k];
    if (collar) {
      sets[k] = boundary_collar(grid, xi, R, t);
    } else {
      std::vector<char> m(grid.size(), 0);
      for (int n = 0; n < grid.size(); ++n) m[n] = grid.boundary_distance(n) < t;
      sets[k] = NodeSet::from_mask(m);
    }
    if (sets[k].empty()) throw Error(ErrorKind::EmptySample, "collar of thickness " + format_double(t) + " is empty");
    results[k] = capacity_width(ambient, sets[k], eta, options);
  });

  CsvTable table({"thickness", "set_nodes", "eta", "width", "samples", "width_over_thickness", "within_bound",
                  "evaluations"});
  Plot plot{"capacity width of collars", "thickness", "width", true, true, {{"width", {}, false}}};
  double worst = 0.0;
  for (std::size_t k = 0; k < thickness.size(); ++k) {
    const double ratio = results[k].width / thickness[k];
    worst = std::max(worst, ratio);
    table.row()
        .add(thickness[k])
        .add(sets[k].size())
        .add(eta)
        .add(results[k].width)
        .add(results[k].samples)
        .add(ratio)
        .add(ratio <= A7 * (1.0 + 1e-9))
        .add(results[k].evaluations);
    plot.series[0].points.emplace_back(thickness[k], results[k].width);
  }
  ctx.csv("width.csv", table);
  ctx.svg("width.svg", plot);
  ctx.summary.set("eta", eta);
  ctx.summary.set("A7", A7);
  ctx.summary.set("max_width_ratio", worst);
  ctx.summary.set("within_bound", worst <= A7 * (1.0 + 1e-9));
}

void run_harnack(Context& ctx) {
  const int x = ctx.node_near(ctx.params.point("point"), "point");
  const std::vector<double> radii = ctx.params.list("radii");
  HarnackOptions opt;
  const std::string mode = ctx.params.text("mode");
  if (mode == "elliptic") {
    opt.mode = HarnackMode::elliptic;
  } else if (mode == "parabolic") {
    opt.mode = HarnackMode::parabolic;
  } else {
    config_error("mode must be elliptic or parabolic");
  }
  opt.trials = ctx.params.integer("trials");
  opt.tau = ctx.params.number("tau");
  opt.delta = ctx.params.number("delta");
  opt.steps = ctx.params.integer("steps");
  opt.seed = ctx.cfg.seed;
  if (opt.trials < 1) config_error("trials must be positive");

  std::vector<HarnackEstimate> est(radii.size());
  parallel_for(static_cast<int>(radii.size()), ctx.cfg.workers,
               [&](int k) { est[k] = harnack_constants(*ctx.form, x, radii[k], opt); });

  CsvTable table({"r", "trial", "ratio"});
  Plot plot{mode + " Harnack constant", "r", "constant", true, false, {{"constant", {}, false}}};
  double lo = INFINITY, hi = 0.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    for (std::size_t t = 0; t < est[k].ratios.size(); ++t) {
      table.row().add(radii[k]).add(static_cast<int>(t)).add(est[k].ratios[t]);
    }
    ctx.summary.set("constant_r" + std::to_string(k), est[k].constant);
    lo = std::min(lo, est[k].constant);
    hi = std::max(hi, est[k].constant);
    plot.series[0].points.emplace_back(radii[k], est[k].constant);
  }
  ctx.csv("harnack.csv", table);
  ctx.svg("harnack.svg", plot);
  ctx.summary.set("point_x", ctx.grid->position(x).x);
  ctx.summary.set("point_y", ctx.grid->position(x).y);
  ctx.summary.set("mode", mode);
  ctx.summary.set("constant_max", hi);
  ctx.summary.set("scale_variation", hi / lo);
}

void run_heat(Context& ctx) {
  const int x = ctx.node_near(ctx.params.point("point"), "point");
  const double t = ctx.params.number("t");
  const int steps = ctx.params.integer("steps");
  const bool adjoint = ctx.params.boolean("adjoint");
  const NodeSet all = NodeSet::all(*ctx.grid);
  const HeatSlice slice = heat(*ctx.form, all, x, t, steps, adjoint);
  const double lambda = lowest_eigenvalue(*ctx.form, all);

  CsvTable table({"step", "t", "mass", "p_xx"});
  Plot plot{"heat kernel mass", "t", "mass", false, true, {{"mass", {}, false}}};
  const double dt = t / steps;
  for (int s = 0; s <= steps; ++s) {
    table.row().add(s).add(s * dt).add(slice.mass[s]).add(slice.diagonal[s]);
    if (s > 0) plot.series[0].points.emplace_back(s * dt, slice.mass[s]);
  }
  // Exponential rate of the mass over the second half of the run.
  const int s0 = steps / 2;
  const double rate = -std::log(slice.mass[steps] / slice.mass[s0]) / ((steps - s0) * dt);
  double peak = 1.0;
  for (std::size_t s = 1; s < slice.mass.size(); ++s) peak = std::max(peak, slice.mass[s]);

  ctx.csv("heat.csv", table);
  ctx.svg("heat.svg", plot);
  ctx.summary.set("point_x", ctx.grid->position(x).x);
  ctx.summary.set("point_y", ctx.grid->position(x).y);
  ctx.summary.set("t", t);
  ctx.summary.set("max_mass", peak);
  ctx.summary.set("final_mass", slice.mass.back());
  ctx.summary.set("p_xx", slice.diagonal.back());
  ctx.summary.set("free_space_p_xx", 1.0 / (4.0 * std::numbers::pi * t));
  ctx.summary.set("mass_decay_rate", rate);
  ctx.summary.set("lowest_eigenvalue", lambda);
  ctx.summary.set("min_value", slice.min_value);
  ctx.summary.set("positivity_violations", slice.positivity_violations);
}

void run_carleson(Context& ctx) {
  BhpConfig b = ctx.bhp_config();
  b.r = ctx.params.number("r");
  b.c_omega = ctx.params.number("c_omega");
  b.x_samples = ctx.params.integer("x_samples");
  if (!ctx.params.is_auto("green_radius")) b.override_green_radius = ctx.params.number("green_radius");
  const CarlesonTable result = carleson_estimate(*ctx.form, b);

  CsvTable table({"x_id", "x", "y", "distance", "omega", "green", "ratio", "omega_adjoint", "green_adjoint",
                  "ratio_adjoint"});
  Plot plot{"Carleson ratio", "inner distance from xi", "ratio", false, false,
            {{"direct", {}, true}, {"adjoint", {}, true}}};
  for (const CarlesonRow& row : result.rows) {
    const Vec2 p = ctx.grid->position(row.x);
    table.row()
        .add(row.x)
        .add(p.x)
        .add(p.y)
        .add(row.distance)
        .add(row.omega)
        .add(row.green)
        .add(row.ratio)
        .add(row.omega_adjoint)
        .add(row.green_adjoint)
        .add(row.ratio_adjoint);
    plot.series[0].points.emplace_back(row.distance, row.ratio);
    plot.series[1].points.emplace_back(row.distance, row.ratio_adjoint);
  }
  ctx.csv("carleson.csv", table);
  ctx.svg("carleson.svg", plot);
  ctx.record_xi(b.xi);
  ctx.summary.set("r", b.r);
  ctx.summary.set("A2", result.A2);
  ctx.summary.set("A2_adjoint", result.A2_adjoint);
  ctx.summary.set("anchor_x", ctx.grid->position(result.anchor.node).x);
  ctx.summary.set("anchor_y", ctx.grid->position(result.anchor.node).y);
  ctx.summary.set("anchor_clearance", result.anchor.clearance);
  ctx.summary.set("anchor_clearance_ok", result.clearance_ok);
  ctx.summary.set("green_radius", result.green_radius);
  ctx.summary.set("volume", result.volume);
  ctx.summary.set("conforming", result.conforming);
}

void run_bhp(Context& ctx, bool solutions) {
  BhpConfig b = ctx.bhp_config();
  const std::vector<double> radii = ctx.params.list("radii");
  if (!ctx.params.is_auto("A0")) b.override_A0 = ctx.params.number("A0");
  if (!ctx.params.is_auto("poles")) b.poles = ctx.params.integer("poles");
  int pairs = 0;
  if (solutions) {
    pairs = ctx.params.integer("pairs");
    b.sectors = ctx.params.integer("sectors");
    b.mixtures = ctx.params.integer("mixtures");
  }
  std::vector<BhpReport> reports(radii.size());
  parallel_for(static_cast<int>(radii.size()), ctx.cfg.workers, [&](int k) {
    BhpConfig c = b;
    c.r = radii[k];
    reports[k] = solutions ? solution_bhp(*ctx.form, c, pairs) : green_bhp(*ctx.form, c);
  });

  CsvTable table({"r", "y_prime_radius", "y_prime_nodes", "y_prime_truncated", "x_nodes", "poles", "solutions",
                  "pairs", "A1_green", "A1_solution", "min_solution", "nonpositive_solutions"});
  CsvTable worst({"r", "u", "v", "x_id", "x_prime_id", "ratio"});
  Plot plot{"boundary Harnack ratio", "r", "A1", true, false, {{"A1_green", {}, false}}};
  if (solutions) plot.series.push_back({"A1_solution", {}, false});
  double g_lo = INFINITY, g_hi = 0.0, s_lo = INFINITY, s_hi = 0.0;
  int nonpositive = 0;
  for (const BhpReport& rep : reports) {
    const BhpScale& s = rep.scales.front();
    table.row()
        .add(s.r)
        .add(s.y_prime_radius)
        .add(s.y_prime_nodes)
        .add(s.y_prime_truncated)
        .add(s.x_nodes)
        .add(s.poles)
        .add(s.solutions)
        .add(s.pairs)
        .add(s.A1_green)
        .add(s.A1_solution)
        .add(s.min_solution)
        .add(s.nonpositive_solutions);
    for (const BhpViolation& v : rep.violations) {
      worst.row().add(s.r).add(v.u).add(v.v).add(v.x).add(v.x_prime).add(v.ratio);
    }
    g_lo = std::min(g_lo, s.A1_green), g_hi = std::max(g_hi, s.A1_green);
    s_lo = std::min(s_lo, s.A1_solution), s_hi = std::max(s_hi, s.A1_solution);
    nonpositive += s.nonpositive_solutions;
    plot.series[0].points.emplace_back(s.r, s.A1_green);
    if (solutions) plot.series[1].points.emplace_back(s.r, s.A1_solution);
  }
  const std::string name = solutions ? "solution_bhp" : "green_bhp";
  ctx.csv(name + ".csv", table);
  ctx.csv(name + "_violations.csv", worst);
  ctx.svg(name + ".svg", plot);
  ctx.record_xi(b.xi);
  ctx.summary.set("A0", b.A0());
  ctx.summary.set("A3", b.A3());
  ctx.summary.set("A7", b.A7());
  ctx.summary.set("A8", b.A8());
  ctx.summary.set("y_prime_multiplier", b.y_prime_multiplier());
  ctx.summary.set("conforming", b.conforming());
  ctx.summary.set("A1_green", g_hi);
  ctx.summary.set("A1_green_scale_variation", g_hi / g_lo);
  if (solutions) {
    ctx.summary.set("A1_solution", s_hi);
    ctx.summary.set("A1_solution_scale_variation", s_hi / s_lo);
  }
  ctx.summary.set("nonpositive_solutions", nonpositive);
}

void run_decay(Context& ctx) {
  const Grid& grid = *ctx.grid;
  const double thickness = ctx.params.number("thickness");
  std::vector<char> m(grid.size(), 0);
  for (int n = 0; n < grid.size(); ++n) m[n] = grid.boundary_distance(n) < thickness;
  const NodeSet U = NodeSet::from_mask(m);
  if (U.empty()) throw Error(ErrorKind::EmptySample, "U is empty");
  const double width = ctx.params.is_auto("width")
                           ? capacity_width(*ctx.form, U, ctx.params.number("eta")).width
                           : ctx.params.number("width");
  std::vector<int> xs;
  for (Vec2 p : ctx.params.points("points")) {
    int best = -1;
    double d = INFINITY;
    for (int n : U.members) {
      if (distance(grid.position(n), p) < d) d = distance(grid.position(n), p), best = n;
    }
    xs.push_back(best);
  }
  const std::vector<double> scales = ctx.params.list("scales");
  const int cells = static_cast<int>(xs.size() * scales.size());
  std::vector<DecayRow> rows(cells);
  parallel_for(cells, ctx.cfg.workers, [&](int k) {
    rows[k] = decay_row(*ctx.form, U, xs[k / scales.size()], scales[k % scales.size()] * width, width);
  });
  const DecayFit fit = fit_decay(rows, width);

  CsvTable table({"x_id", "x", "y", "r", "r_over_w", "omega", "log_omega", "excluded"});
  Plot plot{"harmonic measure decay", "r / w(U)", "omega", false, true, {{"omega", {}, true}, {"fit", {}, false}}};
  double lo = INFINITY, hi = -INFINITY;
  for (const DecayRow& row : fit.rows) {
    const Vec2 p = grid.position(row.x);
    table.row()
        .add(row.x)
        .add(p.x)
        .add(p.y)
        .add(row.r)
        .add(row.scaled)
        .add(row.omega)
        .add(row.omega > 0.0 ? std::log(row.omega) : -INFINITY)
        .add(row.excluded);
    if (!row.excluded) {
      plot.series[0].points.emplace_back(row.scaled, row.omega);
      lo = std::min(lo, row.scaled), hi = std::max(hi, row.scaled);
    }
  }
  for (double s : {lo, hi}) plot.series[1].points.emplace_back(s, std::exp(fit.intercept + fit.slope * s));
  ctx.csv("decay.csv", table);
  ctx.svg("decay.svg", plot);
  ctx.summary.set("thickness", thickness);
  ctx.summary.set("width", width);
  ctx.summary.set("slope", fit.slope);
  ctx.summary.set("a1_estimate", -fit.slope);
  ctx.summary.set("intercept", fit.intercept);
  ctx.summary.set("r_squared", fit.r_squared);
  ctx.summary.set("used_rows", fit.used);
}

void run_geometry_audit(Context& ctx) {
  const Grid& grid = *ctx.grid;
  const int samples = ctx.params.integer("samples");
  if (samples < 1) config_error("samples must be positive");
  const double r_min = ctx.params.is_auto("r_min") ? 4.0 * grid.h() : ctx.params.number("r_min");
  const double r_max = ctx.params.is_auto("r_max") ? grid.diameter() / 4.0 : ctx.params.number("r_max");
  if (!(r_min > 0.0 && r_max >= r_min)) config_error("need 0 < r_min <= r_max");

  std::mt19937_64 rng(ctx.cfg.seed);
  std::uniform_int_distribution<int> pick(0, grid.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ComparabilitySample> cs(samples);
  for (ComparabilitySample& s : cs) {
    s.source = Source::node(pick(rng));
    s.r = r_min * std::pow(r_max / r_min, unit(rng));
  }
  struct Cell {
    int inner = 0, component = 0;
    bool included = false;
    double ratio = 0.0;
  };
  std::vector<Cell> cells(samples);
  parallel_for(samples, ctx.cfg.workers, [&](int k) {
    const NodeSet inner = inner_ball(grid, cs[k].source, cs[k].r);
    const NodeSet comp = component_ball(grid, cs[k].source, cs[k].r);
    cells[k] = {inner.size(), comp.size(), is_subset(inner, comp),
                estimate_c_omega(grid, std::span<const ComparabilitySample>(&cs[k], 1)).c_omega};
  });
  std::vector<VolumeSample> vs;
  for (const ComparabilitySample& s : cs) vs.push_back({s.source.index, s.r});
  const double doubling = doubling_estimate(grid, vs);

  const auto pairs = sample_pairs(grid, ctx.params.integer("pairs"), ctx.cfg.seed);
  const double C = ctx.params.number("C");
  const std::vector<double> candidates = ctx.params.list("candidates");
  const double c_u = certified_cigar_constant(grid, C, candidates, pairs);

  CsvTable table({"sample", "node", "x", "y", "r", "inner_nodes", "component_nodes", "included", "c_omega_ratio"});
  double c_omega = 0.0;
  int failures = 0;
  for (int k = 0; k < samples; ++k) {
    const Vec2 p = grid.position(cs[k].source.index);
    table.row()
        .add(k)
        .add(cs[k].source.index)
        .add(p.x)
        .add(p.y)
        .add(cs[k].r)
        .add(cells[k].inner)
        .add(cells[k].component)
        .add(cells[k].included)
        .add(cells[k].ratio);
    c_omega = std::max(c_omega, cells[k].ratio);
    failures += cells[k].included ? 0 : 1;
  }
  ctx.csv("geometry_audit.csv", table);
  ctx.summary.set("C_omega", c_omega);
  ctx.summary.set("inclusion_failures", failures);
  ctx.summary.set("doubling", doubling);
  ctx.summary.set("C_u", C);
  ctx.summary.set("certified_c_u", c_u);
  ctx.summary.set("uniformity_pairs", static_cast<int>(pairs.size()));
  ctx.summary.set("metrication_factor", metrication_factor(grid.stencil()));
}

}  // namespace

RunResult run_experiment(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx{cfg, Params(cfg), nullptr, nullptr, {cfg.experiment, cfg.hash(), cfg.seed}, {}, {}};
  ctx.params.check_all();

  const Domain domain = load_domain(cfg.resolve(cfg.domain));
  const CoefficientField coeff = CoefficientField::load(cfg.resolve(cfg.coefficients));
  ctx.grid = std::make_shared<const Grid>(build_grid(domain, cfg.h, cfg.stencil));
  if (cfg.experiment != "geometry_audit") ctx.form = std::make_unique<AssembledForm>(assemble(ctx.grid, coeff));

  Summary& s = ctx.summary;
  s.set("experiment", cfg.experiment);
  s.set("config_hash", ctx.stamp.config_hash);
  s.set("seed", std::to_string(cfg.seed));
  s.set("domain", domain.name);
  s.set("coefficients", coeff.name);
  s.set("h", cfg.h);
  s.set("stencil", std::string(cfg.stencil == Stencil::eight ? "8" : "16"));
  s.set("nodes", ctx.grid->size());
  s.set("boundary_points", static_cast<int>(ctx.grid->boundary().size()));
  if (ctx.form) s.set("solver", std::string(ctx.form->E_skew.nonZeros() == 0 ? "LDLT" : "LU"));
  for (const auto& [k, v] : cfg.params) s.set("param." + k, v);

  const std::string& e = cfg.experiment;
  if (e == "capacity") run_capacity(ctx);
  else if (e == "width") run_width(ctx);
  else if (e == "harnack") run_harnack(ctx);
  else if (e == "heat") run_heat(ctx);
  else if (e == "carleson") run_carleson(ctx);
  else if (e == "green_bhp") run_bhp(ctx, false);
  else if (e == "solution_bhp") run_bhp(ctx, true);
  else if (e == "decay") run_decay(ctx);
  else if (e == "geometry_audit") run_geometry_audit(ctx);
  else config_error("unknown experiment '" + e + "'");

  s.set("seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

  RunResult result;
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) config_error("cannot create output directory " + cfg.output + ": " + ec.message());
  ctx.files.emplace_back("summary.txt", ctx.stamp.comment("#") + "\n" + s.text());
  for (const auto& [name, content] : ctx.files) {
    const std::string path = (fs::path(cfg.output) / name).string();
    write_file(path, content);
    result.files.push_back(path);
  }
  result.summary = std::move(ctx.summary);
  return result;
}

}  // namespace bhplab
