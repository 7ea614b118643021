#include "bhplab/bhp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "bhplab/error.hpp"

namespace bhplab {

double BhpConfig::A8() const { return 2.0 * std::max(A0(), 7.0 * A7()); }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double angle_around(Vec2 center, Vec2 p) { return std::atan2(p.y - center.y, p.x - center.x); }

// `count` members of `nodes` spread evenly in angle around `center`.
std::vector<int> stratified(const Grid& grid, Vec2 center, std::vector<int> nodes, int count) {
  std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
    const double ta = angle_around(center, grid.position(a));
    const double tb = angle_around(center, grid.position(b));
    return ta != tb ? ta < tb : a < b;
  });
  const int n = static_cast<int>(nodes.size());
  if (count >= n) return nodes;
  std::vector<int> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(nodes[(2 * k + 1) * n / (2 * count)]);
  return out;
}

// Nodes with |d - radius| <= h / 2, widened to h when that band is empty.
std::vector<int> sphere_band(const DistanceField& d, double radius, double h) {
  for (double half : {0.5 * h, h}) {
    std::vector<int> band;
    for (int n = 0; n < static_cast<int>(d.dist.size()); ++n) {
      if (std::abs(d[n] - radius) <= half) band.push_back(n);
    }
    if (!band.empty()) return band;
  }
  return {};
}

struct Member {
  std::string label;
  std::vector<double> values;  // on the x-set, normalized to max 1
};

struct Setup {
  DistanceField dist;
  Vec2 xi_pos;
  NodeSet y_prime;
  bool truncated = false;
  std::vector<int> xs;
  std::vector<int> poles;
};

Setup prepare(const AssembledForm& form, const BhpConfig& cfg) {
  const Grid& grid = *form.grid;
  const double h = grid.h();
  if (cfg.xi < 0 || cfg.xi >= static_cast<int>(grid.boundary().size())) {
    throw Error(ErrorKind::ConfigError, "boundary point index out of range");
  }
  if (!(cfg.r > 0.0)) throw Error(ErrorKind::ConfigError, "scale r must be positive");
  if (6.0 * cfg.r < 8.0 * h) {
    throw Error(ErrorKind::ScaleTooFine, "sphere of radius 6r is below 8 grid spacings");
  }
  Setup s{inner_distance(grid, Source::boundary(cfg.xi)), grid.boundary()[cfg.xi].position, {}, false, {}, {}};
  s.y_prime = inner_ball(s.dist, cfg.y_prime_multiplier() * cfg.r);
  s.truncated = s.y_prime.size() == grid.size();

  const std::vector<int> band = sphere_band(s.dist, 6.0 * cfg.r, h);
  const int wanted =
      cfg.poles > 0 ? cfg.poles
                    : std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * 6.0 * cfg.r / h / 4.0)));
  s.poles = stratified(grid, s.xi_pos, band, wanted);
  std::erase_if(s.poles, [&](int y) { return !s.y_prime.contains(y); });
  if (s.poles.size() < 8) {
    throw Error(ErrorKind::ScaleTooFine, "fewer than 8 poles on the sphere of radius 6r");
  }

  const double mask = 4.0 * h;
  for (int n = 0; n < grid.size(); ++n) {
    if (!(s.dist[n] < cfg.r)) continue;
    const Vec2 p = grid.position(n);
    const bool near_pole = std::any_of(s.poles.begin(), s.poles.end(),
                                       [&](int y) { return distance(p, grid.position(y)) <= mask; });
    if (!near_pole) s.xs.push_back(n);
  }
  if (s.xs.size() < 8) throw Error(ErrorKind::ScaleTooFine, "fewer than 8 nodes in B(xi, r)");
  return s;
}

Member restrict_to(const std::string& label, const ScalarField& field, const std::vector<int>& xs) {
  Member m{label, {}};
  m.values.reserve(xs.size());
  double top = 0.0;
  for (int x : xs) {
    m.values.push_back(field[x]);
    top = std::max(top, field[x]);
  }
  if (top > 0.0) {
    for (double& v : m.values) v /= top;
  }
  return m;
}

struct PairScan {
  double worst = 1.0;
  long long pairs = 0;
  std::vector<BhpViolation> top;
};

void keep_top(std::vector<BhpViolation>& top, BhpViolation v, std::size_t limit = 5) {
  top.push_back(std::move(v));
  std::sort(top.begin(), top.end(), [](const BhpViolation& a, const BhpViolation& b) { return a.ratio > b.ratio; });
  if (top.size() > limit) top.pop_back();
}

// Exact maximum over all pairs of members and all x, x' of the four-point
// ratio, computed as exp(max - min) of log u - log v.
PairScan scan_pairs(const std::vector<Member>& family, const std::vector<int>& xs) {
  PairScan scan;
  const std::size_t nx = xs.size();
  std::vector<std::vector<double>> logs(family.size());
  std::vector<char> usable(family.size(), 1);
  for (std::size_t k = 0; k < family.size(); ++k) {
    logs[k].resize(nx);
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = family[k].values[i];
      if (!(v > 0.0)) usable[k] = 0;
      logs[k][i] = v > 0.0 ? std::log(v) : 0.0;
    }
  }
  for (std::size_t a = 0; a < family.size(); ++a) {
    if (!usable[a]) continue;
    for (std::size_t b = a + 1; b < family.size(); ++b) {
      if (!usable[b]) continue;
      double hi = -INFINITY, lo = INFINITY;
      std::size_t ihi = 0, ilo = 0;
      for (std::size_t i = 0; i < nx; ++i) {
        const double q = logs[a][i] - logs[b][i];
        if (q > hi) hi = q, ihi = i;
        if (q < lo) lo = q, ilo = i;
      }
      ++scan.pairs;
      const double ratio = std::exp(hi - lo);
      if (ratio > scan.worst) scan.worst = ratio;
      if (scan.top.size() < 5 || ratio > scan.top.back().ratio) {
        keep_top(scan.top, {family[a].label, family[b].label, xs[ihi], xs[ilo], ratio});
      }
    }
  }
  return scan;
}

BhpScale run_scale(const AssembledForm& form, const BhpConfig& cfg, bool solutions, int pairs,
                   std::vector<BhpViolation>& violations) {
  const auto t0 = Clock::now();
  const Grid& grid = *form.grid;
  const Setup s = prepare(form, cfg);

  BhpScale scale;
  scale.r = cfg.r;
  scale.y_prime_radius = cfg.y_prime_multiplier() * cfg.r;
  scale.y_prime_truncated = s.truncated;
  scale.y_prime_nodes = s.y_prime.size();
  scale.x_nodes = static_cast<int>(s.xs.size());
  scale.poles = static_cast<int>(s.poles.size());

  const DirichletSolver solver(form, s.y_prime);
  std::vector<Member> greens;
  for (int y : s.poles) {
    greens.push_back(restrict_to("green:" + std::to_string(y), green(solver, y).field, s.xs));
  }
  const PairScan green_scan = scan_pairs(greens, s.xs);
  scale.A1_green = green_scan.worst;

  std::vector<Member> family = greens;
  PairScan scan = green_scan;
  if (solutions) {
    // Poles farther out: spheres at 9r, 13.5r, ... while they stay inside Y'.
    const double h = grid.h();
    for (double rad = 9.0 * cfg.r; rad < scale.y_prime_radius - 2.0 * h; rad *= 1.5) {
      std::vector<int> band = sphere_band(s.dist, rad, h);
      std::erase_if(band, [&](int y) { return !s.y_prime.contains(y); });
      for (int y : stratified(grid, s.xi_pos, band, 8)) {
        family.push_back(restrict_to("green:" + std::to_string(y), green(solver, y).field, s.xs));
      }
    }

    // Harmonic measures of angular sectors of the far outer layer of Y'.
    const BoundaryPortion layer = boundary_layer(form, s.y_prime);
    const int sectors = std::max(1, cfg.sectors);
    std::vector<BoundaryPortion> parts(sectors);
    auto sector_of = [&](Vec2 p) {
      const double t = (angle_around(s.xi_pos, p) + std::numbers::pi) / (2.0 * std::numbers::pi);
      return std::clamp(static_cast<int>(t * sectors), 0, sectors - 1);
    };
    for (int n : layer.nodes) parts[sector_of(grid.position(n))].nodes.push_back(n);
    for (int w : layer.walls) {
      const BoundaryNode& b = grid.boundary()[w];
      double d = INFINITY;
      for (const Edge& e : b.neighbors) d = std::min(d, s.dist[e.to] + e.length);
      if (d >= 6.0 * cfg.r && w != cfg.xi) parts[sector_of(b.position)].walls.push_back(w);
    }
    for (int k = 0; k < sectors; ++k) {
      if (parts[k].empty()) continue;
      family.push_back(restrict_to("sector:" + std::to_string(k), harmonic_measure(solver, parts[k]), s.xs));
    }

    // Random positive mixtures until the pair count is reached.
    const std::size_t base = family.size();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, base - 1);
    std::uniform_int_distribution<int> terms(2, 4);
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    int mixtures = std::max(0, cfg.mixtures);
    while (true) {
      const long long n = static_cast<long long>(base) + mixtures;
      if (n * (n - 1) / 2 >= pairs) break;
      ++mixtures;
    }
    for (int m = 0; m < mixtures; ++m) {
      std::vector<double> mix(s.xs.size(), 0.0);
      const int count = terms(rng);
      for (int t = 0; t < count; ++t) {
        const Member& src = family[pick(rng)];
        const double w = weight(rng);
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += w * src.values[i];
      }
      const double top = *std::max_element(mix.begin(), mix.end());
      for (double& v : mix) v /= top;
      family.push_back({"mix:" + std::to_string(m), std::move(mix)});
    }
    scan = scan_pairs(family, s.xs);
    scale.A1_solution = scan.worst;
  }

  scale.solutions = static_cast<int>(family.size());
  scale.pairs = scan.pairs;
  scale.min_solution = INFINITY;
  for (const Member& m : family) {
    const double lo = *std::min_element(m.values.begin(), m.values.end());
    scale.min_solution = std::min(scale.min_solution, lo);
    if (!(lo > 0.0)) ++scale.nonpositive_solutions;
  }
  for (BhpViolation& v : scan.top) keep_top(violations, std::move(v), 10);
  scale.seconds = seconds_since(t0);
  return scale;
}

BhpReport make_report(const AssembledForm& form, const BhpConfig& cfg) {
  BhpReport report;
  report.conforming = cfg.conforming();
  report.A0 = cfg.A0();
  report.A3 = cfg.A3();
  report.A7 = cfg.A7();
  report.A8 = cfg.A8();
  report.h = form.grid->h();
  report.grid_nodes = form.grid->size();
  report.symmetric_solver = form.E_skew.nonZeros() == 0;
  return report;
}

void merge(BhpReport& report, const BhpScale& scale) {
  report.A1_green = std::max(report.A1_green, scale.A1_green);
  report.A1_solution = std::max(report.A1_solution, scale.A1_solution);
  report.scales.push_back(scale);
}

}  // namespace

BhpReport green_bhp(const AssembledForm& form, const BhpConfig& cfg) {
  BhpReport report = make_report(form, cfg);
  merge(report, run_scale(form, cfg, false, 0, report.violations));
  return report;
}

BhpReport solution_bhp(const AssembledForm& form, const BhpConfig& cfg, int pairs) {
  BhpReport report = make_report(form, cfg);
  merge(report, run_scale(form, cfg, true, pairs, report.violations));
  return report;
}

BhpReport bhp_scales(const AssembledForm& form, BhpConfig cfg, std::span<const double> radii, bool solutions,
                     int pairs) {
  BhpReport report = make_report(form, cfg);
  for (double r : radii) {
    cfg.r = r;
    merge(report, run_scale(form, cfg, solutions, pairs, report.violations));
  }
  return report;
}

// ---------------------------------------------------------------------------

DecayRow decay_row(const AssembledForm& form, const NodeSet& U, int x, double r, double width) {
  const Grid& grid = *form.grid;
  const std::vector<char> in_u = U.mask(grid.size());
  if (!in_u[x]) throw Error(ErrorKind::ConfigError, "decay sample point outside U");
  DecayRow row;
  row.x = x;
  row.r = r;
  row.scaled = r / width;
  const NodeSet ball = metric_ball(grid, grid.position(x), r);
  std::vector<char> both(grid.size(), 0);
  for (int n : ball.members) both[n] = in_u[n];
  const NodeSet D = connected_component(grid, NodeSet::from_mask(both), x);
  BoundaryPortion S;
  for (int n : boundary_layer(form, D).nodes) {
    if (in_u[n]) S.nodes.push_back(n);
  }
  row.omega = S.empty() ? 0.0 : harmonic_measure(form, D, S)[x];
  row.excluded = row.scaled <= 2.0 || !(row.omega > 1e-13);
  return row;
}

DecayFit fit_decay(std::vector<DecayRow> rows, double width) {
  DecayFit fit;
  fit.width = width;
  fit.rows = std::move(rows);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int n = 0;
  for (const DecayRow& row : fit.rows) {
    if (row.excluded) continue;
    const double X = row.scaled, Y = std::log(row.omega);
    sx += X, sy += Y, sxx += X * X, sxy += X * Y, syy += Y * Y;
    ++n;
  }
  fit.used = n;
  const double vx = sxx - sx * sx / std::max(n, 1);
  if (n < 3 || !(vx > 0.0)) {
    throw Error(ErrorKind::DegenerateRegression,
                "only " + std::to_string(n) + " usable rows with distinct r / w(U)");
  }
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  fit.slope = cxy / vx;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.r_squared = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return fit;
}

DecayFit harmonic_measure_decay(const AssembledForm& form, const NodeSet& U, std::span<const int> xs,
                                std::span<const double> radii, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw Error(ErrorKind::DegenerateRegression, "capacity width must be positive and finite");
  }
  std::vector<DecayRow> rows;
  for (int x : xs) {
    for (double r : radii) rows.push_back(decay_row(form, U, x, r, width));
  }
  return fit_decay(std::move(rows), width);
}

NodeSet boundary_collar(const Grid& grid, int xi, double R, double r) {
  const NodeSet ball = inner_ball(grid, Source::boundary(xi), R);
  NodeSet collar;
  for (int n : ball.members) {
    if (grid.boundary_distance(n) < r) collar.members.push_back(n);
  }
  return collar;
}

CollarTable capacity_width_boundary(const AssembledForm& form, int xi, double R, std::span<const double> radii,
                                    double c_u, const WidthOptions& options) {
  CollarTable table;
  table.R = R;
  table.A7 = 2.0 / c_u + 1.0;
  const AmbientContext ambient = make_ambient(form);
  for (double r : radii) {
    CollarRow row;
    row.r = r;
    const NodeSet collar = boundary_collar(*form.grid, xi, R, r);
    row.collar_nodes = collar.size();
    if (collar.empty()) throw Error(ErrorKind::EmptySample, "collar of radius " + std::to_string(r) + " is empty");
    row.width = capacity_width(ambient, collar, 1.0 / 3.0, options).width;
    row.ratio = row.width / r;
    row.within = row.ratio <= table.A7 * (1.0 + 1e-9);
    table.rows.push_back(row);
  }
  return table;
}

CarlesonTable carleson_estimate(const AssembledForm& form, const BhpConfig& cfg) {
  const Grid& grid = *form.grid;
  if (cfg.xi < 0 || cfg.xi >= static_cast<int>(grid.boundary().size())) {
    throw Error(ErrorKind::ConfigError, "boundary point index out of range");
  }
  const double r = cfg.r;
  CarlesonTable table;
  table.anchor = boundary_anchor(grid, cfg.xi, r, 4.0);
  table.clearance_ok = table.anchor.clearance >= 2.0 * cfg.c_u * r;
  table.conforming = !cfg.override_green_radius.has_value();
  table.green_radius = cfg.override_green_radius.value_or(cfg.c_omega * cfg.A3()) * r;
  table.volume = volume(grid, Source::boundary(cfg.xi), r);

  const DistanceField d = inner_distance(grid, Source::boundary(cfg.xi));
  const NodeSet ball2 = inner_ball(d, 2.0 * r);
  const NodeSet big = inner_ball(d, table.green_radius);
  if (!big.contains(table.anchor.node)) {
    throw Error(ErrorKind::NoInteriorAnchor, "anchor lies outside the Green ball");
  }
  BoundaryPortion sphere = boundary_layer(form, ball2);
  sphere.walls.clear();

  std::vector<int> inside;
  for (int n : inner_ball(d, r).members) inside.push_back(n);
  if (inside.empty()) throw Error(ErrorKind::EmptySample, "B(xi, r) has no nodes");
  std::stable_sort(inside.begin(), inside.end(), [&](int a, int b) { return d[a] < d[b]; });
  const int count = std::min<int>(cfg.x_samples, static_cast<int>(inside.size()));
  std::vector<int> xs;
  for (int k = 0; k < count; ++k) xs.push_back(inside[(2 * k + 1) * inside.size() / (2 * count)]);

  const double scale = table.volume / (r * r);
  for (bool adjoint : {false, true}) {
    const DirichletSolver small(form, ball2, {.adjoint = adjoint});
    const DirichletSolver large(form, big, {.adjoint = adjoint});
    const ScalarField omega = harmonic_measure(small, sphere);
    const ScalarField g = green(large, table.anchor.node).field;
    for (int k = 0; k < count; ++k) {
      if (!adjoint) {
        table.rows.push_back({});
        table.rows[k].x = xs[k];
        table.rows[k].distance = d[xs[k]];
      }
      CarlesonRow& row = table.rows[k];
      const double w = omega[xs[k]];
      const double gx = g[xs[k]];
      const double ratio = w / (scale * gx);
      if (adjoint) {
        row.omega_adjoint = w, row.green_adjoint = gx, row.ratio_adjoint = ratio;
        table.A2_adjoint = std::max(table.A2_adjoint, ratio);
      } else {
        row.omega = w, row.green = gx, row.ratio = ratio;
        table.A2 = std::max(table.A2, ratio);
      }
    }
  }
  return table;
}

}  // namespace bhplab
