#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "bhplab/bhp.hpp"
#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"

using namespace bhplab;

namespace {

std::shared_ptr<const Grid> grid_of(const std::string& preset, double h) {
  return std::make_shared<const Grid>(build_grid(preset_domain(preset), h));
}

BhpConfig flat_edge(const Grid& g, double r) {
  BhpConfig cfg;
  cfg.xi = g.find_boundary({0.5, 0.0});
  cfg.r = r;
  cfg.override_A0 = 12.0;
  cfg.mixtures = 16;
  return cfg;
}

}  // namespace

TEST_CASE("constant formulas") {
  BhpConfig cfg;
  CHECK(cfg.A3() == doctest::Approx(52.8));
  CHECK(cfg.A0() == doctest::Approx(59.8));
  CHECK(cfg.A7() == doctest::Approx(5.0));
  CHECK(cfg.A8() == doctest::Approx(119.6));
  CHECK(cfg.conforming());
  cfg.c_u = 0.1;
  CHECK(cfg.A7() == doctest::Approx(21.0));
  CHECK(cfg.A8() == doctest::Approx(294.0));
  cfg.override_A0 = 16.0;
  CHECK(!cfg.conforming());
  CHECK(cfg.y_prime_multiplier() == 16.0);
}

TEST_CASE("Green four-point ratio at a flat edge") {
  const auto g = grid_of("square", 1.0 / 128);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const BhpConfig cfg = flat_edge(*g, 1.0 / 32);
  const BhpReport green_only = green_bhp(f, cfg);
  REQUIRE(green_only.scales.size() == 1);
  const BhpScale& s = green_only.scales[0];
  CHECK(green_only.A1_green >= 1.0);
  CHECK(std::isfinite(green_only.A1_green));
  CHECK(!green_only.conforming);
  CHECK(s.x_nodes >= 8);
  CHECK(s.poles >= 8);
  CHECK(s.y_prime_radius == doctest::Approx(12.0 / 32));
  CHECK(green_only.symmetric_solver);
  for (std::size_t k = 1; k < green_only.violations.size(); ++k) {
    CHECK(green_only.violations[k - 1].ratio >= green_only.violations[k].ratio);
  }

  const BhpReport sol = solution_bhp(f, cfg, 200);
  CHECK(sol.scales[0].pairs >= 200);
  CHECK(sol.scales[0].nonpositive_solutions == 0);
  CHECK(sol.scales[0].min_solution > 0.0);
  CHECK(sol.A1_solution >= 1.0);
  CHECK(sol.A1_solution == doctest::Approx(sol.A1_green).epsilon(0.25));

  // Same seed, same numbers.
  const BhpReport again = solution_bhp(f, cfg, 200);
  CHECK(again.A1_solution == sol.A1_solution);
  CHECK(again.scales[0].pairs == sol.scales[0].pairs);
}

TEST_CASE("drift changes the constant only mildly") {
  const auto g = grid_of("square", 1.0 / 128);
  const BhpConfig cfg = flat_edge(*g, 1.0 / 32);
  const double lap = green_bhp(assemble(g, CoefficientField::laplacian()), cfg).A1_green;
  const BhpReport drift = green_bhp(assemble(g, CoefficientField::drift(1.0)), cfg);
  CHECK(!drift.symmetric_solver);
  CHECK(drift.A1_green / lap <= 3.0);
  CHECK(lap / drift.A1_green <= 3.0);
}

TEST_CASE("too fine a scale is rejected") {
  const auto g = grid_of("square", 1.0 / 64);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  BhpConfig cfg = flat_edge(*g, 1.0 / 64);
  try {
    green_bhp(f, cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScaleTooFine);
  }
  const std::vector<double> radii = {1.0 / 16, 1.0 / 64};
  CHECK_THROWS_AS(bhp_scales(f, cfg, radii, false, 0), Error);
}

TEST_CASE("multi-scale merge takes the maximum") {
  const auto g = grid_of("square", 1.0 / 128);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const BhpConfig cfg = flat_edge(*g, 1.0 / 32);
  const std::vector<double> radii = {1.0 / 32, 1.0 / 16};
  const BhpReport r = bhp_scales(f, cfg, radii, false, 0);
  REQUIRE(r.scales.size() == 2);
  CHECK(r.A1_green == std::max(r.scales[0].A1_green, r.scales[1].A1_green));
  CHECK(r.scales[0].r == 1.0 / 32);
  CHECK(r.scales[1].r == 1.0 / 16);
}

TEST_CASE("harmonic measure decays exponentially across a thin collar") {
  const double h = 1.0 / 128;
  const auto g = grid_of("square", h);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  NodeSet U;
  for (int n = 0; n < g->size(); ++n) {
    if (g->boundary_distance(n) < 1.0 / 16 * (1 + 1e-12)) U.members.push_back(n);
  }
  const double w = 1.0 / 32;
  const std::vector<int> xs = {g->nearest_node({0.5, 1.0 / 32}), g->nearest_node({1.0 / 32, 0.5})};
  const std::vector<double> radii = {2 * w, 3 * w, 4 * w, 6 * w, 8 * w, 10 * w};
  const DecayFit fit = harmonic_measure_decay(f, U, xs, radii, w);
  CHECK(fit.rows.size() == xs.size() * radii.size());
  for (const DecayRow& row : fit.rows) {
    CHECK(row.scaled == doctest::Approx(row.r / w));
    if (row.scaled <= 2.0) CHECK(row.excluded);
    CHECK(row.omega >= 0.0);
    CHECK(row.omega <= 1.0 + 1e-12);
  }
  CHECK(fit.used == 10);
  CHECK(fit.slope < 0.0);
  CHECK(fit.r_squared >= 0.9);

  const std::vector<double> too_few = {2 * w, 3 * w};
  CHECK_THROWS_AS(harmonic_measure_decay(f, U, std::vector<int>{xs[0]}, too_few, w), Error);
}

TEST_CASE("boundary collar width at a slit tip") {
  const auto g = grid_of("slit_square", 1.0 / 64);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const int tip = g->find_boundary({0.5, 0.5});
  REQUIRE(tip >= 0);
  const NodeSet collar = boundary_collar(*g, tip, 0.25, 1.0 / 16);
  for (int n : collar.members) CHECK(g->boundary_distance(n) < 1.0 / 16 + 1e-12);
  CHECK(is_subset(boundary_collar(*g, tip, 0.25, 1.0 / 32), collar));

  const std::vector<double> radii = {1.0 / 16, 1.0 / 32};
  const CollarTable t = capacity_width_boundary(f, tip, 0.25, radii, 0.3);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.A7 == doctest::Approx(2.0 / 0.3 + 1.0));
  for (const CollarRow& row : t.rows) {
    CHECK(row.within);
    CHECK(row.ratio == doctest::Approx(row.width / row.r));
  }
  CHECK(t.rows[1].width / t.rows[0].width == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("Carleson estimate") {
  const auto g = grid_of("square", 1.0 / 128);
  const AssembledForm f = assemble(g, CoefficientField::drift(1.0));
  BhpConfig cfg;
  cfg.xi = g->find_boundary({0.5, 0.0});
  cfg.r = 1.0 / 16;
  cfg.override_green_radius = 6.0;
  const CarlesonTable t = carleson_estimate(f, cfg);
  CHECK(!t.conforming);
  CHECK(t.clearance_ok);
  CHECK(t.green_radius == doctest::Approx(6.0 / 16));
  CHECK(t.volume > 0.0);
  REQUIRE(t.rows.size() >= 8);
  CHECK(std::isfinite(t.A2));
  CHECK(t.A2 > 0.0);
  CHECK(t.A2_adjoint / t.A2 == doctest::Approx(1.0).epsilon(0.5));
  for (const CarlesonRow& row : t.rows) {
    CHECK(row.distance < cfg.r);
    CHECK(row.omega > 0.0);
    CHECK(row.green > 0.0);
    CHECK(row.ratio <= t.A2 * (1 + 1e-12));
  }
}
