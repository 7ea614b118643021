#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"
#include "bhplab/solve.hpp"

using namespace bhplab;

namespace {

std::shared_ptr<const Grid> grid_of(const std::string& preset, double h) {
  return std::make_shared<const Grid>(build_grid(preset_domain(preset), h));
}

DirichletData data_from(const Grid& g, double (*f)(Vec2)) {
  DirichletData d = DirichletData::zero(g);
  for (int n = 0; n < g.size(); ++n) d.nodes[n] = f(g.position(n));
  for (int b = 0; b < static_cast<int>(g.boundary().size()); ++b) d.walls[b] = f(g.boundary()[b].position);
  return d;
}

BoundaryPortion filter(const Grid& g, const BoundaryPortion& layer, bool (*keep)(Vec2)) {
  BoundaryPortion s;
  for (int n : layer.nodes) {
    if (keep(g.position(n))) s.nodes.push_back(n);
  }
  for (int b : layer.walls) {
    if (keep(g.boundary()[b].position)) s.walls.push_back(b);
  }
  return s;
}

}  // namespace

TEST_CASE("Dirichlet problem: linear data and constants are reproduced") {
  const auto g = grid_of("square", 1.0 / 32);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const NodeSet U = NodeSet::all(*g);
  const ScalarField u = dirichlet_solve(f, U, data_from(*g, [](Vec2 p) { return 2 * p.x + 3 * p.y + 1; }));
  for (int n = 0; n < g->size(); ++n) {
    const Vec2 p = g->position(n);
    CHECK(u[n] == doctest::Approx(2 * p.x + 3 * p.y + 1).epsilon(1e-9));
  }
  for (const char* name : {"drift", "skew"}) {
    const AssembledForm fd = assemble(g, CoefficientField::preset(name));
    const ScalarField one = dirichlet_solve(fd, U, data_from(*g, [](Vec2) { return 1.0; }));
    CHECK(one.values.maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(one.values.minCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }
  const AssembledForm fk = assemble(g, CoefficientField::killing(10.0));
  const ScalarField killed = dirichlet_solve(fk, U, data_from(*g, [](Vec2) { return 1.0; }));
  CHECK(killed.values.maxCoeff() < 1.0);
  CHECK(killed.values.minCoeff() > 0.0);
}

TEST_CASE("maximum principle") {
  const auto g = grid_of("slit_square", 1.0 / 32);
  for (const char* name : {"laplacian", "drift", "skew"}) {
    const AssembledForm f = assemble(g, CoefficientField::preset(name));
    const ScalarField u = dirichlet_solve(
        f, NodeSet::all(*g), data_from(*g, [](Vec2 p) { return 0.5 + 0.5 * std::sin(7 * p.x) * std::cos(5 * p.y); }));
    CHECK(u.values.minCoeff() >= -1e-12);
    CHECK(u.values.maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("solver rejects empty and disconnected sets") {
  const auto g = grid_of("square", 1.0 / 16);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  auto kind = [&](const NodeSet& U) {
    try {
      DirichletSolver s(f, U);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ParseError;
  };
  CHECK(kind(NodeSet{}) == ErrorKind::SingularSystem);
  NodeSet two;
  two.members = {g->nearest_node({0.2, 0.2}), g->nearest_node({0.8, 0.8})};
  CHECK(kind(two) == ErrorKind::SingularSystem);
}

TEST_CASE("Green function") {
  const auto g = grid_of("big_square", 1.0 / 64);
  const NodeSet disk = metric_ball(*g, {0, 0}, 1.0);
  const int o = g->nearest_node({0, 0});

  SUBCASE("matches the continuum Green function of the disk") {
    const AssembledForm f = assemble(g, CoefficientField::laplacian());
    const GreenSlice G = green(f, disk, o);
    for (double r : {0.25, 0.5, 0.75}) {
      const double exact = std::log(1.0 / r) / (2 * std::numbers::pi);
      CHECK(G.field[g->nearest_node({r, 0})] == doctest::Approx(exact).epsilon(0.03));
    }
  }

  SUBCASE("symmetric form gives a symmetric kernel; adjoint identity in general") {
    const AssembledForm lap = assemble(g, CoefficientField::laplacian());
    const AssembledForm drift = assemble(g, CoefficientField::drift(1.0));
    const int x = g->nearest_node({0.3, -0.2});
    const int y = g->nearest_node({-0.4, 0.5});
    CHECK(green(lap, disk, y).field[x] == doctest::Approx(green(lap, disk, x).field[y]).epsilon(1e-9));
    const double gxy = green(drift, disk, y).field[x];
    const double gyx = green(drift, disk, x).field[y];
    CHECK(std::abs(gxy - gyx) > 1e-6 * gxy);
    CHECK(gxy == doctest::Approx(green(drift, disk, x, true).field[y]).epsilon(1e-8));
    CHECK(gyx == doctest::Approx(green(drift, disk, y, true).field[x]).epsilon(1e-8));
  }

  SUBCASE("positive and increasing in the domain") {
    const AssembledForm f = assemble(g, CoefficientField::drift(1.0));
    const NodeSet half = metric_ball(*g, {0, 0}, 0.5);
    const GreenSlice big = green(f, disk, o);
    const GreenSlice small = green(f, half, o);
    for (int n : half.members) {
      CHECK(small.field[n] > 0.0);
      CHECK(small.field[n] <= big.field[n] * (1 + 1e-12));
    }
    for (int n : disk.members) CHECK(big.field[n] > 0.0);
  }
}

TEST_CASE("harmonic measure") {
  const auto g = grid_of("big_square", 1.0 / 64);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const NodeSet disk = metric_ball(*g, {0, 0}, 0.75);
  const BoundaryPortion layer = boundary_layer(f, disk);
  const int o = g->nearest_node({0, 0});

  const ScalarField all = harmonic_measure(f, disk, layer);
  for (int n : disk.members) CHECK(all[n] == doctest::Approx(1.0).epsilon(1e-9));

  const BoundaryPortion upper = filter(*g, layer, [](Vec2 p) { return p.y > 0; });
  const BoundaryPortion lower = filter(*g, layer, [](Vec2 p) { return p.y <= 0; });
  const ScalarField wu = harmonic_measure(f, disk, upper);
  const ScalarField wl = harmonic_measure(f, disk, lower);
  for (int n : disk.members) {
    CHECK(wu[n] + wl[n] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(wu[n] >= -1e-12);
  }
  CHECK(wu[o] == doctest::Approx(0.5).epsilon(0.05));

  // b . grad f enters E with a plus sign, so b = (beta, 0) pushes towards -x.
  const AssembledForm d = assemble(g, CoefficientField::drift(2.0));
  const BoundaryPortion right = filter(*g, layer, [](Vec2 p) { return p.x > 0; });
  const double w_lap = harmonic_measure(f, disk, right)[o];
  const double w_drift = harmonic_measure(d, disk, right)[o];
  CHECK(w_lap == doctest::Approx(0.5).epsilon(0.05));
  CHECK(w_drift < w_lap);
}

TEST_CASE("heat kernel") {
  const auto g = grid_of("square", 1.0 / 64);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const NodeSet U = NodeSet::all(*g);
  const int c = g->nearest_node({0.5, 0.5});

  SUBCASE("mass is non-increasing and never exceeds one") {
    for (const char* name : {"laplacian", "drift"}) {
      const AssembledForm fm = assemble(g, CoefficientField::preset(name));
      const HeatSlice p = heat(fm, U, c, 0.1, 64);
      CHECK(p.mass.front() == doctest::Approx(1.0));
      for (std::size_t k = 1; k < p.mass.size(); ++k) {
        CHECK(p.mass[k] <= 1.0 + 1e-8);
        CHECK(p.mass[k] <= p.mass[k - 1] * (1 + 1e-12));
      }
    }
  }

  SUBCASE("semigroup identity for the symmetric kernel") {
    const HeatSlice half = heat(f, U, c, 0.02, 40);
    const HeatSlice full = heat(f, U, c, 0.04, 80);
    double conv = 0.0;
    for (int n = 0; n < g->size(); ++n) conv += half.field[n] * half.field[n] * f.mass[n];
    CHECK(conv == doctest::Approx(full.diagonal.back()).epsilon(1e-8));
    CHECK(full.field[c] == doctest::Approx(full.diagonal.back()));
  }

  SUBCASE("short-time diagonal matches free space") {
    const double t = 0.002;
    const HeatSlice p = heat(f, U, c, t, 100);
    CHECK(p.diagonal.back() == doctest::Approx(1.0 / (4 * std::numbers::pi * t)).epsilon(0.1));
  }
}

TEST_CASE("elliptic Harnack constant") {
  const auto g = grid_of("big_square", 1.0 / 64);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  HarnackOptions opt;
  opt.trials = 10;
  const HarnackEstimate e = harnack_constants(f, g->nearest_node({0, 0}), 0.25, opt);
  CHECK(e.ratios.size() == 10);
  for (double r : e.ratios) CHECK(r >= 1.0);
  CHECK(e.constant <= 9.45);
  const HarnackEstimate again = harnack_constants(f, g->nearest_node({0, 0}), 0.25, opt);
  CHECK(again.ratios == e.ratios);
}

TEST_CASE("field CSV") {
  const auto g = grid_of("square", 0.25);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const ScalarField u = dirichlet_solve(f, NodeSet::all(*g), data_from(*g, [](Vec2) { return 1.0; }));
  const std::string csv = field_csv(*g, u);
  CHECK(csv.rfind("node_id,x,y,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}
