#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"
#include "bhplab/forms.hpp"

using namespace bhplab;

namespace {

std::shared_ptr<const Grid> grid_of(const std::string& preset, double h) {
  return std::make_shared<const Grid>(build_grid(preset_domain(preset), h));
}

double entry(const SparseMatrix& m, int i, int j) { return m.coeff(i, j); }

double max_abs(const SparseMatrix& m) {
  double v = 0.0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) v = std::max(v, std::abs(it.value()));
  }
  return v;
}

Vector random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

}  // namespace

TEST_CASE("Laplacian assembles to the five-point stencil") {
  const double h = 1.0 / 8;
  const auto g = grid_of("square", h);
  const AssembledForm f = assemble(g, CoefficientField::laplacian());
  const int c = g->nearest_node({0.5, 0.5});
  CHECK(entry(f.E, c, c) == doctest::Approx(4.0));
  for (Vec2 d : {Vec2{h, 0}, Vec2{-h, 0}, Vec2{0, h}, Vec2{0, -h}}) {
    const int n = g->nearest_node({0.5 + d.x, 0.5 + d.y});
    CHECK(entry(f.E, c, n) == doctest::Approx(-1.0));
  }
  double row = 0.0;
  for (SparseMatrix::InnerIterator it(f.E, c); it; ++it) row += it.value();
  CHECK(row == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(f.mass[c] == doctest::Approx(h * h));
  CHECK(max_abs(f.E_skew) == 0.0);
  CHECK(f.kappa.cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.ellipticity == doctest::Approx(1.0));
}

TEST_CASE("decomposition E = E_sym + E_skew") {
  const auto g = grid_of("slit_square", 1.0 / 16);
  for (const std::string& name : CoefficientField::presets()) {
    const AssembledForm f = assemble(g, CoefficientField::preset(name));
    const SparseMatrix sym_t = f.E_sym.transpose();
    const SparseMatrix skew_t = f.E_skew.transpose();
    CHECK(max_abs(f.E - f.E_sym - f.E_skew) <= 1e-12 * max_abs(f.E));
    CHECK(max_abs(f.E_sym - sym_t) <= 1e-12 * max_abs(f.E));
    CHECK(max_abs(f.E_skew + skew_t) <= 1e-12 * max_abs(f.E));
    // E_skew(u, u) = 0 for every u.
    const Vector u = random_vector(f.size(), 4);
    CHECK(std::abs(u.dot(f.E_skew * u)) <= 1e-10 * u.dot(f.E_sym * u));
  }
}

TEST_CASE("constant skew has no effect on the symmetric part") {
  const auto g = grid_of("square", 1.0 / 16);
  const AssembledForm lap = assemble(g, CoefficientField::laplacian());
  const AssembledForm sk = assemble(g, CoefficientField::constant_skew(0.5));
  CHECK(max_abs(sk.E_sym - lap.E_sym) <= 1e-12);
  CHECK(max_abs(sk.E_s - lap.E_s) <= 1e-12);
}

TEST_CASE("divergence-free drift has zero killing weight") {
  const auto g = grid_of("square", 1.0 / 16);
  const AssembledForm f = assemble(g, CoefficientField::drift(0.5));
  CHECK(f.kappa.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(max_abs(f.E_skew) > 0.0);
}

TEST_CASE("form is linear") {
  const auto g = grid_of("comb_3", 1.0 / 16);
  const AssembledForm f = assemble(g, CoefficientField::preset("skew"));
  const Vector u = random_vector(f.size(), 1), v = random_vector(f.size(), 2), w = random_vector(f.size(), 3);
  const double lhs = w.dot(f.E * (2.5 * u - 0.75 * v));
  const double rhs = 2.5 * w.dot(f.E * u) - 0.75 * w.dot(f.E * v);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("invalid coefficients are rejected") {
  const auto g = grid_of("square", 1.0 / 8);
  CoefficientField bad = CoefficientField::laplacian();
  bad.a11 = Expression::constant(-1.0);
  CHECK_THROWS_AS(assemble(g, bad), Error);
  try {
    assemble(g, bad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EllipticityViolation);
  }
  try {
    assemble(g, CoefficientField::killing(-1.0));
    FAIL("negative killing accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NegativeKilling);
  }
}

TEST_CASE("coefficient files") {
  const CoefficientField f = CoefficientField::parse(
      "# drift field\n[constants]\nbeta = 0.5\n[fields]\nb1 = beta * y\nc = 1 + x * x\n");
  CHECK(f.has_first_order());
  CHECK(!f.has_skew_a());
  CHECK(f.b1(0.0, 2.0) == doctest::Approx(1.0));
  CHECK(f.c(2.0, 0.0) == doctest::Approx(5.0));
  CHECK(f.a11(0.3, 0.3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(CoefficientField::parse("[fields]\nq1 = 1\n"), Error);
  CHECK_THROWS_AS(CoefficientField::parse("[fields]\nb1 = 1 +\n"), Error);
  CHECK_THROWS_AS(CoefficientField::preset("nonsense"), Error);
}

TEST_CASE("assumption constants") {
  const auto g = grid_of("square", 1.0 / 16);
  SUBCASE("Laplacian: all zero") {
    const AssumptionConstants k = estimate_constants(assemble(g, CoefficientField::laplacian()));
    CHECK(k.C0 == doctest::Approx(0.0));
    CHECK(k.C1 == doctest::Approx(1.0));
    for (double c : {k.C2, k.C3, k.C4, k.C5, k.C6, k.C7, k.C8}) CHECK(c == 0.0);
    CHECK(a_R(k, 1.0) == doctest::Approx(1.0));
    CHECK(capacity_sandwich_constant(k, 1.0) == doctest::Approx(1.0));
  }
  SUBCASE("skew amplitude increases C0") {
    const double small = estimate_constants(assemble(g, CoefficientField::skew(0.25))).C0;
    const double large = estimate_constants(assemble(g, CoefficientField::skew(0.5))).C0;
    CHECK(small > 0.0);
    CHECK(large > small);
    CHECK(large <= 1.0);
  }
  SUBCASE("drift: C4 vanishes, C5 quadratic in beta") {
    const AssumptionConstants k1 = estimate_constants(assemble(g, CoefficientField::drift(0.5)));
    const AssumptionConstants k2 = estimate_constants(assemble(g, CoefficientField::drift(1.0)));
    CHECK(k1.C4 == 0.0);
    CHECK(k1.C2 == doctest::Approx(0.5 * 0.5 * 0.5));
    CHECK(k1.C5 > 0.0);
    CHECK(k2.C5 == doctest::Approx(4.0 * k1.C5).epsilon(1e-9));
    CHECK(k1.C8 == doctest::Approx(k1.C2 + k1.C3 + k1.C5 + k1.C7));
  }
  SUBCASE("C0 does not depend on h") {
    const auto fine = grid_of("square", 1.0 / 32);
    const double coarse_c0 = estimate_constants(assemble(g, CoefficientField::drift(1.0))).C0;
    const double fine_c0 = estimate_constants(assemble(fine, CoefficientField::drift(1.0))).C0;
    CHECK(fine_c0 == doctest::Approx(coarse_c0).epsilon(0.1));
  }
}

TEST_CASE("a_R formula") {
  AssumptionConstants k;
  k.C0 = 0.5;
  k.C1 = 2.0;
  k.C2 = 0.25;
  k.C3 = 1.0;
  // alpha = 1: (1 + 1)^4 (1 + 2 sqrt(1))^2 = 16 * 9.
  CHECK(a_R(k, 1.0) == doctest::Approx(144.0));
  // alpha = 4: (1 + 0.25)^4 (1 + 2 sqrt(0.25 / 4))^2 = 2.44140625 * 2.25.
  CHECK(a_R(k, 4.0) == doctest::Approx(2.44140625 * 2.25));
  CHECK(capacity_sandwich_constant(k, 1.0) == doctest::Approx(6.0));
  CHECK(a_R(k, 8.0) <= a_R(k, 4.0));
}

TEST_CASE("lowest Dirichlet eigenvalue") {
  SUBCASE("unit square") {
    const auto g = grid_of("square", 1.0 / 64);
    const AssembledForm f = assemble(g, CoefficientField::laplacian());
    const double lambda = lowest_eigenvalue(f, NodeSet::all(*g));
    CHECK(lambda == doctest::Approx(2.0 * std::numbers::pi * std::numbers::pi).epsilon(0.01));
    // Restricting to a subset can only raise the eigenvalue.
    const NodeSet half = metric_ball(*g, {0.5, 0.5}, 0.3);
    CHECK(lowest_eigenvalue(f, half) > lambda);
  }
  SUBCASE("unit disk") {
    const auto g = grid_of("big_square", 1.0 / 64);
    const AssembledForm f = assemble(g, CoefficientField::laplacian());
    const double lambda = lowest_eigenvalue(f, metric_ball(*g, {0, 0}, 1.0));
    CHECK(lambda == doctest::Approx(5.7832).epsilon(0.05));
    // Half the radius, four times the eigenvalue.
    const double small = lowest_eigenvalue(f, metric_ball(*g, {0, 0}, 0.5));
    CHECK(small / lambda == doctest::Approx(4.0).epsilon(0.05));
  }
  SUBCASE("empty set") {
    const auto g = grid_of("square", 1.0 / 8);
    CHECK_THROWS_AS(lowest_eigenvalue(assemble(g, CoefficientField::laplacian()), NodeSet{}), Error);
  }
}
