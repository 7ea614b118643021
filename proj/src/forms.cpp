#include "bhplab/forms.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "bhplab/error.hpp"
#include "bhplab/sparse.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

// ---------------------------------------------------------------------------
// CoefficientField

CoefficientField CoefficientField::laplacian() { return {}; }

CoefficientField CoefficientField::drift(double beta) {
  CoefficientField f;
  f.name = "drift";
  f.b1 = Expression::constant(beta);
  return f;
}

CoefficientField CoefficientField::skew(double amplitude) {
  CoefficientField f;
  f.name = "skew";
  const Expression::Constants k{{"s", amplitude}};
  f.a12 = Expression::parse("s * sin(pi * x) * sin(pi * y)", k);
  f.a21 = Expression::parse("-s * sin(pi * x) * sin(pi * y)", k);
  return f;
}

CoefficientField CoefficientField::constant_skew(double s) {
  CoefficientField f;
  f.name = "constant_skew";
  f.a12 = Expression::constant(s);
  f.a21 = Expression::constant(-s);
  return f;
}

CoefficientField CoefficientField::killing(double c) {
  CoefficientField f;
  f.name = "killing";
  f.c = Expression::constant(c);
  return f;
}

std::vector<std::string> CoefficientField::presets() { return {"laplacian", "drift", "skew", "killing"}; }

CoefficientField CoefficientField::preset(const std::string& name) {
  if (name == "laplacian") return laplacian();
  if (name == "drift") return drift(0.5);
  if (name == "skew") return skew(0.5);
  if (name == "killing") return killing(1.0);
  throw Error(ErrorKind::ConfigError, "unknown coefficient preset '" + name + "'");
}

CoefficientField CoefficientField::parse(const std::string& text) {
  CoefficientField f;
  f.name = "custom";
  Expression::Constants constants;
  enum class Section { none, constants, fields } section = Section::none;
  std::size_t pos = 0;
  int line_no = 0;
  const std::string_view all(text);
  while (pos <= all.size()) {
    const std::size_t end = std::min(all.find('\n', pos), all.size());
    std::string_view line = all.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw Error(ErrorKind::ParseError, "coefficient line " + std::to_string(line_no) + ": " + what);
    };
    if (line == "[constants]") {
      section = Section::constants;
      continue;
    }
    if (line == "[fields]") {
      section = Section::fields;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section == Section::none) {
      if (key != "name") fail("unknown key '" + key + "'");
      f.name = std::string(value);
    } else if (section == Section::constants) {
      constants[key] = Expression::parse(value, constants)(0.0, 0.0);
    } else {
      Expression e = Expression::parse(value, constants);
      if (key == "a11") f.a11 = e;
      else if (key == "a12") f.a12 = e;
      else if (key == "a21") f.a21 = e;
      else if (key == "a22") f.a22 = e;
      else if (key == "b1") f.b1 = e;
      else if (key == "b2") f.b2 = e;
      else if (key == "d1") f.d1 = e;
      else if (key == "d2") f.d2 = e;
      else if (key == "c") f.c = e;
      else fail("unknown field '" + key + "'");
    }
  }
  return f;
}

CoefficientField CoefficientField::load(const std::string& spec) {
  constexpr std::string_view prefix = "preset:";
  if (spec.rfind(prefix, 0) == 0) return preset(spec.substr(prefix.size()));
  return parse(read_file(spec));
}

bool CoefficientField::has_first_order() const {
  return !(b1.is_zero() && b2.is_zero() && d1.is_zero() && d2.is_zero());
}

bool CoefficientField::has_skew_a() const {
  // a12 and a21 are compared textually only when both are constant.
  if (a12.is_constant() && a21.is_constant()) return a12(0, 0) != a21(0, 0);
  return true;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct Sym2 {
  double xx, xy, yy;
  double lambda_min() const { return 0.5 * (xx + yy) - std::hypot(0.5 * (xx - yy), xy); }
  double lambda_max() const { return 0.5 * (xx + yy) + std::hypot(0.5 * (xx - yy), xy); }
};

Sym2 sym_a(const CoefficientField& k, Vec2 p) {
  return {k.a11(p.x, p.y), 0.5 * (k.a12(p.x, p.y) + k.a21(p.x, p.y)), k.a22(p.x, p.y)};
}

double skew_a(const CoefficientField& k, Vec2 p) { return 0.5 * (k.a12(p.x, p.y) - k.a21(p.x, p.y)); }

double div_central(const Expression& fx, const Expression& fy, Vec2 p, double h) {
  return (fx(p.x + h, p.y) - fx(p.x - h, p.y)) / (2.0 * h) + (fy(p.x, p.y + h) - fy(p.x, p.y - h)) / (2.0 * h);
}

constexpr double kKillingTolerance = 1e-10;

}  // namespace

AssembledForm assemble(std::shared_ptr<const Grid> grid_ptr, const CoefficientField& k) {
  const Grid& grid = *grid_ptr;
  const int n = grid.size();
  const int nb = static_cast<int>(grid.boundary().size());
  const double h = grid.h();

  AssembledForm form;
  form.grid = grid_ptr;
  form.coefficients = k;
  form.mass = Vector::Constant(n, grid.node_area());
  form.kappa.resize(n);

  double eps = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const Vec2 p = grid.position(i);
    eps = std::min(eps, sym_a(k, p).lambda_min());
    const double c = k.c(p.x, p.y);
    const double div_b = div_central(k.b1, k.b2, p, h);
    const double div_d = div_central(k.d1, k.d2, p, h);
    form.kappa[i] = c - 0.5 * (div_b + div_d);
    if (form.kappa[i] < -kKillingTolerance || c - div_b < -kKillingTolerance || c - div_d < -kKillingTolerance) {
      throw Error(ErrorKind::NegativeKilling, "c - div b or c - div d is negative at (" + format_double(p.x) + ", " +
                                                  format_double(p.y) + ")");
    }
  }

  std::vector<Eigen::Triplet<double>> ts, tk, th, tb, tba, tsb;
  ts.reserve(grid.triangles().size() * 9);
  tk.reserve(grid.triangles().size() * 9);
  th.reserve(grid.triangles().size() * 9);
  for (const Triangle& t : grid.triangles()) {
    std::array<Vec2, 3> p;
    for (int v = 0; v < 3; ++v) {
      const int code = t.vertex[v];
      p[v] = code >= 0 ? grid.position(code) : grid.boundary()[decode_boundary(code)].position;
    }
    const double area2 = (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
    std::array<Vec2, 3> g;
    for (int v = 0; v < 3; ++v) {
      const Vec2 a = p[(v + 1) % 3], b = p[(v + 2) % 3];
      g[v] = {(a.y - b.y) / area2, (b.x - a.x) / area2};
    }
    const Vec2 m = t.centroid;
    const Sym2 as = sym_a(k, m);
    eps = std::min(eps, as.lambda_min());
    const double ak = skew_a(k, m);
    const Vec2 b{k.b1(m.x, m.y), k.b2(m.x, m.y)};
    const Vec2 d{k.d1(m.x, m.y), k.d2(m.x, m.y)};
    const double area = t.area;
    auto dot = [](Vec2 u, Vec2 v) { return u.x * v.x + u.y * v.y; };
    for (int r = 0; r < 3; ++r) {
      const int i = t.vertex[r];
      if (i < 0) continue;
      for (int s = 0; s < 3; ++s) {
        const int j = t.vertex[s];
        const Vec2 gi = g[r], gj = g[s];
        // grad(phi_j)^T a grad(phi_i)
        const double ks = area * (gj.x * (as.xx * gi.x + as.xy * gi.y) + gj.y * (as.xy * gi.x + as.yy * gi.y));
        const double ka = area * ak * (gj.x * gi.y - gj.y * gi.x);
        const double f_ij = area * (dot(b, gj) + dot(d, gi)) / 3.0;
        const double f_ji = area * (dot(b, gi) + dot(d, gj)) / 3.0;
        const double w = 0.5 * (f_ij - f_ji);
        if (j >= 0) {
          ts.emplace_back(i, j, ks);
          tk.emplace_back(i, j, ka + w);
          th.emplace_back(i, j, area * dot(gi, gj));
        } else {
          tb.emplace_back(i, decode_boundary(j), ks + ka + w);
          tba.emplace_back(i, decode_boundary(j), ks - ka - w);
          tsb.emplace_back(i, decode_boundary(j), ks);
        }
      }
    }
  }
  if (!(eps > 0.0)) {
    throw Error(ErrorKind::EllipticityViolation,
                "smallest eigenvalue of sym(a) is " + format_double(eps) + " for '" + k.name + "'");
  }
  form.ellipticity = eps;

  form.E_s.resize(n, n);
  form.E_s.setFromTriplets(ts.begin(), ts.end());
  form.E_skew.resize(n, n);
  form.E_skew.setFromTriplets(tk.begin(), tk.end());
  form.E_skew.prune(0.0);
  form.E_hat.resize(n, n);
  form.E_hat.setFromTriplets(th.begin(), th.end());
  form.E_boundary.resize(n, nb);
  form.E_boundary.setFromTriplets(tb.begin(), tb.end());
  form.E_boundary_adjoint.resize(n, nb);
  form.E_boundary_adjoint.setFromTriplets(tba.begin(), tba.end());
  form.E_s_boundary.resize(n, nb);
  form.E_s_boundary.setFromTriplets(tsb.begin(), tsb.end());

  SparseMatrix killing(n, n);
  {
    std::vector<Eigen::Triplet<double>> td;
    td.reserve(n);
    for (int i = 0; i < n; ++i) td.emplace_back(i, i, form.kappa[i] * form.mass[i]);
    killing.setFromTriplets(td.begin(), td.end());
  }
  form.E_sym = form.E_s + killing;
  form.E = form.E_sym + form.E_skew;
  form.E.makeCompressed();
  form.E_sym.makeCompressed();
  return form;
}

// ---------------------------------------------------------------------------
// Constants

AssumptionConstants estimate_constants(const AssembledForm& form, const ConstantOptions& opt) {
  if (opt.probes < 1) throw Error(ErrorKind::ConfigError, "estimate_constants needs at least one probe");
  const Grid& grid = *form.grid;
  const CoefficientField& k = form.coefficients;

  std::vector<Vec2> samples;
  samples.reserve(grid.triangles().size() + grid.size());
  for (const Triangle& t : grid.triangles()) samples.push_back(t.centroid);
  for (int i = 0; i < grid.size(); ++i) samples.push_back(grid.position(i));

  double C1 = 1.0, sup_bd = 0.0, sup_c = 0.0, sup_skew = 0.0, sup_beta = 0.0;
  for (const Vec2& p : samples) {
    const Sym2 as = sym_a(k, p);
    C1 = std::max({C1, as.lambda_max(), 1.0 / as.lambda_min()});
    const double b1 = k.b1(p.x, p.y), b2 = k.b2(p.x, p.y), d1 = k.d1(p.x, p.y), d2 = k.d2(p.x, p.y);
    sup_bd = std::max(sup_bd, std::hypot(b1 + d1, b2 + d2));
    sup_beta = std::max(sup_beta, 0.5 * std::hypot(b1 - d1, b2 - d2));
    sup_c = std::max(sup_c, std::abs(k.c(p.x, p.y)));
    sup_skew = std::max(sup_skew, std::abs(skew_a(k, p)));
  }
  const double sup_kappa = form.kappa.size() ? std::max(0.0, form.kappa.maxCoeff()) : 0.0;

  AssumptionConstants out;
  out.C1 = C1;
  if (sup_bd == 0.0) {
    out.C2 = 0.0;
    out.C3 = 0.25 * sup_kappa * sup_kappa;
  } else {
    out.C2 = 0.5 * sup_bd * sup_bd;
    out.C3 = 0.5 * sup_c * sup_c;
  }
  const double A2 = sup_skew * sup_skew, B2 = sup_beta * sup_beta;
  if (A2 > 0.0 && B2 > 0.0) {
    out.C4 = 2.0 * A2;
    out.C5 = 2.0 * B2;
  } else {
    out.C4 = A2;
    out.C5 = B2;
  }
  out.C6 = A2;
  out.C7 = 2.0 * B2;
  out.C8 = out.C2 + out.C3 + out.C5 + out.C7;

  // Sector constant: largest singular value of B^{-1/2} E_skew B^{-1/2}, B = E_sym + M.
  if (form.E_skew.nonZeros() == 0 || form.E_skew.norm() == 0.0) return out;
  SparseMatrix B = form.E_sym;
  for (int i = 0; i < form.size(); ++i) B.coeffRef(i, i) += form.mass[i];
  Eigen::SimplicialLDLT<SparseMatrix> chol(B);
  if (chol.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "E_sym + mass is not positive definite");

  std::vector<double> estimates;
  for (int probe = 0; probe < opt.probes; ++probe) {
    std::mt19937_64 rng(opt.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(probe + 1));
    std::normal_distribution<double> normal;
    Vector v(form.size());
    for (int i = 0; i < v.size(); ++i) v[i] = normal(rng);
    v /= std::sqrt(v.dot(B * v));
    double sigma2 = 0.0;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
      const Vector w = chol.solve(form.E_skew * v);
      const Vector w2 = chol.solve(form.E_skew * w);
      // -T^2 is self-adjoint and nonnegative in the B inner product.
      const double next = -v.dot(B * w2);
      const double norm_b = std::sqrt(std::max(0.0, w2.dot(B * w2)));
      if (norm_b == 0.0) {
        sigma2 = 0.0;
        converged = true;
        break;
      }
      v = w2 / norm_b;
      if (it > 0 && std::abs(next - sigma2) <= opt.tolerance * std::abs(next)) {
        sigma2 = next;
        converged = true;
        break;
      }
      sigma2 = next;
    }
    if (!converged) {
      throw Error(ErrorKind::NonConvergence,
                  "sector-constant power iteration did not converge in " + std::to_string(opt.max_iterations) +
                      " iterations");
    }
    estimates.push_back(std::sqrt(std::max(0.0, sigma2)));
  }
  const auto [lo, hi] = std::minmax_element(estimates.begin(), estimates.end());
  out.C0 = *hi;
  out.C0_spread = *hi - *lo;
  return out;
}

double lowest_eigenvalue(const AssembledForm& form, const NodeSet& nodes) {
  if (nodes.empty()) throw Error(ErrorKind::SingularSystem, "lowest_eigenvalue on an empty node set");
  const SparseMatrix A = principal_submatrix(form.E_sym, nodes.members);
  Vector m(nodes.size());
  for (int i = 0; i < nodes.size(); ++i) m[i] = form.mass[nodes.members[i]];
  Eigen::SimplicialLDLT<SparseMatrix> chol(A);
  if (chol.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "E_sym restriction is not positive definite");
  Vector v = Vector::Ones(nodes.size());
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vector w = chol.solve(m.cwiseProduct(v));
    const double mw = w.dot(m.cwiseProduct(w));
    const double next = w.dot(A * w) / mw;
    w /= std::sqrt(mw);
    v = w;
    if (it > 0 && std::abs(next - lambda) <= 1e-8 * std::abs(next)) return next;
    lambda = next;
  }
  throw Error(ErrorKind::NonConvergence, "inverse iteration for the lowest eigenvalue did not converge");
}

double capacity_sandwich_constant(const AssumptionConstants& k, double alpha) {
  const double killing = std::max(k.C2, k.C3 / alpha);
  return (1.0 + k.C0 * k.C1 / alpha) * (1.0 + 2.0 * std::sqrt(killing / alpha));
}

double a_R(const AssumptionConstants& k, double alpha) {
  const double sector = 1.0 + k.C0 * k.C1 / alpha;
  const double killing = 1.0 + 2.0 * std::sqrt(std::max(k.C2, k.C3 / alpha) / alpha);
  return std::pow(sector, 4) * killing * killing;
}

}  // namespace bhplab
