#include "bhplab/potential.hpp"

#include <algorithm>
#include <cmath>

#include "bhplab/error.hpp"
#include "bhplab/sparse.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

namespace {

NodeSet intersect(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                        std::back_inserter(out.members));
  return out;
}

NodeSet difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
                      std::back_inserter(out.members));
  return out;
}

// K + alpha M on U (transposed when adjoint), U-local ordering.
SparseMatrix restricted_operator(const AssembledForm& form, const NodeSet& U, double alpha, bool adjoint,
                                 FormPart part) {
  const SparseMatrix& full = part == FormPart::full ? form.E : (part == FormPart::symmetric ? form.E_sym : form.E_s);
  SparseMatrix K = principal_submatrix(full, U.members);
  if (adjoint && part == FormPart::full) K = SparseMatrix(K.transpose());
  if (alpha != 0.0) {
    for (int k = 0; k < U.size(); ++k) K.coeffRef(k, k) += alpha * form.mass[U.members[k]];
  }
  K.makeCompressed();
  return K;
}

Vector local_values(const ScalarField& f, const NodeSet& U) {
  Vector v(U.size());
  for (int k = 0; k < U.size(); ++k) v[k] = f.values[U.members[k]];
  return v;
}

// Projected Gauss-Seidel for: e >= 1 on A, (Ke)_i >= 0 on A with
// complementarity, (Ke)_i = 0 on U \ A.
bool projected_gauss_seidel(const SparseMatrix& K, const std::vector<char>& in_A, Vector& e) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> R(K);
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < R.rows(); ++i) {
      double diag = 0.0, off = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, i); it; ++it) {
        if (it.col() == i) {
          diag = it.value();
        } else {
          off += it.value() * e[it.col()];
        }
      }
      double next = -off / diag;
      if (in_A[i]) next = std::max(1.0, next);
      change = std::max(change, std::abs(next - e[i]));
      e[i] = next;
    }
    if (change <= 1e-13) return true;
  }
  return false;
}

EquilibriumPotential equilibrium_impl(const AssembledForm& form, const NodeSet& A_in, const NodeSet& U, double alpha,
                                      bool adjoint, FormPart part) {
  if (U.empty()) throw Error(ErrorKind::SingularSystem, "equilibrium potential relative to an empty set");
  if (alpha < 0.0) throw Error(ErrorKind::ConfigError, "alpha must be nonnegative");
  const NodeSet A = intersect(A_in, U);
  const NodeSet rest = difference(U, A);
  EquilibriumPotential out;
  out.field.support = U;
  out.field.values = Vector::Zero(form.size());
  for (int i : A.members) out.field.values[i] = 1.0;
  if (A.empty()) return out;
  if (!rest.empty()) {
    SolverOptions o;
    o.adjoint = adjoint;
    o.alpha = alpha;
    o.part = part;
    o.require_connected = false;
    const DirichletSolver solver(form, rest, o);
    DirichletData g = DirichletData::zero(*form.grid);
    for (int i : A.members) g.nodes[i] = 1.0;
    const ScalarField s = solver.solve(g);
    for (int i : rest.members) out.field.values[i] = s.values[i];
  }
  out.max_value = out.field.values.maxCoeff();
  if (out.max_value > 1.0 + 1e-6) {
    out.obstacle_fallback = true;
    const SparseMatrix K = restricted_operator(form, U, alpha, adjoint, part);
    std::vector<char> in_A(U.size(), 0);
    const std::vector<char> maskA = A.mask(form.size());
    for (int k = 0; k < U.size(); ++k) in_A[k] = maskA[U.members[k]];
    Vector e = local_values(out.field, U);
    if (!projected_gauss_seidel(K, in_A, e)) {
      throw Error(ErrorKind::ObstacleActive, "obstacle fallback did not converge (reduced potential peaked at " +
                                                 format_double(out.max_value) + ")");
    }
    for (int k = 0; k < U.size(); ++k) out.field.values[U.members[k]] = e[k];
    out.max_value = e.maxCoeff();
  }
  return out;
}

}  // namespace

EquilibriumPotential equilibrium_potential(const AssembledForm& form, const NodeSet& A, const NodeSet& U, double alpha,
                                           bool adjoint) {
  return equilibrium_impl(form, A, U, alpha, adjoint, FormPart::full);
}

CapacityResult capacity(const AssembledForm& form, const NodeSet& A_in, const NodeSet& U, double alpha) {
  CapacityResult out;
  out.alpha = alpha;
  out.U_set = U;
  out.A_set = intersect(A_in, U);
  const EquilibriumPotential e = equilibrium_impl(form, out.A_set, U, alpha, false, FormPart::full);
  const EquilibriumPotential ea = equilibrium_impl(form, out.A_set, U, alpha, true, FormPart::full);
  const EquilibriumPotential es = equilibrium_impl(form, out.A_set, U, alpha, false, FormPart::strictly_local);
  out.potential = e.field;
  out.adjoint_potential = ea.field;
  out.obstacle_fallback = e.obstacle_fallback || ea.obstacle_fallback || es.obstacle_fallback;
  out.nu = Vector::Zero(out.A_set.size());
  if (out.A_set.empty()) return out;

  const SparseMatrix K = restricted_operator(form, U, alpha, false, FormPart::full);
  const SparseMatrix Ks = restricted_operator(form, U, alpha, false, FormPart::strictly_local);
  const Vector el = local_values(e.field, U), eal = local_values(ea.field, U), esl = local_values(es.field, U);
  const Vector Ke = K * el;
  // E_alpha(f, g) = g^T K f.
  out.value = el.dot(Ke);
  out.mixed_energy = eal.dot(Ke);
  out.adjoint_energy = eal.dot(K * eal);
  out.tilde_value = esl.dot(Ks * esl);
  std::vector<int> local(form.size(), -1);
  for (int k = 0; k < U.size(); ++k) local[U.members[k]] = k;
  for (int k = 0; k < out.A_set.size(); ++k) out.nu[k] = Ke[local[out.A_set.members[k]]];
  return out;
}

double capacity_value(const AssembledForm& form, const NodeSet& A_in, const NodeSet& U, double alpha) {
  const NodeSet A = intersect(A_in, U);
  if (A.empty()) return 0.0;
  const EquilibriumPotential e = equilibrium_impl(form, A, U, alpha, false, FormPart::full);
  const SparseMatrix K = restricted_operator(form, U, alpha, false, FormPart::full);
  const Vector el = local_values(e.field, U);
  return el.dot(K * el);
}

// ---------------------------------------------------------------------------

CapacityEstimateTable verify_capacity_estimate(const AssembledForm& form, int x, const std::vector<double>& radii,
                                               double R) {
  const Grid& grid = *form.grid;
  const Vec2 cx = grid.position(x);
  const double h = grid.h();
  const NodeSet U = connected_component(grid, metric_ball(grid, cx, R), x);

  std::vector<double> dist(grid.size());
  for (int i = 0; i < grid.size(); ++i) dist[i] = distance(cx, grid.position(i));
  std::sort(dist.begin(), dist.end());
  auto V = [&](double s) {
    return grid.node_area() * static_cast<double>(std::lower_bound(dist.begin(), dist.end(), s) - dist.begin());
  };

  CapacityEstimateTable table;
  table.R = R;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double r : radii) {
    if (!(r > 0.0 && r < R)) throw Error(ErrorKind::ConfigError, "capacity estimate radii must lie in (0, R)");
    CapacityEstimateRow row;
    row.r = r;
    const NodeSet A = connected_component(grid, closed_metric_ball(grid, cx, r), x);
    row.cap = capacity_value(form, A, U, 0.0);
    const int pieces = std::max(64, static_cast<int>(std::ceil(4.0 * (R - r) / h)));
    const double ds = (R - r) / pieces;
    double sum = 0.0;
    for (int k = 0; k <= pieces; ++k) {
      const double s = r + k * ds;
      const double w = (k == 0 || k == pieces) ? 0.5 : 1.0;
      sum += w * s / V(s);
    }
    row.integral = sum * ds;
    row.rho = row.cap * row.integral;
    lo = std::min(lo, row.rho);
    hi = std::max(hi, row.rho);
    table.rows.push_back(row);
  }
  table.spread = table.rows.empty() ? 1.0 : hi / lo;
  return table;
}

// ---------------------------------------------------------------------------

NodeSet AmbientContext::map(const NodeSet& domain_set) const {
  NodeSet out;
  out.kind = NodeSet::Kind::custom;
  for (int i : domain_set.members) out.members.push_back(from_domain[i]);
  std::sort(out.members.begin(), out.members.end());
  return out;
}

AmbientContext make_ambient(const AssembledForm& form, double margin) {
  const Grid& g = *form.grid;
  const double h = g.h();
  const Rect bb = g.domain().bounding_box();
  if (margin <= 0.0) margin = 0.5 * std::hypot(bb.x1 - bb.x0, bb.y1 - bb.y0);
  Domain d;
  d.name = g.domain().name + "_ambient";
  d.rectangles = {{std::floor((bb.x0 - margin) / h) * h, std::floor((bb.y0 - margin) / h) * h,
                   std::ceil((bb.x1 + margin) / h) * h, std::ceil((bb.y1 + margin) / h) * h}};
  AmbientContext ctx;
  ctx.margin = margin;
  ctx.grid = std::make_shared<const Grid>(build_grid(d, h, g.stencil()));
  ctx.form = assemble(ctx.grid, form.coefficients);
  ctx.from_domain.resize(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const auto [li, lj] = g.lattice(i);
    ctx.from_domain[i] = ctx.grid->node_at(li, lj);
  }
  return ctx;
}

WidthResult capacity_width(const AmbientContext& ambient, const NodeSet& U_domain, double eta,
                           const WidthOptions& options) {
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::ConfigError, "eta must lie in (0, 1)");
  if (U_domain.empty()) throw Error(ErrorKind::EmptySample, "capacity width of an empty set");
  const Grid& grid = *ambient.grid;
  const AssembledForm& form = ambient.form;
  const double h = grid.h();
  const NodeSet U = ambient.map(U_domain);

  std::vector<int> samples;
  const int n = U.size();
  const int count = std::min(n, std::max(1, options.max_samples));
  for (int k = 0; k < count; ++k) {
    samples.push_back(U.members[static_cast<std::size_t>((static_cast<long long>(k) * n) / count)]);
  }

  WidthResult out;
  out.eta = eta;
  out.samples = count;
  auto passes = [&](double r) {
    ++out.evaluations;
    for (int x : samples) {
      const Vec2 c = grid.position(x);
      const NodeSet ball = metric_ball(grid, c, 2.0 * r);
      const NodeSet A = closed_metric_ball(grid, c, r);
      const NodeSet outside = difference(A, U);
      if (outside.empty()) return false;
      const double den = capacity_value(form, A, ball, 0.0);
      const double num = capacity_value(form, outside, ball, 0.0);
      if (num < eta * den) return false;
    }
    return true;
  };

  const double r_max = options.r_max > 0.0 ? options.r_max : 0.5 * ambient.margin;
  double lo = 0.0, r = h;
  while (r <= r_max * (1.0 + 1e-12)) {
    if (passes(r)) {
      double hi = r;
      while (hi - lo > 2.0 * h) {
        const double mid = 0.5 * (lo + hi);
        if (passes(mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      out.width = hi;
      return out;
    }
    lo = r;
    r *= std::sqrt(2.0);
  }
  throw Error(ErrorKind::WidthOverflow,
              "no radius up to " + format_double(r_max) + " meets the capacity-width condition");
}

WidthResult capacity_width(const AssembledForm& form, const NodeSet& U, double eta, const WidthOptions& options) {
  return capacity_width(make_ambient(form), U, eta, options);
}

}  // namespace bhplab
