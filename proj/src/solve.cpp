#include "bhplab/solve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "bhplab/error.hpp"
#include "bhplab/sparse.hpp"
#include "bhplab/text.hpp"

namespace bhplab {

namespace {

constexpr double kResidualTolerance = 1e-10;

bool is_symmetric_operator(const AssembledForm& form, FormPart part) {
  return part != FormPart::full || form.E_skew.nonZeros() == 0;
}

// Either factorization behind one interface.
class Factorization {
 public:
  void compute(const SparseMatrix& K, bool symmetric) {
    symmetric_ = symmetric;
    if (symmetric) {
      ldlt_.compute(K);
      ok_ = ldlt_.info() == Eigen::Success;
    } else {
      lu_.analyzePattern(K);
      lu_.factorize(K);
      ok_ = lu_.info() == Eigen::Success;
    }
  }
  bool ok() const { return ok_; }
  Vector solve(const Vector& b) const { return symmetric_ ? Vector(ldlt_.solve(b)) : Vector(lu_.solve(b)); }

 private:
  bool symmetric_ = true;
  bool ok_ = false;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  // SparseLU::solve is logically const but not declared so.
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

Vector solve_refined(const Factorization& f, const SparseMatrix& K, const Vector& rhs) {
  const double scale = rhs.norm();
  if (scale == 0.0) return Vector::Zero(rhs.size());
  Vector x = f.solve(rhs);
  for (int pass = 0; pass < 5; ++pass) {
    const Vector r = rhs - K * x;
    if (r.norm() <= kResidualTolerance * scale) return x;
    x += f.solve(r);
  }
  const double res = (rhs - K * x).norm() / scale;
  if (res <= kResidualTolerance) return x;
  throw Error(ErrorKind::NonConvergence, "linear solve residual " + format_double(res) + " exceeds 1e-10");
}

const SparseMatrix& node_matrix(const AssembledForm& form, FormPart part) {
  switch (part) {
    case FormPart::full: return form.E;
    case FormPart::symmetric: return form.E_sym;
    case FormPart::strictly_local: return form.E_s;
  }
  return form.E;
}

const SparseMatrix& wall_matrix(const AssembledForm& form, const SolverOptions& o) {
  if (o.part != FormPart::full) return form.E_s_boundary;
  return o.adjoint ? form.E_boundary_adjoint : form.E_boundary;
}

}  // namespace

// ---------------------------------------------------------------------------

BoundaryPortion boundary_layer(const AssembledForm& form, const NodeSet& U) {
  const int n = form.size();
  const std::vector<char> in = U.mask(n);
  std::vector<char> layer(n, 0);
  for (int j : U.members) {
    for (SparseMatrix::InnerIterator it(form.E_s, j); it; ++it) {
      if (!in[it.row()]) layer[it.row()] = 1;
    }
  }
  BoundaryPortion out;
  for (int i = 0; i < n; ++i) {
    if (layer[i]) out.nodes.push_back(i);
  }
  for (int b = 0; b < form.E_s_boundary.outerSize(); ++b) {
    for (SparseMatrix::InnerIterator it(form.E_s_boundary, b); it; ++it) {
      if (in[it.row()]) {
        out.walls.push_back(b);
        break;
      }
    }
  }
  return out;
}

DirichletData DirichletData::zero(const Grid& grid) {
  return {Vector::Zero(grid.size()), Vector::Zero(static_cast<Eigen::Index>(grid.boundary().size()))};
}

DirichletData DirichletData::indicator(const Grid& grid, const BoundaryPortion& portion) {
  DirichletData g = zero(grid);
  for (int i : portion.nodes) g.nodes[i] = 1.0;
  for (int b : portion.walls) g.walls[b] = 1.0;
  return g;
}

// ---------------------------------------------------------------------------

struct DirichletSolver::Factor {
  Factorization f;
};

DirichletSolver::DirichletSolver(const AssembledForm& form, NodeSet U, SolverOptions options)
    : form_(&form), U_(std::move(U)), options_(options) {
  const Grid& grid = *form.grid;
  if (U_.empty()) throw Error(ErrorKind::SingularSystem, "Dirichlet problem on an empty node set");
  if (options_.require_connected && !is_connected(grid, U_)) throw Error(ErrorKind::SingularSystem, "Dirichlet problem on a disconnected node set");
  local_.assign(grid.size(), -1);
  for (int k = 0; k < U_.size(); ++k) local_[U_.members[k]] = k;

  const SparseMatrix& full = node_matrix(form, options_.part);
  K_ = principal_submatrix(full, U_.members);
  if (options_.adjoint && options_.part == FormPart::full) K_ = SparseMatrix(K_.transpose());
  if (options_.alpha != 0.0) {
    for (int k = 0; k < U_.size(); ++k) K_.coeffRef(k, k) += options_.alpha * form.mass[U_.members[k]];
  }
  K_.makeCompressed();
  factor_ = std::make_unique<Factor>();
  factor_->f.compute(K_, is_symmetric_operator(form, options_.part));
  if (!factor_->f.ok()) throw Error(ErrorKind::SingularSystem, "factorization of the restricted operator failed");
}

DirichletSolver::~DirichletSolver() = default;
DirichletSolver::DirichletSolver(DirichletSolver&&) noexcept = default;
DirichletSolver& DirichletSolver::operator=(DirichletSolver&&) noexcept = default;

Vector DirichletSolver::solve_reduced(const Vector& rhs) const { return solve_refined(factor_->f, K_, rhs); }

ScalarField DirichletSolver::solve(const DirichletData& g, const Vector* f) const {
  const AssembledForm& form = *form_;
  const int n = form.size();
  Vector outside = g.nodes;
  for (int i : U_.members) outside[i] = 0.0;

  Vector coupling = Vector::Zero(n);
  if (outside.any()) {
    const SparseMatrix& full = node_matrix(form, options_.part);
    if (options_.adjoint && options_.part == FormPart::full) {
      coupling = full.transpose() * outside;
    } else {
      coupling = full * outside;
    }
  }
  if (g.walls.size() > 0 && g.walls.any()) coupling += wall_matrix(form, options_) * g.walls;

  Vector rhs(U_.size());
  for (int k = 0; k < U_.size(); ++k) {
    const int i = U_.members[k];
    rhs[k] = -coupling[i] + (f ? (*f)[i] * form.mass[i] : 0.0);
  }
  const Vector x = solve_reduced(rhs);
  ScalarField out{U_, outside};
  for (int k = 0; k < U_.size(); ++k) out.values[U_.members[k]] = x[k];
  return out;
}

ScalarField dirichlet_solve(const AssembledForm& form, const NodeSet& U, const DirichletData& g, const Vector* f) {
  return DirichletSolver(form, U).solve(g, f);
}

// ---------------------------------------------------------------------------

GreenSlice green(const DirichletSolver& solver, int y) {
  const int ly = solver.local(y);
  if (ly < 0) throw Error(ErrorKind::SingularSystem, "Green pole outside the node set");
  Vector rhs = Vector::Zero(solver.domain().size());
  rhs[ly] = 1.0;
  const Vector x = solver.solve_reduced(rhs);
  GreenSlice slice;
  slice.pole = y;
  slice.adjoint = solver.options().adjoint;
  slice.field.support = solver.domain();
  slice.field.values = Vector::Zero(solver.form().size());
  for (int k = 0; k < x.size(); ++k) slice.field.values[solver.domain().members[k]] = x[k];
  return slice;
}

GreenSlice green(const AssembledForm& form, const NodeSet& U, int y, bool adjoint) {
  SolverOptions o;
  o.adjoint = adjoint;
  return green(DirichletSolver(form, U, o), y);
}

// ---------------------------------------------------------------------------

struct HeatPropagator::Factor {
  Factorization f;
  SparseMatrix plus;
};

HeatPropagator::HeatPropagator(const AssembledForm& form, NodeSet U, double dt, bool adjoint)
    : form_(&form), U_(std::move(U)), dt_(dt) {
  if (U_.empty()) throw Error(ErrorKind::SingularSystem, "heat flow on an empty node set");
  if (!(dt > 0.0)) throw Error(ErrorKind::ConfigError, "time step must be positive");
  SparseMatrix K = principal_submatrix(form.E, U_.members);
  if (adjoint) K = SparseMatrix(K.transpose());
  mass_.resize(U_.size());
  for (int k = 0; k < U_.size(); ++k) mass_[k] = form.mass[U_.members[k]];
  SparseMatrix M(U_.size(), U_.size());
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < U_.size(); ++k) t.emplace_back(k, k, mass_[k]);
    M.setFromTriplets(t.begin(), t.end());
  }
  factor_ = std::make_unique<Factor>();
  factor_->plus = M + (0.5 * dt) * K;
  factor_->plus.makeCompressed();
  minus_ = M - (0.5 * dt) * K;
  factor_->f.compute(factor_->plus, form.E_skew.nonZeros() == 0);
  if (!factor_->f.ok()) throw Error(ErrorKind::SingularSystem, "Crank-Nicolson factorization failed");
}

HeatPropagator::~HeatPropagator() = default;
HeatPropagator::HeatPropagator(HeatPropagator&&) noexcept = default;

Vector HeatPropagator::step(const Vector& u) const {
  return solve_refined(factor_->f, factor_->plus, minus_ * u);
}

double HeatPropagator::mass(const Vector& u) const { return u.dot(mass_); }

Vector HeatPropagator::to_local(const Vector& global) const {
  Vector out(U_.size());
  for (int k = 0; k < U_.size(); ++k) out[k] = global[U_.members[k]];
  return out;
}

Vector HeatPropagator::to_global(const Vector& local) const {
  Vector out = Vector::Zero(form_->size());
  for (int k = 0; k < U_.size(); ++k) out[U_.members[k]] = local[k];
  return out;
}

HeatSlice heat(const AssembledForm& form, const NodeSet& U, int x, double t, int steps, bool adjoint) {
  if (!(t > 0.0)) throw Error(ErrorKind::ConfigError, "heat needs t > 0");
  if (steps < 16) throw Error(ErrorKind::ConfigError, "heat needs at least 16 steps");
  if (!U.contains(x)) throw Error(ErrorKind::SingularSystem, "heat source outside the node set");
  // y -> p(t, x, y) solves the adjoint equation.
  const HeatPropagator prop(form, U, t / steps, !adjoint);
  Vector point = Vector::Zero(form.size());
  point[x] = 1.0 / form.mass[x];
  Vector u = prop.to_local(point);

  HeatSlice out;
  out.t = t;
  out.source = x;
  const int xl = static_cast<int>(std::lower_bound(U.members.begin(), U.members.end(), x) - U.members.begin());
  out.mass.push_back(prop.mass(u));
  out.diagonal.push_back(u[xl]);
  for (int s = 0; s < steps; ++s) {
    u = prop.step(u);
    const double m = prop.mass(u);
    if (m > out.mass.back() * (1.0 + 1e-12) + 1e-15) {
      throw Error(ErrorKind::StepRejection, "Crank-Nicolson mass increased at step " + std::to_string(s + 1) +
                                                " (" + format_double(out.mass.back()) + " -> " + format_double(m) +
                                                ")");
    }
    out.mass.push_back(m);
    out.diagonal.push_back(u[xl]);
    const double lo = u.minCoeff();
    out.min_value = std::min(out.min_value, lo);
    if (lo < -1e-10 * u.maxCoeff()) ++out.positivity_violations;
  }
  out.field.support = U;
  out.field.values = prop.to_global(u);
  return out;
}

// ---------------------------------------------------------------------------

ScalarField harmonic_measure(const DirichletSolver& solver, const BoundaryPortion& S) {
  return solver.solve(DirichletData::indicator(*solver.form().grid, S));
}

ScalarField harmonic_measure(const AssembledForm& form, const NodeSet& U, const BoundaryPortion& S, bool adjoint) {
  SolverOptions o;
  o.adjoint = adjoint;
  return harmonic_measure(DirichletSolver(form, U, o), S);
}

// ---------------------------------------------------------------------------

namespace {

double wrapped(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

struct AngularBumps {
  std::vector<double> center, width, weight;

  double operator()(double theta) const {
    double v = 0.0;
    for (std::size_t k = 0; k < center.size(); ++k) {
      const double d = wrapped(theta - center[k]);
      v += weight[k] * std::exp(-0.5 * d * d / (width[k] * width[k]));
    }
    return v;
  }
};

AngularBumps random_angular(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi), width(0.15, 1.0),
      weight(0.1, 1.0);
  AngularBumps b;
  const int m = count(rng);
  for (int k = 0; k < m; ++k) {
    b.center.push_back(angle(rng));
    b.width.push_back(width(rng));
    b.weight.push_back(weight(rng));
  }
  return b;
}

std::mt19937_64 trial_rng(std::uint64_t seed, int trial) {
  return std::mt19937_64(seed * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(trial + 1));
}

NodeSet ball_component(const Grid& grid, int x, double r) {
  return connected_component(grid, metric_ball(grid, grid.position(x), r), x);
}

}  // namespace

HarnackEstimate harnack_constants(const AssembledForm& form, int x, double r, const HarnackOptions& opt) {
  const Grid& grid = *form.grid;
  if (opt.trials < 1) throw Error(ErrorKind::ConfigError, "harnack_constants needs at least one trial");
  const Vec2 cx = grid.position(x);
  const NodeSet U = ball_component(grid, x, 2.0 * r);
  HarnackEstimate est;
  est.constant = 1.0;

  if (opt.mode == HarnackMode::elliptic) {
    const NodeSet inner = connected_component(grid, metric_ball(grid, cx, r), x);
    const DirichletSolver solver(form, U);
    const BoundaryPortion layer = boundary_layer(form, U);
    for (int trial = 0; trial < opt.trials; ++trial) {
      std::mt19937_64 rng = trial_rng(opt.seed, trial);
      const AngularBumps data = random_angular(rng);
      DirichletData g = DirichletData::zero(grid);
      for (int i : layer.nodes) {
        const Vec2 d = grid.position(i) - cx;
        g.nodes[i] = data(std::atan2(d.y, d.x));
      }
      for (int b : layer.walls) {
        const Vec2 d = grid.boundary()[b].position - cx;
        g.walls[b] = data(std::atan2(d.y, d.x));
      }
      const ScalarField u = solver.solve(g);
      double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
      for (int i : inner.members) {
        hi = std::max(hi, u[i]);
        lo = std::min(lo, u[i]);
      }
      const double ratio = hi / lo;
      est.ratios.push_back(ratio);
      est.constant = std::max(est.constant, ratio);
    }
    return est;
  }

  // Parabolic: start at time s - tau r^2 = 0, so s = tau r^2.
  const double T = opt.tau * r * r;
  const int steps = std::max(16, opt.steps);
  const HeatPropagator prop(form, U, T / steps, false);
  const NodeSet small = connected_component(grid, metric_ball(grid, cx, opt.delta * r), x);
  const double minus_lo = T - (3.0 + opt.delta) * T / 4.0, minus_hi = T - (3.0 - opt.delta) * T / 4.0;
  const double plus_lo = T - (1.0 + opt.delta) * T / 4.0;
  std::vector<int> small_local;
  {
    std::vector<int> local(form.size(), -1);
    for (int k = 0; k < U.size(); ++k) local[U.members[k]] = k;
    for (int i : small.members) small_local.push_back(local[i]);
  }
  for (int trial = 0; trial < opt.trials; ++trial) {
    std::mt19937_64 rng = trial_rng(opt.seed, trial);
    std::uniform_int_distribution<int> count(1, 4);
    std::uniform_real_distribution<double> rad(0.0, 1.8), angle(-std::numbers::pi, std::numbers::pi),
        width(0.2, 0.8), weight(0.1, 1.0);
    const int m = count(rng);
    std::vector<Vec2> centers;
    std::vector<double> widths, weights;
    for (int k = 0; k < m; ++k) {
      const double rr = rad(rng), th = angle(rng);
      centers.push_back(cx + (r * rr) * Vec2{std::cos(th), std::sin(th)});
      widths.push_back(r * width(rng));
      weights.push_back(weight(rng));
    }
    Vector u(U.size());
    for (int k = 0; k < U.size(); ++k) {
      const Vec2 p = grid.position(U.members[k]);
      double v = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = distance(p, centers[j]);
        v += weights[j] * std::exp(-0.5 * d * d / (widths[j] * widths[j]));
      }
      u[k] = v;
    }
    double sup_minus = -std::numeric_limits<double>::infinity();
    double inf_plus = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= steps; ++s) {
      u = prop.step(u);
      const double t = s * prop.dt();
      const bool in_minus = t > minus_lo && t < minus_hi;
      const bool in_plus = t > plus_lo && t <= T * (1.0 + 1e-12);
      if (!in_minus && !in_plus) continue;
      for (int k : small_local) {
        if (in_minus) sup_minus = std::max(sup_minus, u[k]);
        if (in_plus) inf_plus = std::min(inf_plus, u[k]);
      }
    }
    const double ratio = sup_minus / inf_plus;
    est.ratios.push_back(ratio);
    est.constant = std::max(est.constant, ratio);
  }
  return est;
}

std::string field_csv(const Grid& grid, const ScalarField& field) {
  std::string out = "node_id,x,y,value\n";
  for (int i = 0; i < grid.size(); ++i) {
    const Vec2 p = grid.position(i);
    out += std::to_string(i) + "," + format_double(p.x) + "," + format_double(p.y) + "," +
           format_double(field.values[i]) + "\n";
  }
  return out;
}

}  // namespace bhplab
