#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bhplab/forms.hpp"
#include "bhplab/geometry.hpp"

namespace bhplab {

/// Node-indexed values over the whole grid; `support` is the node set the
/// values were computed on (zero elsewhere unless stated).
struct ScalarField {
  NodeSet support;
  Vector values;

  double operator[](int node) const { return values[node]; }
};

/// Outer layer of a node set U: nodes outside U and wall vertices that share
/// a triangle with a node of U.
struct BoundaryPortion {
  std::vector<int> nodes;  // sorted
  std::vector<int> walls;  // boundary-vertex indices, sorted

  bool empty() const { return nodes.empty() && walls.empty(); }
};

BoundaryPortion boundary_layer(const AssembledForm& form, const NodeSet& U);

/// Dirichlet data: values on interior nodes outside U and on wall vertices.
struct DirichletData {
  Vector nodes;  // size grid.size(); entries inside U are ignored
  Vector walls;  // size boundary().size()

  static DirichletData zero(const Grid& grid);
  static DirichletData indicator(const Grid& grid, const BoundaryPortion& portion);
};

enum class FormPart { full, symmetric, strictly_local };

struct SolverOptions {
  bool adjoint = false;
  double alpha = 0.0;  // adds alpha * mass
  FormPart part = FormPart::full;
  /// Reject node sets that are not connected in the grid graph.
  bool require_connected = true;
};

/// Factorization of the operator restricted to U, reusable across right-hand
/// sides and safe to share between threads.
class DirichletSolver {
 public:
  /// Throws SingularSystem when U is empty, disconnected, or the restricted
  /// matrix cannot be factored.
  DirichletSolver(const AssembledForm& form, NodeSet U, SolverOptions options = {});
  ~DirichletSolver();
  DirichletSolver(DirichletSolver&&) noexcept;
  DirichletSolver& operator=(DirichletSolver&&) noexcept;

  const NodeSet& domain() const { return U_; }
  const SolverOptions& options() const { return options_; }
  const AssembledForm& form() const { return *form_; }
  /// Restricted operator K_UU (columns and rows in U order).
  const SparseMatrix& matrix() const { return K_; }

  /// K_UU x = rhs with a relative residual of at most 1e-10. Throws NonConvergence.
  Vector solve_reduced(const Vector& rhs) const;

  /// Solution with Dirichlet data g and source density f (per unit area; null for 0).
  ScalarField solve(const DirichletData& g, const Vector* f = nullptr) const;

  /// Local index of a grid node inside U, or -1.
  int local(int node) const { return local_[node]; }

 private:
  struct Factor;
  const AssembledForm* form_;
  NodeSet U_;
  SolverOptions options_;
  SparseMatrix K_;
  std::vector<int> local_;
  std::unique_ptr<Factor> factor_;
};

ScalarField dirichlet_solve(const AssembledForm& form, const NodeSet& U, const DirichletData& g,
                            const Vector* f = nullptr);

struct GreenSlice {
  int pole = -1;
  bool adjoint = false;
  ScalarField field;
};

/// G_U(., y) (or G*_U(., y) when adjoint) for a unit discrete mass at y.
GreenSlice green(const DirichletSolver& solver, int y);
GreenSlice green(const AssembledForm& form, const NodeSet& U, int y, bool adjoint = false);

/// Crank-Nicolson propagator (M + dt/2 K) u+ = (M - dt/2 K) u on U.
/// The default evolves solutions of du/dt = Lu (uses K); with adjoint it
/// evolves solutions for L* (uses K^T), which is how y -> p(t, x, y) moves.
class HeatPropagator {
 public:
  HeatPropagator(const AssembledForm& form, NodeSet U, double dt, bool adjoint = false);
  ~HeatPropagator();
  HeatPropagator(HeatPropagator&&) noexcept;

  double dt() const { return dt_; }
  const NodeSet& domain() const { return U_; }
  /// One step on U-local values.
  Vector step(const Vector& u) const;
  /// Total mass sum u * mass.
  double mass(const Vector& u) const;
  Vector to_local(const Vector& global) const;
  Vector to_global(const Vector& local) const;

 private:
  struct Factor;
  const AssembledForm* form_;
  NodeSet U_;
  double dt_;
  SparseMatrix minus_;  // M - dt/2 K
  Vector mass_;
  std::unique_ptr<Factor> factor_;
};

struct HeatSlice {
  double t = 0.0;
  int source = -1;
  ScalarField field;              // density per unit area
  std::vector<double> mass;       // after each step, starting with the initial mass
  std::vector<double> diagonal;   // p(t_k, x, x) after each step, starting at t = 0
  double min_value = 0.0;         // most negative value seen over all steps
  int positivity_violations = 0;  // steps with a value below -1e-10 * max
};

/// p_U(t, x, .) from the unit point mass at x. Throws StepRejection when the
/// mass increases between steps.
HeatSlice heat(const AssembledForm& form, const NodeSet& U, int x, double t, int steps, bool adjoint = false);

/// Solution with data 1 on S and 0 on the rest of the outer layer of U.
ScalarField harmonic_measure(const DirichletSolver& solver, const BoundaryPortion& S);
ScalarField harmonic_measure(const AssembledForm& form, const NodeSet& U, const BoundaryPortion& S,
                             bool adjoint = false);

enum class HarnackMode { elliptic, parabolic };

struct HarnackOptions {
  HarnackMode mode = HarnackMode::elliptic;
  int trials = 50;
  std::uint64_t seed = 1;
  double tau = 1.0;
  double delta = 0.5;
  int steps = 256;  // parabolic time steps over tau r^2
};

struct HarnackEstimate {
  double constant = 1.0;       // max over trials
  std::vector<double> ratios;  // per trial
};

/// Elliptic: random positive boundary data on the layer of B(x, 2r), ratio
/// sup/inf over B(x, r). Parabolic: random positive initial data in B(x, 2r)
/// evolved with Dirichlet conditions on B(x, 2r); ratio sup over Q- / inf over Q+.
/// The random data depend only on the angle (elliptic) or on positions
/// relative to x in units of r (parabolic), so runs at different scales see
/// the same data.
HarnackEstimate harnack_constants(const AssembledForm& form, int x, double r, const HarnackOptions& options);

/// CSV body rows "node_id,x,y,value" in node order, preceded by a header row.
std::string field_csv(const Grid& grid, const ScalarField& field);

}  // namespace bhplab
