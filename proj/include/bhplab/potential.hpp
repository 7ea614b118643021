#pragma once

#include <memory>
#include <vector>

#include "bhplab/forms.hpp"
#include "bhplab/solve.hpp"

namespace bhplab {

struct EquilibriumPotential {
  ScalarField field;
  /// Projected Gauss-Seidel fallback was used because the reduced solution
  /// exceeded 1 + 1e-6.
  bool obstacle_fallback = false;
  double max_value = 0.0;
};

/// e = 1 on A, (E + alpha mass)-harmonic on U \ A, 0 outside U (K^T when
/// adjoint). Throws SingularSystem for empty U, ObstacleActive when the
/// fallback obstacle solve does not converge.
EquilibriumPotential equilibrium_potential(const AssembledForm& form, const NodeSet& A, const NodeSet& U,
                                           double alpha, bool adjoint = false);

struct CapacityResult {
  double value = 0.0;        // e^T (K + alpha M) e
  double tilde_value = 0.0;  // same with E_s
  double alpha = 0.0;
  ScalarField potential;
  ScalarField adjoint_potential;
  Vector nu;  // (K + alpha M) e on the members of A, in order
  /// E_alpha(e, e^), E_alpha(e^, e^).
  double mixed_energy = 0.0;
  double adjoint_energy = 0.0;
  bool obstacle_fallback = false;
  NodeSet A_set, U_set;
};

/// Alpha-capacity of A relative to U. A is intersected with U; an empty A
/// gives 0.
CapacityResult capacity(const AssembledForm& form, const NodeSet& A, const NodeSet& U, double alpha);

/// Capacity of A relative to U without the potentials or the adjoint solve.
double capacity_value(const AssembledForm& form, const NodeSet& A, const NodeSet& U, double alpha = 0.0);

struct CapacityEstimateRow {
  double r = 0.0;
  double cap = 0.0;
  double integral = 0.0;  // int_r^R s / V(x, s) ds
  double rho = 0.0;       // cap * integral
};

struct CapacityEstimateTable {
  double R = 0.0;
  std::vector<CapacityEstimateRow> rows;
  double spread = 0.0;  // max rho / min rho
};

/// For each r: Cap_{B(x,R),0}(closed B(x,r)) times the trapezoid integral of
/// s / V(x,s) over [r, R], with V(x,s) = h^2 #{nodes with |y - x| < s}.
/// Balls are Euclidean balls restricted to the connected component of x.
CapacityEstimateTable verify_capacity_estimate(const AssembledForm& form, int x, const std::vector<double>& radii,
                                               double R);

/// The same operator on a slit-free rectangle around the domain, sharing its
/// lattice, so that sets of domain nodes can be compared against the whole
/// plane (the complement of the domain counts as outside).
struct AmbientContext {
  std::shared_ptr<const Grid> grid;
  AssembledForm form;
  std::vector<int> from_domain;  // domain node -> ambient node
  double margin = 0.0;

  NodeSet map(const NodeSet& domain_set) const;
};

/// margin <= 0 uses half the diameter of the domain's bounding box.
AmbientContext make_ambient(const AssembledForm& form, double margin = 0.0);

struct WidthOptions {
  int max_samples = 48;  // points of U tested per radius
  double r_max = 0.0;    // <= 0: the largest radius whose 2r-balls fit in the ambient margin
};

struct WidthResult {
  double eta = 0.0;
  double width = 0.0;
  int samples = 0;
  int evaluations = 0;  // radii tested
};

/// Smallest r with Cap_{B(x,2r)}(closed B(x,r) \ U) >= eta Cap_{B(x,2r)}(closed B(x,r))
/// for every sampled x in U, located by a geometric scan from h and
/// bisection to 2h. Throws WidthOverflow.
WidthResult capacity_width(const AmbientContext& ambient, const NodeSet& U, double eta,
                           const WidthOptions& options = {});
WidthResult capacity_width(const AssembledForm& form, const NodeSet& U, double eta,
                           const WidthOptions& options = {});

}  // namespace bhplab
