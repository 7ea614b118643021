#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "bhplab/expression.hpp"
#include "bhplab/geometry.hpp"

namespace bhplab {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Coefficients of
///
///     E(f,g) = int sum a_ij d_i f d_j g + (b . grad f) g + f (d . grad g) + c f g.
struct CoefficientField {
  std::string name = "laplacian";
  Expression a11 = Expression::constant(1.0);
  Expression a12;
  Expression a21;
  Expression a22 = Expression::constant(1.0);
  Expression b1, b2, d1, d2, c;

  static CoefficientField laplacian();
  /// b = (beta, 0).
  static CoefficientField drift(double beta);
  /// a = [[1, s(x,y)], [-s(x,y), 1]] with s = amplitude * sin(pi x) sin(pi y).
  static CoefficientField skew(double amplitude);
  /// a = [[1, s], [-s, 1]] with s constant.
  static CoefficientField constant_skew(double s);
  static CoefficientField killing(double c);

  /// Names accepted by preset(): laplacian, drift, skew, killing.
  static std::vector<std::string> presets();
  static CoefficientField preset(const std::string& name);

  /// Text format:
  ///
  ///     [constants]
  ///     beta = 0.5
  ///     [fields]
  ///     b1 = beta * x
  ///
  /// Keys: a11 a12 a21 a22 b1 b2 d1 d2 c. Omitted fields keep the Laplacian
  /// default. Throws ParseError.
  static CoefficientField parse(const std::string& text);
  /// "preset:NAME" or a file path.
  static CoefficientField load(const std::string& spec);

  bool has_first_order() const;
  bool has_skew_a() const;
};

/// Discrete form on the interior nodes of a grid: P1 elements on the
/// structured triangulation with one-point quadrature, Dirichlet nodes
/// eliminated.
///
/// With K_ij = E(phi_j, phi_i) so that E(f, g) = g^T K f:
///
///     E_sym  = E_s + diag(kappa * mass)
///     E_skew = stiffness of skew(a) + antisymmetric part of the first-order terms
///     E      = E_sym + E_skew
///
/// The symmetric part of the first-order terms is represented by the lumped
/// killing weights kappa = c - (div b + div d) / 2.
struct AssembledForm {
  std::shared_ptr<const Grid> grid;
  CoefficientField coefficients;

  SparseMatrix E;
  SparseMatrix E_sym;
  SparseMatrix E_skew;
  SparseMatrix E_s;
  SparseMatrix E_hat;
  /// Coupling of interior rows to boundary-vertex columns (E(phi_b, phi_i)).
  SparseMatrix E_boundary;
  /// Same for the adjoint form (E(phi_i, phi_b)) and for E_s.
  SparseMatrix E_boundary_adjoint;
  SparseMatrix E_s_boundary;
  Vector kappa;
  Vector mass;

  /// Smallest eigenvalue of sym(a) over triangle barycenters.
  double ellipticity = 0.0;

  int size() const { return static_cast<int>(mass.size()); }
};

/// Throws EllipticityViolation or NegativeKilling.
AssembledForm assemble(std::shared_ptr<const Grid> grid, const CoefficientField& coeff);

struct AssumptionConstants {
  double C0 = 0.0;
  double C0_spread = 0.0;  // max - min over probes
  double C1 = 1.0;
  double C2 = 0.0, C3 = 0.0, C4 = 0.0, C5 = 0.0, C6 = 0.0, C7 = 0.0, C8 = 0.0;
};

struct ConstantOptions {
  int probes = 16;
  std::uint64_t seed = 1;
  int max_iterations = 500;
  double tolerance = 1e-6;
};

/// C1 from per-triangle eigenvalues of sym(a); C2-C7 from sup-norm bounds;
/// C0 by power iteration on the skew operator in the E_sym + mass inner
/// product. Throws NonConvergence.
///
/// With beta = (b - d)/2 and |A| the operator norm of skew(a):
///
///     C2 = |b + d|^2 / 2,  C3 = |c|^2 / 2      (C2 = 0, C3 = |kappa_+|^2 / 4 when b + d = 0)
///     C4 = 2 |A|^2,  C5 = 2 |beta|^2           (|A|^2 or |beta|^2 alone when the other vanishes)
///     C6 = |A|^2,  C7 = 2 |beta|^2
///     C8 = C2 + C3 + C5 + C7
AssumptionConstants estimate_constants(const AssembledForm& form, const ConstantOptions& options = {});

/// Smallest Dirichlet eigenvalue of E_sym restricted to `nodes` with the
/// lumped mass, by inverse iteration to relative tolerance 1e-8.
/// Throws NonConvergence, SingularSystem for an empty node set.
double lowest_eigenvalue(const AssembledForm& form, const NodeSet& nodes);

/// (1 + C0 C1 / alpha)^4 (1 + 2 sqrt(max(C2, C3/alpha) / alpha))^2.
double a_R(const AssumptionConstants& k, double alpha);

/// Constant C with tilde-Cap <= Cap <= C^2 tilde-Cap:
/// (1 + C0 C1 / alpha)(1 + 2 sqrt(max(C2, C3/alpha) / alpha)).
double capacity_sandwich_constant(const AssumptionConstants& k, double alpha);

}  // namespace bhplab
