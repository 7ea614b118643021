#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bhplab/forms.hpp"
#include "bhplab/geometry.hpp"
#include "bhplab/potential.hpp"
#include "bhplab/solve.hpp"

namespace bhplab {

/// Boundary point, scale and uniformity constants for the boundary
/// experiments. All balls around xi are inner balls.
struct BhpConfig {
  int xi = -1;  // boundary-node index
  double r = 0.0;
  double c_u = 0.5;
  double C_u = 1.2;
  /// Replaces A0 as the radius multiplier of Y'; runs using it are non-conforming.
  std::optional<double> override_A0;
  int poles = 0;  // sphere poles; 0 picks max(8, ceil(2 pi 6r / h / 4))
  int sectors = 8;
  int mixtures = 64;
  int x_samples = 50;
  std::uint64_t seed = 1;
  double c_omega = 1.0;
  /// Green ball radius multiplier for the Carleson estimate; replaces
  /// c_omega * A3 (non-conforming) when set.
  std::optional<double> override_green_radius;

  double A3() const { return 2.0 * (12.0 + 12.0 * C_u); }
  double A0() const { return A3() + 7.0; }
  double A7() const { return 2.0 / c_u + 1.0; }
  double A8() const;
  double y_prime_multiplier() const { return override_A0.value_or(A0()); }
  bool conforming() const { return !override_A0.has_value(); }
};

struct BhpViolation {
  std::string u, v;
  int x = -1, x_prime = -1;
  double ratio = 1.0;
};

struct BhpScale {
  double r = 0.0;
  double y_prime_radius = 0.0;
  bool y_prime_truncated = false;  // the ball reaches every node of the grid
  int y_prime_nodes = 0;
  int x_nodes = 0;
  int poles = 0;
  int solutions = 0;
  long long pairs = 0;
  double A1_green = 1.0;
  double A1_solution = 0.0;  // 0 when not computed
  double min_solution = 0.0;  // smallest value of any normalized solution on the x-set
  int nonpositive_solutions = 0;
  double seconds = 0.0;
};

struct BhpReport {
  double A1_green = 1.0;
  double A1_solution = 0.0;
  bool conforming = true;
  double A0 = 0.0, A3 = 0.0, A7 = 0.0, A8 = 0.0;
  double h = 0.0;
  int grid_nodes = 0;
  bool symmetric_solver = true;
  std::vector<BhpScale> scales;
  std::vector<BhpViolation> violations;  // largest ratios seen, descending
};

/// Four-point Green ratio over x, x' in B(xi, r) and poles y, y' on the
/// discrete sphere of radius 6r, Green functions of Y' = B(xi, A0 r).
/// Throws ScaleTooFine when 6r < 8h or the sampled sets have fewer than 8 points.
BhpReport green_bhp(const AssembledForm& form, const BhpConfig& cfg);

/// Ratio [u(x) v(x')] / [u(x') v(x)] over a generated family of positive
/// solutions in Y' vanishing on the boundary inside B(xi, 6r): Green slices
/// with poles at distance >= 6r, harmonic measures of angular sectors of the
/// far part of the outer layer of Y', and random positive mixtures. The family
/// is grown until it yields at least `pairs` pairs.
BhpReport solution_bhp(const AssembledForm& form, const BhpConfig& cfg, int pairs);

/// Runs green_bhp or solution_bhp at each radius and merges the results.
BhpReport bhp_scales(const AssembledForm& form, BhpConfig cfg, std::span<const double> radii, bool solutions,
                     int pairs);

struct DecayRow {
  int x = -1;
  double r = 0.0;
  double scaled = 0.0;  // r / w(U)
  double omega = 0.0;
  bool excluded = false;  // r / w(U) <= 2, or omega below resolution
};

struct DecayFit {
  double width = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int used = 0;
  std::vector<DecayRow> rows;
};

/// One row of the decay table; rows with r / width <= 2 or omega <= 1e-13
/// are marked excluded.
DecayRow decay_row(const AssembledForm& form, const NodeSet& U, int x, double r, double width);
/// Least squares fit over the rows not excluded. Throws DegenerateRegression.
DecayFit fit_decay(std::vector<DecayRow> rows, double width);

/// omega = harmonic measure, inside the component D of U and B(x, r)
/// containing x, of the nodes of U on the outer layer of D; least squares
/// fit of log omega against r / width. Throws DegenerateRegression.
DecayFit harmonic_measure_decay(const AssembledForm& form, const NodeSet& U, std::span<const int> xs,
                                std::span<const double> radii, double width);

struct CollarRow {
  double r = 0.0;
  int collar_nodes = 0;
  double width = 0.0;
  double ratio = 0.0;  // width / r
  bool within = false;  // ratio <= A7 (1 + 1e-9)
};

struct CollarTable {
  double R = 0.0;
  double A7 = 0.0;
  std::vector<CollarRow> rows;
};

/// Capacity width (eta = 1/3) of {y in B(xi, R) : delta(y) < r} for each r.
/// Throws WidthOverflow.
CollarTable capacity_width_boundary(const AssembledForm& form, int xi, double R, std::span<const double> radii,
                                    double c_u, const WidthOptions& options = {});

/// Inner-ball collar {y in B(xi, R) : delta(y) < r}.
NodeSet boundary_collar(const Grid& grid, int xi, double R, double r);

struct CarlesonRow {
  int x = -1;
  double distance = 0.0;  // inner distance from xi
  double omega = 0.0, green = 0.0, ratio = 0.0;
  double omega_adjoint = 0.0, green_adjoint = 0.0, ratio_adjoint = 0.0;
};

struct CarlesonTable {
  Anchor anchor;
  bool clearance_ok = true;  // anchor clearance >= 2 c_u r
  double green_radius = 0.0;
  bool conforming = true;
  double volume = 0.0;  // V(xi, r)
  double A2 = 0.0;
  double A2_adjoint = 0.0;
  std::vector<CarlesonRow> rows;
};

/// omega(x, sphere of B(xi, 2r), B(xi, 2r)) / [(V(xi, r) / r^2) G_B(x, anchor)]
/// for sampled x in B(xi, r), with the anchor at distance 4r and B the ball
/// of radius c_omega A3 r (or the override). Repeated with omega* and G*.
/// Throws NoInteriorAnchor, EmptySample.
CarlesonTable carleson_estimate(const AssembledForm& form, const BhpConfig& cfg);

}  // namespace bhplab
