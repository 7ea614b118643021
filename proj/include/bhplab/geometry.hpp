#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace bhplab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Axis-aligned closed segment removed from the domain.
struct Slit {
  Vec2 a;
  Vec2 b;
  bool horizontal() const { return a.y == b.y; }
  double length() const { return distance(a, b); }
  friend bool operator==(const Slit&, const Slit&) = default;
};

/// Union of closed axis-aligned rectangles, minus axis-aligned slits.
struct Domain {
  std::string name;
  std::vector<Rect> rectangles;
  std::vector<Slit> slits;

  /// Throws DegenerateDomain for an empty interior or malformed parts.
  void validate() const;

  bool in_closure(Vec2 p) const;
  /// p lies in the open union of rectangles and on no slit.
  bool contains(Vec2 p) const;
  bool on_slit(Vec2 p) const;
  /// The closed segment pq lies inside the closed union of rectangles.
  bool covers_segment(Vec2 p, Vec2 q) const;
  /// The segment pq meets a slit anywhere except at an endpoint that is itself on that slit.
  bool segment_hits_slit(Vec2 p, Vec2 q) const;

  Rect bounding_box() const;
  double tolerance() const;

  friend bool operator==(const Domain&, const Domain&) = default;
};

enum class Stencil { eight, sixteen };

struct Edge {
  int to = -1;
  double length = 0.0;
};

/// A point of the inner completion on the boundary: lattice position plus
/// approach side. Points on a slit carry side +1 or -1 (above/below for a
/// horizontal slit, right/left for a vertical one); all others carry 0.
struct BoundaryNode {
  Vec2 position;
  int i = 0, j = 0;
  int side = 0;
  std::vector<Edge> neighbors;  // interior nodes reachable by a straight edge
};

/// A P1 triangle. Vertex indices >= 0 are interior nodes; a negative value
/// v encodes boundary node -(v + 1).
struct Triangle {
  std::array<int, 3> vertex{};
  double area = 0.0;
  Vec2 centroid;
};

inline int encode_boundary(int b) { return -(b + 1); }
inline int decode_boundary(int v) { return -v - 1; }

/// Uniform lattice discretization of a Domain.
///
/// Lattice points are k*h for integer k. A lattice point is an interior node
/// when it lies in the open domain, on no slit, and all six triangles of the
/// structured triangulation around it are kept. Triangles are kept when they
/// lie inside the closed union of rectangles and no slit enters their
/// interior. Interior nodes are numbered row-major (y outer, x inner).
class Grid {
 public:
  double h() const { return h_; }
  int size() const { return static_cast<int>(positions_.size()); }
  const Domain& domain() const { return domain_; }
  Stencil stencil() const { return stencil_; }

  Vec2 position(int node) const { return positions_[node]; }
  std::pair<int, int> lattice(int node) const { return lattice_[node]; }
  /// Interior node at lattice (i, j), or -1.
  int node_at(int i, int j) const;
  /// Interior node nearest to p (Euclidean), or -1 for an empty grid.
  int nearest_node(Vec2 p) const;

  std::span<const Edge> neighbors(int node) const;
  const std::vector<BoundaryNode>& boundary() const { return boundary_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  /// Euclidean distance from the node to the complement of the discrete domain.
  double boundary_distance(int node) const { return delta_[node]; }
  double node_area() const { return h_ * h_; }
  double diameter() const;

  /// Boundary node nearest to p with the given side (side 0 accepts any), or -1.
  int find_boundary(Vec2 p, int side = 0) const;

  friend Grid build_grid(const Domain& domain, double h, Stencil stencil);

 private:
  Domain domain_;
  double h_ = 0.0;
  Stencil stencil_ = Stencil::eight;
  int i0_ = 0, j0_ = 0, ni_ = 0, nj_ = 0;
  std::vector<int> index_;  // dense lattice -> node map
  std::vector<Vec2> positions_;
  std::vector<std::pair<int, int>> lattice_;
  std::vector<int> adj_offsets_;
  std::vector<Edge> adj_;
  std::vector<BoundaryNode> boundary_;
  std::vector<Triangle> triangles_;
  std::vector<double> delta_;
};

/// Throws DisconnectedGrid when no interior node exists or the node graph
/// is disconnected, DegenerateDomain for an empty domain.
Grid build_grid(const Domain& domain, double h, Stencil stencil = Stencil::eight);

/// Either an interior node or a boundary node of a Grid.
struct Source {
  enum class Kind { node, boundary };
  Kind kind = Kind::node;
  int index = -1;

  static Source node(int i) { return {Kind::node, i}; }
  static Source boundary(int b) { return {Kind::boundary, b}; }
  bool is_boundary() const { return kind == Kind::boundary; }
};

Vec2 position(const Grid& grid, Source s);

enum class MetricKind { inner, ambient };

struct DistanceField {
  Source source;
  MetricKind metric = MetricKind::inner;
  std::vector<double> dist;  // per interior node; infinity when unreachable

  double operator[](int node) const { return dist[node]; }
};

/// Graph-geodesic approximation of the inner metric from `source`. The
/// 8-neighbor stencil overestimates true geodesics by at most 1.0824, the
/// 16-neighbor stencil by at most 1.0275.
DistanceField inner_distance(const Grid& grid, Source source);
DistanceField ambient_distance(const Grid& grid, Source source);

/// Metrication bound for the stencil.
double metrication_factor(Stencil stencil);

struct NodeSet {
  enum class Kind { inner_ball, metric_ball, closed_metric_ball, component_ball, custom };
  Kind kind = Kind::custom;
  Vec2 center;
  double radius = 0.0;
  std::vector<int> members;  // sorted ascending

  bool empty() const { return members.empty(); }
  int size() const { return static_cast<int>(members.size()); }
  bool contains(int node) const;
  /// Dense membership mask over `n` nodes.
  std::vector<char> mask(int n) const;

  static NodeSet from_mask(const std::vector<char>& mask, Kind kind = Kind::custom);
  static NodeSet all(const Grid& grid);
};

bool is_subset(const NodeSet& a, const NodeSet& b);

/// {y : d_inner(source, y) < r}.
NodeSet inner_ball(const Grid& grid, Source source, double r);
NodeSet inner_ball(const DistanceField& field, double r);
/// {y : |y - center| < r}.
NodeSet metric_ball(const Grid& grid, Vec2 center, double r);
/// {y : |y - center| <= r}.
NodeSet closed_metric_ball(const Grid& grid, Vec2 center, double r);
/// Connected component containing the source of (metric ball of radius r
/// around its position) intersected with the domain.
NodeSet component_ball(const Grid& grid, Source source, double r);

/// Nodes of `set` connected to `seed` inside `set` (seed must be a member).
NodeSet connected_component(const Grid& grid, const NodeSet& set, int seed);
bool is_connected(const Grid& grid, const NodeSet& set);

struct ComparabilitySample {
  Source source;
  double r = 0.0;
};

struct ComparabilityEstimate {
  double c_omega = 0.0;
  std::vector<double> ratios;  // per sample
};

/// Empirical lower envelope of the constant C with D' inside the inner ball
/// of radius C*r. Throws EmptySample.
ComparabilityEstimate estimate_c_omega(const Grid& grid, std::span<const ComparabilitySample> samples);

struct UniformityViolation {
  int x = -1, y = -1;
  double inner_distance = 0.0;
  double best_length = std::numeric_limits<double>::infinity();  // inf: no admissible path
};

struct UniformityCertificate {
  double c = 0.0;
  double C = 0.0;
  int sampled_pairs = 0;
  std::vector<UniformityViolation> violations;

  bool certified() const { return violations.empty(); }
};

/// Sufficient cigar-subgraph test: for each pair, a path inside
/// {z : delta(z) >= c * min(d_x(z), d_y(z))} no longer than C * d(x, y).
UniformityCertificate certify_inner_uniformity(const Grid& grid, double c, double C,
                                               std::span<const std::pair<int, int>> pairs);

/// Largest c from `candidates` (tried in decreasing order) certified with
/// length constant C; returns 0 when none is.
double certified_cigar_constant(const Grid& grid, double C, std::span<const double> candidates,
                                std::span<const std::pair<int, int>> pairs);

/// Deterministic pseudo-random pair sample of interior nodes.
std::vector<std::pair<int, int>> sample_pairs(const Grid& grid, int count, std::uint64_t seed);

struct Anchor {
  int node = -1;
  double distance = 0.0;   // inner distance from the boundary point
  double clearance = 0.0;  // distance to the complement of the domain
  double clearance_ratio = 0.0;  // clearance / r
};

/// Node at inner distance multiple*r (within one h) from xi with maximal
/// clearance. Throws NoInteriorAnchor.
Anchor boundary_anchor(const Grid& grid, int xi, double r, double multiple);

/// h^2 * #ball(x, r) using the given metric.
double volume(const Grid& grid, Source x, double r, MetricKind metric = MetricKind::inner);

struct VolumeSample {
  int node = -1;
  double r = 0.0;
};

/// max V(x, 2r) / V(x, r) over the samples. Throws EmptySample.
double doubling_estimate(const Grid& grid, std::span<const VolumeSample> samples,
                         MetricKind metric = MetricKind::inner);

}  // namespace bhplab
