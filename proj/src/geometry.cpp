#include "bhplab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <random>
#include <tuple>

#include "bhplab/error.hpp"

namespace bhplab {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

namespace {

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

bool on_this_slit(const Slit& s, Vec2 p, double eps) {
  return point_segment_distance(p, s.a, s.b) <= eps;
}

// Which side of the slit's supporting line p lies on: +1, -1, or 0 on the line.
int side_of(const Slit& s, Vec2 p, double eps) {
  const double offset = s.horizontal() ? p.y - s.a.y : p.x - s.a.x;
  if (offset > eps) return 1;
  if (offset < -eps) return -1;
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Domain

double Domain::tolerance() const {
  const Rect bb = bounding_box();
  const double extent = std::max({bb.x1 - bb.x0, bb.y1 - bb.y0, 1.0});
  return 1e-9 * extent;
}

Rect Domain::bounding_box() const {
  if (rectangles.empty()) return {};
  Rect bb = rectangles.front();
  for (const Rect& r : rectangles) {
    bb.x0 = std::min(bb.x0, r.x0);
    bb.y0 = std::min(bb.y0, r.y0);
    bb.x1 = std::max(bb.x1, r.x1);
    bb.y1 = std::max(bb.y1, r.y1);
  }
  return bb;
}

void Domain::validate() const {
  if (rectangles.empty()) throw Error(ErrorKind::DegenerateDomain, "domain '" + name + "' has no rectangles");
  for (const Rect& r : rectangles) {
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0))
      throw Error(ErrorKind::DegenerateDomain, "rectangle with empty interior in '" + name + "'");
  }
  const double eps = tolerance();
  for (const Slit& s : slits) {
    if (s.a.x != s.b.x && s.a.y != s.b.y)
      throw Error(ErrorKind::DegenerateDomain, "slit is not axis-aligned in '" + name + "'");
    if (s.length() <= eps) throw Error(ErrorKind::DegenerateDomain, "slit of zero length in '" + name + "'");
    if (!covers_segment(s.a, s.b))
      throw Error(ErrorKind::DegenerateDomain, "slit leaves the rectangles of '" + name + "'");
  }
  // Rectangles must form one connected union (overlap or a shared edge of positive length).
  const std::size_t n = rectangles.size();
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  auto touching = [eps](const Rect& a, const Rect& b) {
    const double ox = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double oy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (ox > eps && oy >= -eps) || (oy > eps && ox >= -eps);
  };
  while (!stack.empty()) {
    const std::size_t k = stack.back();
    stack.pop_back();
    for (std::size_t m = 0; m < n; ++m) {
      if (!seen[m] && touching(rectangles[k], rectangles[m])) {
        seen[m] = 1;
        stack.push_back(m);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end())
    throw Error(ErrorKind::DegenerateDomain, "rectangles of '" + name + "' do not form a connected union");
}

bool Domain::in_closure(Vec2 p) const {
  const double eps = tolerance();
  for (const Rect& r : rectangles) {
    if (p.x >= r.x0 - eps && p.x <= r.x1 + eps && p.y >= r.y0 - eps && p.y <= r.y1 + eps) return true;
  }
  return false;
}

bool Domain::on_slit(Vec2 p) const {
  const double eps = tolerance();
  return std::any_of(slits.begin(), slits.end(), [&](const Slit& s) { return on_this_slit(s, p, eps); });
}

bool Domain::contains(Vec2 p) const {
  // A point is interior to a union of closed rectangles iff all four
  // diagonal quadrants next to it are covered.
  const double e = 10.0 * tolerance();
  const Vec2 probes[4] = {{p.x + e, p.y + e}, {p.x - e, p.y + e}, {p.x + e, p.y - e}, {p.x - e, p.y - e}};
  for (const Vec2& q : probes) {
    bool covered = false;
    for (const Rect& r : rectangles) {
      if (q.x > r.x0 && q.x < r.x1 && q.y > r.y0 && q.y < r.y1) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return !on_slit(p);
}

bool Domain::covers_segment(Vec2 p, Vec2 q) const {
  const double eps = tolerance();
  const Vec2 d = q - p;
  if (norm(d) <= eps) return in_closure(p);
  std::vector<std::pair<double, double>> spans;
  for (const Rect& r : rectangles) {
    // Liang-Barsky clip against the slightly enlarged closed rectangle.
    double t0 = 0.0, t1 = 1.0;
    const double pk[4] = {-d.x, d.x, -d.y, d.y};
    const double qk[4] = {p.x - (r.x0 - eps), (r.x1 + eps) - p.x, p.y - (r.y0 - eps), (r.y1 + eps) - p.y};
    bool inside = true;
    for (int k = 0; k < 4 && inside; ++k) {
      if (pk[k] == 0.0) {
        if (qk[k] < 0.0) inside = false;
      } else {
        const double t = qk[k] / pk[k];
        if (pk[k] < 0.0) {
          t0 = std::max(t0, t);
        } else {
          t1 = std::min(t1, t);
        }
      }
    }
    if (inside && t0 <= t1) spans.emplace_back(t0, t1);
  }
  std::sort(spans.begin(), spans.end());
  const double gap = eps / norm(d);
  double reach = 0.0;
  for (const auto& [a, b] : spans) {
    if (a > reach + gap) return false;
    reach = std::max(reach, b);
    if (reach >= 1.0 - gap) return true;
  }
  return reach >= 1.0 - gap;
}

bool Domain::segment_hits_slit(Vec2 p, Vec2 q) const {
  const double eps = tolerance();
  const Vec2 d = q - p;
  const double len = norm(d);
  if (len <= eps) return false;
  const double tol_t = eps / len;
  for (const Slit& s : slits) {
    const Vec2 e = s.b - s.a;
    const double denom = cross(d, e);
    const bool p_on = on_this_slit(s, p, eps);
    const bool q_on = on_this_slit(s, q, eps);
    auto allowed = [&](double t) { return (p_on && t <= tol_t) || (q_on && t >= 1.0 - tol_t); };
    if (std::abs(denom) > 1e-14 * len * s.length()) {
      const double t = cross(s.a - p, e) / denom;
      const double u = cross(s.a - p, d) / denom;
      const double tol_u = eps / s.length();
      if (t >= -tol_t && t <= 1.0 + tol_t && u >= -tol_u && u <= 1.0 + tol_u && !allowed(t)) return true;
    } else {
      // Parallel: only collinear overlap matters.
      if (std::abs(cross(s.a - p, d)) / len > eps) continue;
      double ta = dot(s.a - p, d) / (len * len);
      double tb = dot(s.b - p, d) / (len * len);
      if (ta > tb) std::swap(ta, tb);
      const double lo = std::max(0.0, ta);
      const double hi = std::min(1.0, tb);
      if (hi < lo - tol_t) continue;
      if (hi - lo > tol_t) return true;
      if (!allowed(0.5 * (lo + hi))) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Grid construction

namespace {

bool open_triangle_meets_slit(const std::array<Vec2, 3>& v, const Slit& s, double eps) {
  // Orientation-independent inward normals.
  const double orient = cross(v[1] - v[0], v[2] - v[0]) > 0.0 ? 1.0 : -1.0;
  double u_lo = 0.0, u_hi = 1.0;
  const Vec2 e = s.b - s.a;
  std::array<Vec2, 3> normals;
  for (int k = 0; k < 3; ++k) {
    const Vec2 edge = v[(k + 1) % 3] - v[k];
    normals[k] = orient * Vec2{-edge.y, edge.x};
    // n . (a + u e - v_k) >= 0
    const double base = dot(normals[k], s.a - v[k]);
    const double rate = dot(normals[k], e);
    if (std::abs(rate) < 1e-300) {
      if (base < 0.0) return false;
    } else if (rate > 0.0) {
      u_lo = std::max(u_lo, -base / rate);
    } else {
      u_hi = std::min(u_hi, -base / rate);
    }
  }
  if (u_lo > u_hi) return false;
  const Vec2 m = s.a + (0.5 * (u_lo + u_hi)) * e;
  for (int k = 0; k < 3; ++k) {
    if (dot(normals[k], m - v[k]) / norm(normals[k]) <= eps) return false;
  }
  return true;
}

std::vector<std::pair<int, int>> stencil_offsets(Stencil stencil) {
  std::vector<std::pair<int, int>> off = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  if (stencil == Stencil::sixteen) {
    for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 2}, {2, 1}}) {
      for (int sa : {1, -1}) {
        for (int sb : {1, -1}) off.emplace_back(sa * a, sb * b);
      }
    }
  }
  return off;
}

// Segment bucket index for nearest-boundary queries.
class SegmentIndex {
 public:
  SegmentIndex(std::vector<std::pair<Vec2, Vec2>> segs, Rect box, double cell)
      : segs_(std::move(segs)), box_(box), cell_(cell) {
    nx_ = std::max(1, static_cast<int>(std::ceil((box.x1 - box.x0) / cell)) + 1);
    ny_ = std::max(1, static_cast<int>(std::ceil((box.y1 - box.y0) / cell)) + 1);
    buckets_.resize(static_cast<std::size_t>(nx_) * ny_);
    for (int k = 0; k < static_cast<int>(segs_.size()); ++k) {
      const auto& [a, b] = segs_[k];
      const int bx0 = bx(std::min(a.x, b.x)), bx1 = bx(std::max(a.x, b.x));
      const int by0 = by(std::min(a.y, b.y)), by1 = by(std::max(a.y, b.y));
      for (int i = bx0; i <= bx1; ++i) {
        for (int j = by0; j <= by1; ++j) buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(k);
      }
    }
  }

  double nearest(Vec2 p) const {
    if (segs_.empty()) return std::numeric_limits<double>::infinity();
    const int ci = bx(p.x), cj = by(p.y);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      // Every point outside the ring's box is at least ring*cell away.
      if (ring > 0 && best <= (ring - 1) * cell_) break;
      for (int i = ci - ring; i <= ci + ring; ++i) {
        for (int j = cj - ring; j <= cj + ring; ++j) {
          if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
          if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
          for (int k : buckets_[static_cast<std::size_t>(j) * nx_ + i]) {
            best = std::min(best, point_segment_distance(p, segs_[k].first, segs_[k].second));
          }
        }
      }
    }
    return best;
  }

 private:
  int bx(double x) const { return std::clamp(static_cast<int>(std::floor((x - box_.x0) / cell_)), 0, nx_ - 1); }
  int by(double y) const { return std::clamp(static_cast<int>(std::floor((y - box_.y0) / cell_)), 0, ny_ - 1); }

  std::vector<std::pair<Vec2, Vec2>> segs_;
  Rect box_;
  double cell_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace

Grid build_grid(const Domain& domain, double h, Stencil stencil) {
  domain.validate();
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::DegenerateDomain, "grid spacing must be positive");
  const double eps = domain.tolerance();

  Grid g;
  g.domain_ = domain;
  g.h_ = h;
  g.stencil_ = stencil;

  const Rect bb = domain.bounding_box();
  g.i0_ = static_cast<int>(std::ceil(bb.x0 / h - 1e-9));
  g.j0_ = static_cast<int>(std::ceil(bb.y0 / h - 1e-9));
  const int i1 = static_cast<int>(std::floor(bb.x1 / h + 1e-9));
  const int j1 = static_cast<int>(std::floor(bb.y1 / h + 1e-9));
  g.ni_ = std::max(0, i1 - g.i0_ + 1);
  g.nj_ = std::max(0, j1 - g.j0_ + 1);
  const int ni = g.ni_, nj = g.nj_;
  auto lat = [&](int li, int lj) { return static_cast<std::size_t>(lj) * ni + li; };
  auto pos = [&](int li, int lj) { return Vec2{(g.i0_ + li) * h, (g.j0_ + lj) * h}; };

  // Lattice point classification.
  std::vector<char> closure(static_cast<std::size_t>(ni) * nj, 0), open(closure.size(), 0);
  for (int lj = 0; lj < nj; ++lj) {
    for (int li = 0; li < ni; ++li) {
      const Vec2 p = pos(li, lj);
      closure[lat(li, lj)] = domain.in_closure(p);
      open[lat(li, lj)] = closure[lat(li, lj)] && domain.contains(p);
    }
  }

  // Structured triangulation: each cell split along its (i,j)-(i+1,j+1) diagonal.
  struct RawTriangle {
    std::array<std::pair<int, int>, 3> v;
  };
  std::vector<RawTriangle> kept;
  std::vector<int> incident(closure.size(), 0);
  for (int lj = 0; lj + 1 < nj; ++lj) {
    for (int li = 0; li + 1 < ni; ++li) {
      const std::array<RawTriangle, 2> pair = {
          RawTriangle{{{{li, lj}, {li + 1, lj}, {li + 1, lj + 1}}}},
          RawTriangle{{{{li, lj}, {li + 1, lj + 1}, {li, lj + 1}}}}};
      for (const RawTriangle& t : pair) {
        bool ok = true;
        std::array<Vec2, 3> pts;
        for (int k = 0; k < 3 && ok; ++k) {
          ok = closure[lat(t.v[k].first, t.v[k].second)];
          pts[k] = pos(t.v[k].first, t.v[k].second);
        }
        if (!ok) continue;
        const Vec2 centroid = (1.0 / 3.0) * (pts[0] + pts[1] + pts[2]);
        if (!domain.contains(centroid)) continue;
        for (int k = 0; k < 3 && ok; ++k) ok = domain.covers_segment(pts[k], pts[(k + 1) % 3]);
        for (std::size_t s = 0; s < domain.slits.size() && ok; ++s)
          ok = !open_triangle_meets_slit(pts, domain.slits[s], eps);
        if (!ok) continue;
        kept.push_back(t);
        for (const auto& [vi, vj] : t.v) ++incident[lat(vi, vj)];
      }
    }
  }

  // Interior nodes, row-major.
  g.index_.assign(closure.size(), -1);
  for (int lj = 0; lj < nj; ++lj) {
    for (int li = 0; li < ni; ++li) {
      if (open[lat(li, lj)] && incident[lat(li, lj)] == 6) {
        g.index_[lat(li, lj)] = static_cast<int>(g.positions_.size());
        g.positions_.push_back(pos(li, lj));
        g.lattice_.emplace_back(g.i0_ + li, g.j0_ + lj);
      }
    }
  }
  if (g.positions_.empty()) {
    throw Error(ErrorKind::DisconnectedGrid,
                "no interior lattice point in '" + domain.name + "' at h=" + std::to_string(h));
  }

  auto slit_index_at = [&](Vec2 p) -> int {
    for (std::size_t s = 0; s < domain.slits.size(); ++s) {
      if (on_this_slit(domain.slits[s], p, eps)) return static_cast<int>(s);
    }
    return -1;
  };

  // A slit endpoint surrounded by the domain is a single point of the
  // completion; every other slit point has two sides.
  auto is_free_tip = [&](Vec2 p) {
    int on = 0;
    bool endpoint = false;
    for (const Slit& s : domain.slits) {
      if (!on_this_slit(s, p, eps)) continue;
      ++on;
      endpoint = endpoint || distance(p, s.a) <= eps || distance(p, s.b) <= eps;
    }
    if (on != 1 || !endpoint) return false;
    Domain open_rects = domain;
    open_rects.slits.clear();
    return open_rects.contains(p);
  };

  // Boundary vertices keyed by (j, i, side) for a row-major ordering.
  std::map<std::tuple<int, int, int>, int> bkey;
  std::vector<std::array<std::tuple<int, int, int>, 3>> tri_keys(kept.size());
  for (std::size_t t = 0; t < kept.size(); ++t) {
    std::array<Vec2, 3> pts;
    for (int k = 0; k < 3; ++k) pts[k] = pos(kept[t].v[k].first, kept[t].v[k].second);
    const Vec2 centroid = (1.0 / 3.0) * (pts[0] + pts[1] + pts[2]);
    for (int k = 0; k < 3; ++k) {
      const auto [li, lj] = kept[t].v[k];
      int side = 0;
      if (g.index_[lat(li, lj)] < 0) {
        if (const int s = slit_index_at(pts[k]); s >= 0 && !is_free_tip(pts[k])) {
          side = side_of(domain.slits[s], centroid, eps);
        }
        bkey.emplace(std::make_tuple(lj, li, side), 0);
      }
      tri_keys[t][k] = {lj, li, side};
    }
  }
  {
    int next = 0;
    for (auto& [key, idx] : bkey) {
      idx = next++;
      const auto [lj, li, side] = key;
      BoundaryNode b;
      b.position = pos(li, lj);
      b.i = g.i0_ + li;
      b.j = g.j0_ + lj;
      b.side = side;
      g.boundary_.push_back(std::move(b));
    }
  }

  g.triangles_.reserve(kept.size());
  const double area = 0.5 * h * h;
  for (std::size_t t = 0; t < kept.size(); ++t) {
    Triangle tri;
    Vec2 c{};
    for (int k = 0; k < 3; ++k) {
      const auto [li, lj] = kept[t].v[k];
      const int node = g.index_[lat(li, lj)];
      tri.vertex[k] = node >= 0 ? node : encode_boundary(bkey.at(tri_keys[t][k]));
      c = c + pos(li, lj);
    }
    tri.area = area;
    tri.centroid = (1.0 / 3.0) * c;
    g.triangles_.push_back(tri);
  }

  // Geometric adjacency.
  const auto offsets = stencil_offsets(stencil);
  g.adj_offsets_.assign(g.positions_.size() + 1, 0);
  for (int n = 0; n < g.size(); ++n) {
    const auto [i, j] = g.lattice_[n];
    const Vec2 p = g.positions_[n];
    for (const auto& [di, dj] : offsets) {
      const int m = g.node_at(i + di, j + dj);
      if (m < 0) continue;
      const Vec2 q = g.positions_[m];
      if (!domain.covers_segment(p, q) || domain.segment_hits_slit(p, q)) continue;
      g.adj_.push_back({m, distance(p, q)});
    }
    g.adj_offsets_[n + 1] = static_cast<int>(g.adj_.size());
  }

  for (BoundaryNode& b : g.boundary_) {
    const int s = slit_index_at(b.position);
    for (const auto& [di, dj] : offsets) {
      const int m = g.node_at(b.i + di, b.j + dj);
      if (m < 0) continue;
      const Vec2 q = g.positions_[m];
      if (!domain.covers_segment(b.position, q) || domain.segment_hits_slit(b.position, q)) continue;
      if (b.side != 0 && s >= 0) {
        const int qs = side_of(domain.slits[s], q, eps);
        if (qs != 0 && qs != b.side) continue;
      }
      b.neighbors.push_back({m, distance(b.position, q)});
    }
  }

  // Connectivity of the node graph.
  {
    std::vector<char> seen(g.positions_.size(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      for (const Edge& e : g.neighbors(n)) {
        if (!seen[e.to]) {
          seen[e.to] = 1;
          ++count;
          stack.push_back(e.to);
        }
      }
    }
    if (count != g.size()) {
      throw Error(ErrorKind::DisconnectedGrid, "interior graph of '" + domain.name + "' has " +
                                                   std::to_string(g.size() - count) + " unreachable nodes at h=" +
                                                   std::to_string(h));
    }
  }

  // Boundary segments of the discrete domain: triangle edges with a single
  // kept triangle, or lying on a slit.
  {
    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    for (const RawTriangle& t : kept) {
      for (int k = 0; k < 3; ++k) {
        std::size_t a = lat(t.v[k].first, t.v[k].second);
        std::size_t b = lat(t.v[(k + 1) % 3].first, t.v[(k + 1) % 3].second);
        if (a > b) std::swap(a, b);
        ++edge_count[{a, b}];
      }
    }
    std::vector<std::pair<Vec2, Vec2>> segs;
    auto unlat = [&](std::size_t k) { return pos(static_cast<int>(k % ni), static_cast<int>(k / ni)); };
    for (const auto& [key, count] : edge_count) {
      const Vec2 a = unlat(key.first), b = unlat(key.second);
      if (count == 1 || domain.on_slit(0.5 * (a + b))) segs.emplace_back(a, b);
    }
    SegmentIndex index(std::move(segs), bb, 8.0 * h);
    g.delta_.resize(g.positions_.size());
    for (int n = 0; n < g.size(); ++n) g.delta_[n] = index.nearest(g.positions_[n]);
  }

  return g;
}

int Grid::node_at(int i, int j) const {
  const int li = i - i0_, lj = j - j0_;
  if (li < 0 || lj < 0 || li >= ni_ || lj >= nj_) return -1;
  return index_[static_cast<std::size_t>(lj) * ni_ + li];
}

int Grid::nearest_node(Vec2 p) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int n = 0; n < size(); ++n) {
    const double d = distance(p, positions_[n]);
    if (d < best_d) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

int Grid::find_boundary(Vec2 p, int side) const {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int b = 0; b < static_cast<int>(boundary_.size()); ++b) {
    if (side != 0 && boundary_[b].side != side) continue;
    const double d = distance(p, boundary_[b].position);
    if (d < best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

std::span<const Edge> Grid::neighbors(int node) const {
  return {adj_.data() + adj_offsets_[node], adj_.data() + adj_offsets_[node + 1]};
}

double Grid::diameter() const {
  const Rect bb = domain_.bounding_box();
  return std::hypot(bb.x1 - bb.x0, bb.y1 - bb.y0);
}

// ---------------------------------------------------------------------------
// Distances and balls

Vec2 position(const Grid& grid, Source s) {
  return s.is_boundary() ? grid.boundary()[s.index].position : grid.position(s.index);
}

double metrication_factor(Stencil stencil) {
  // Worst-case ratio of stencil path length to Euclidean length, attained
  // halfway between adjacent stencil directions.
  if (stencil == Stencil::eight) return 1.0 / std::cos(std::numbers::pi / 8.0);
  const double half_gap = 0.5 * std::atan(0.5);  // between 0 and atan(1/2)
  return 1.0 / std::cos(half_gap);
}

namespace {

std::vector<double> dijkstra(const Grid& grid, Source source, const std::vector<char>* allowed) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(grid.size(), inf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  if (source.is_boundary()) {
    for (const Edge& e : grid.boundary()[source.index].neighbors) {
      if (allowed && !(*allowed)[e.to]) continue;
      if (e.length < dist[e.to]) {
        dist[e.to] = e.length;
        queue.emplace(e.length, e.to);
      }
    }
  } else {
    dist[source.index] = 0.0;
    queue.emplace(0.0, source.index);
  }
  while (!queue.empty()) {
    const auto [d, n] = queue.top();
    queue.pop();
    if (d > dist[n]) continue;
    for (const Edge& e : grid.neighbors(n)) {
      if (allowed && !(*allowed)[e.to]) continue;
      const double nd = d + e.length;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        queue.emplace(nd, e.to);
      }
    }
  }
  return dist;
}

}  // namespace

DistanceField inner_distance(const Grid& grid, Source source) {
  return {source, MetricKind::inner, dijkstra(grid, source, nullptr)};
}

DistanceField ambient_distance(const Grid& grid, Source source) {
  DistanceField f{source, MetricKind::ambient, std::vector<double>(grid.size())};
  const Vec2 p = position(grid, source);
  for (int n = 0; n < grid.size(); ++n) f.dist[n] = distance(p, grid.position(n));
  return f;
}

bool NodeSet::contains(int node) const { return std::binary_search(members.begin(), members.end(), node); }

std::vector<char> NodeSet::mask(int n) const {
  std::vector<char> m(n, 0);
  for (int v : members) m[v] = 1;
  return m;
}

NodeSet NodeSet::from_mask(const std::vector<char>& mask, Kind kind) {
  NodeSet s;
  s.kind = kind;
  for (int n = 0; n < static_cast<int>(mask.size()); ++n) {
    if (mask[n]) s.members.push_back(n);
  }
  return s;
}

NodeSet NodeSet::all(const Grid& grid) {
  NodeSet s;
  s.members.resize(grid.size());
  for (int n = 0; n < grid.size(); ++n) s.members[n] = n;
  return s;
}

bool is_subset(const NodeSet& a, const NodeSet& b) {
  return std::includes(b.members.begin(), b.members.end(), a.members.begin(), a.members.end());
}

NodeSet inner_ball(const DistanceField& field, double r) {
  NodeSet s;
  s.kind = NodeSet::Kind::inner_ball;
  s.radius = r;
  for (int n = 0; n < static_cast<int>(field.dist.size()); ++n) {
    if (field.dist[n] < r) s.members.push_back(n);
  }
  return s;
}

NodeSet inner_ball(const Grid& grid, Source source, double r) {
  NodeSet s = inner_ball(inner_distance(grid, source), r);
  s.center = position(grid, source);
  return s;
}

NodeSet metric_ball(const Grid& grid, Vec2 center, double r) {
  NodeSet s;
  s.kind = NodeSet::Kind::metric_ball;
  s.center = center;
  s.radius = r;
  // Same slack as component_ball, so that component balls stay inside.
  const double reach = r * (1.0 + 1e-12);
  for (int n = 0; n < grid.size(); ++n) {
    if (distance(center, grid.position(n)) < reach) s.members.push_back(n);
  }
  return s;
}

NodeSet closed_metric_ball(const Grid& grid, Vec2 center, double r) {
  NodeSet s;
  s.kind = NodeSet::Kind::closed_metric_ball;
  s.center = center;
  s.radius = r;
  const double tol = 1e-12 * std::max(r, grid.h());
  for (int n = 0; n < grid.size(); ++n) {
    if (distance(center, grid.position(n)) <= r + tol) s.members.push_back(n);
  }
  return s;
}

NodeSet component_ball(const Grid& grid, Source source, double r) {
  const Vec2 c = position(grid, source);
  // The slack keeps exact lattice distances from rounding below graph sums.
  const double reach = r * (1.0 + 1e-12);
  auto inside = [&](int n) { return distance(c, grid.position(n)) < reach; };
  std::vector<char> seen(grid.size(), 0);
  std::vector<int> stack;
  if (source.is_boundary()) {
    for (const Edge& e : grid.boundary()[source.index].neighbors) {
      if (inside(e.to) && !seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  } else {
    seen[source.index] = 1;
    stack.push_back(source.index);
  }
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (const Edge& e : grid.neighbors(n)) {
      if (!seen[e.to] && inside(e.to)) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  NodeSet s = NodeSet::from_mask(seen, NodeSet::Kind::component_ball);
  s.center = c;
  s.radius = r;
  return s;
}

NodeSet connected_component(const Grid& grid, const NodeSet& set, int seed) {
  const std::vector<char> in = set.mask(grid.size());
  std::vector<char> seen(grid.size(), 0);
  if (!in[seed]) return {};
  std::vector<int> stack{seed};
  seen[seed] = 1;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (const Edge& e : grid.neighbors(n)) {
      if (in[e.to] && !seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  NodeSet s = NodeSet::from_mask(seen, set.kind);
  s.center = set.center;
  s.radius = set.radius;
  return s;
}

bool is_connected(const Grid& grid, const NodeSet& set) {
  if (set.empty()) return false;
  return connected_component(grid, set, set.members.front()).size() == set.size();
}

ComparabilityEstimate estimate_c_omega(const Grid& grid, std::span<const ComparabilitySample> samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptySample, "estimate_c_omega needs at least one (x, r) sample");
  ComparabilityEstimate est;
  for (const ComparabilitySample& s : samples) {
    const NodeSet d_prime = component_ball(grid, s.source, s.r);
    const DistanceField field = inner_distance(grid, s.source);
    double far = 0.0;
    for (int n : d_prime.members) far = std::max(far, field[n]);
    est.ratios.push_back(far / s.r);
    est.c_omega = std::max(est.c_omega, far / s.r);
  }
  return est;
}

UniformityCertificate certify_inner_uniformity(const Grid& grid, double c, double C,
                                               std::span<const std::pair<int, int>> pairs) {
  UniformityCertificate cert;
  cert.c = c;
  cert.C = C;
  cert.sampled_pairs = static_cast<int>(pairs.size());
  std::vector<char> admissible(grid.size());
  for (const auto& [x, y] : pairs) {
    const DistanceField dx = inner_distance(grid, Source::node(x));
    const DistanceField dy = inner_distance(grid, Source::node(y));
    for (int z = 0; z < grid.size(); ++z) {
      admissible[z] = grid.boundary_distance(z) >= c * std::min(dx[z], dy[z]);
    }
    const double d = dx[y];
    const double best = dijkstra(grid, Source::node(x), &admissible)[y];
    if (!(best <= C * d * (1.0 + 1e-12))) cert.violations.push_back({x, y, d, best});
  }
  return cert;
}

double certified_cigar_constant(const Grid& grid, double C, std::span<const double> candidates,
                                std::span<const std::pair<int, int>> pairs) {
  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (double c : sorted) {
    if (certify_inner_uniformity(grid, c, C, pairs).certified()) return c;
  }
  return 0.0;
}

std::vector<std::pair<int, int>> sample_pairs(const Grid& grid, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, grid.size() - 1);
  std::vector<std::pair<int, int>> pairs;
  if (grid.size() < 2) return pairs;
  while (static_cast<int>(pairs.size()) < count) {
    const int a = pick(rng), b = pick(rng);
    if (a != b) pairs.emplace_back(a, b);
  }
  return pairs;
}

Anchor boundary_anchor(const Grid& grid, int xi, double r, double multiple) {
  const double target = multiple * r;
  const double h = grid.h();
  if (target < h) {
    throw Error(ErrorKind::NoInteriorAnchor, "anchor radius " + std::to_string(target) + " is below the grid spacing");
  }
  const DistanceField field = inner_distance(grid, Source::boundary(xi));
  Anchor best;
  best.clearance = -1.0;
  for (int n = 0; n < grid.size(); ++n) {
    if (std::abs(field[n] - target) > h) continue;
    if (grid.boundary_distance(n) > best.clearance) {
      best.node = n;
      best.distance = field[n];
      best.clearance = grid.boundary_distance(n);
    }
  }
  if (best.node < 0 || best.clearance < h * (1.0 - 1e-9)) {
    throw Error(ErrorKind::NoInteriorAnchor, "no node at inner distance " + std::to_string(target) +
                                                 " clears the boundary by one grid spacing");
  }
  best.clearance_ratio = best.clearance / r;
  return best;
}

double volume(const Grid& grid, Source x, double r, MetricKind metric) {
  const NodeSet ball =
      metric == MetricKind::inner ? inner_ball(grid, x, r) : metric_ball(grid, position(grid, x), r);
  return grid.node_area() * ball.size();
}

double doubling_estimate(const Grid& grid, std::span<const VolumeSample> samples, MetricKind metric) {
  if (samples.empty()) throw Error(ErrorKind::EmptySample, "doubling_estimate needs at least one sample");
  double worst = 0.0;
  for (const VolumeSample& s : samples) {
    const double v1 = volume(grid, Source::node(s.node), s.r, metric);
    const double v2 = volume(grid, Source::node(s.node), 2.0 * s.r, metric);
    worst = std::max(worst, v2 / v1);
  }
  return worst;
}

}  // namespace bhplab
