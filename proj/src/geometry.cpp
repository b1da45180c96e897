#include "cityforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cityforge/error.hpp"

namespace cityforge::geometry {
namespace {

// Sign of the turn a->b->c, treating points within kEpsilon of the line ab as
// collinear.
int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a;
  const double c_ab = cross(ab, c - a);
  const double tol = kEpsilon * std::max(length(ab), 1.0);
  if (c_ab > tol) return 1;
  if (c_ab < -tol) return -1;
  return 0;
}

bool within_box(Vec2 a, Vec2 b, Vec2 p) {
  return p.x >= std::min(a.x, b.x) - kEpsilon && p.x <= std::max(a.x, b.x) + kEpsilon &&
         p.y >= std::min(a.y, b.y) - kEpsilon && p.y <= std::max(a.y, b.y) + kEpsilon;
}

// Closed-segment intersection test (touching counts).
bool segments_touch(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  if (o1 == 0 && within_box(p1, p2, q1)) return true;
  if (o2 == 0 && within_box(p1, p2, q2)) return true;
  if (o3 == 0 && within_box(q1, q2, p1)) return true;
  if (o4 == 0 && within_box(q1, q2, p2)) return true;
  return false;
}

// Adjacent edges a->v and v->c only conflict when the ring folds back on itself.
bool adjacent_overlap(Vec2 a, Vec2 v, Vec2 c) {
  return orientation(a, v, c) == 0 && dot(a - v, c - v) > 0.0;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return length(p - (a + ab * t));
}

bool in_closed_triangle(Vec2 a, Vec2 b, Vec2 c, Vec2 p) {
  return orientation(a, b, p) >= 0 && orientation(b, c, p) >= 0 && orientation(c, a, p) >= 0;
}

double convex_clip_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  const auto piece = clip_convex(a, b);
  if (piece.size() < 3) return 0.0;
  return std::abs(signed_area(piece));
}

std::vector<Vec2> ccw(std::span<const Vec2> polygon) {
  if (signed_area(polygon) < 0.0) return reversed(polygon);
  return {polygon.begin(), polygon.end()};
}

}  // namespace

double signed_area(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

bool is_simple(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;

  for (std::size_t i = 0; i < n; ++i) {
    if (adjacent_overlap(polygon[(i + n - 1) % n], polygon[i], polygon[(i + 1) % n])) return false;
  }
  if (n == 3) return orientation(polygon[0], polygon[1], polygon[2]) != 0;

  // Sweep edges by their minimum x and only test pairs whose x-extents overlap.
  struct Span {
    double lo, hi;
    std::size_t edge;
  };
  std::vector<Span> spans(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[(i + 1) % n];
    spans[i] = {std::min(a.x, b.x), std::max(a.x, b.x), i};
  }
  std::sort(spans.begin(), spans.end(), [](const Span& l, const Span& r) {
    return l.lo < r.lo || (l.lo == r.lo && l.edge < r.edge);
  });

  std::vector<Span> active;
  for (const Span& s : spans) {
    std::erase_if(active, [&](const Span& a) { return a.hi < s.lo - kEpsilon; });
    const std::size_t i = s.edge;
    for (const Span& a : active) {
      const std::size_t j = a.edge;
      const bool adjacent = (i + 1) % n == j || (j + 1) % n == i;
      if (adjacent) continue;
      if (segments_touch(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) {
        return false;
      }
    }
    active.push_back(s);
  }
  return true;
}

AABB aabb_of(std::span<const Vec2> polygon) {
  if (polygon.empty()) return {};
  AABB box{polygon[0].x, polygon[0].x, polygon[0].y, polygon[0].y};
  for (const Vec2& p : polygon) {
    box.x_min = std::min(box.x_min, p.x);
    box.x_max = std::max(box.x_max, p.x);
    box.y_min = std::min(box.y_min, p.y);
    box.y_max = std::max(box.y_max, p.y);
  }
  return box;
}

double aabb_intersection_area(const AABB& a, const AABB& b) {
  const double ox = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double oy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return std::max(0.0, ox) * std::max(0.0, oy);
}

bool is_convex(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int o = orientation(polygon[i], polygon[(i + 1) % n], polygon[(i + 2) % n]);
    if (o == 0) continue;
    if (sign == 0) sign = o;
    else if (o != sign) return false;
  }
  return sign != 0;
}

Vec2 centroid(std::span<const Vec2> polygon) {
  const double area = signed_area(polygon);
  const std::size_t n = polygon.size();
  if (n == 0) return {};
  if (std::abs(area) < kDegenerateArea) {
    Vec2 mean;
    for (const Vec2& p : polygon) mean += p;
    return mean * (1.0 / static_cast<double>(n));
  }
  // Accumulate relative to the first vertex to limit cancellation.
  const Vec2 o = polygon[0];
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = polygon[i] - o;
    const Vec2 b = polygon[(i + 1) % n] - o;
    const double w = a.x * b.y - b.x * a.y;
    cx += (a.x + b.x) * w;
    cy += (a.y + b.y) * w;
  }
  return {o.x + cx / (6.0 * area), o.y + cy / (6.0 * area)};
}

double distance_to_boundary(std::span<const Vec2> polygon, Vec2 p) {
  double best = INFINITY;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    best = std::min(best, point_segment_distance(p, polygon[i], polygon[(i + 1) % n]));
  }
  return best;
}

bool contains(std::span<const Vec2> polygon, Vec2 p) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  if (distance_to_boundary(polygon, p) <= kEpsilon) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = polygon[i];
    const Vec2 b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Vec2 c0 = clip[e];
    const Vec2 c1 = clip[(e + 1) % m];
    const Vec2 edge = c1 - c0;
    auto side = [&](Vec2 p) { return cross(edge, p - c0); };

    std::vector<Vec2> input;
    input.swap(output);
    const std::size_t k = input.size();
    for (std::size_t i = 0; i < k; ++i) {
      const Vec2 cur = input[i];
      const Vec2 prev = input[(i + k - 1) % k];
      const double s_cur = side(cur);
      const double s_prev = side(prev);
      if (s_cur >= 0.0) {
        if (s_prev < 0.0) output.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
        output.push_back(cur);
      } else if (s_prev >= 0.0) {
        output.push_back(prev + (cur - prev) * (s_prev / (s_prev - s_cur)));
      }
    }
  }
  return output;
}

double polygon_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  if (aabb_intersection_area(aabb_of(a), aabb_of(b)) <= 0.0) return 0.0;

  const auto pa = ccw(a);
  const auto pb = ccw(b);
  double total = 0.0;
  if (is_convex(pa) && is_convex(pb)) {
    total = convex_clip_area(pa, pb);
  } else {
    // Triangles of a triangulation have disjoint interiors, so the pairwise
    // clipped areas sum to the area of the intersection.
    const auto ta = triangulate(pa);
    const auto tb = triangulate(pb);
    for (const Triangle& s : ta) {
      const std::array<Vec2, 3> tri_a{pa[s[0]], pa[s[1]], pa[s[2]]};
      const AABB box_a = aabb_of(tri_a);
      for (const Triangle& t : tb) {
        const std::array<Vec2, 3> tri_b{pb[t[0]], pb[t[1]], pb[t[2]]};
        if (aabb_intersection_area(box_a, aabb_of(tri_b)) <= 0.0) continue;
        total += convex_clip_area(tri_a, tri_b);
      }
    }
  }
  return total < kSliverArea ? 0.0 : total;
}

std::vector<Triangle> triangulate(std::span<const Vec2> polygon) {
  const int n = static_cast<int>(polygon.size());
  if (n < 3) throw Error(Errc::TriangulationFailure, "polygon has fewer than 3 vertices");

  std::vector<int> ring(n);
  std::iota(ring.begin(), ring.end(), 0);
  if (signed_area(polygon) < 0.0) std::reverse(ring.begin(), ring.end());

  std::vector<Triangle> out;
  out.reserve(n - 2);
  while (ring.size() > 3) {
    const std::size_t m = ring.size();
    bool clipped = false;
    for (std::size_t i = 0; i < m; ++i) {
      const int ip = ring[(i + m - 1) % m];
      const int ic = ring[i];
      const int in = ring[(i + 1) % m];
      const Vec2 a = polygon[ip];
      const Vec2 b = polygon[ic];
      const Vec2 c = polygon[in];
      if (orientation(a, b, c) <= 0) continue;

      bool blocked = false;
      for (std::size_t j = 0; j < m && !blocked; ++j) {
        const int iv = ring[j];
        if (iv == ip || iv == ic || iv == in) continue;
        blocked = in_closed_triangle(a, b, c, polygon[iv]);
      }
      if (blocked) continue;

      out.push_back({ip, ic, in});
      ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
      clipped = true;
      break;
    }
    if (!clipped) throw Error(Errc::TriangulationFailure, "no ear found; polygon is not simple");
  }
  if (orientation(polygon[ring[0]], polygon[ring[1]], polygon[ring[2]]) <= 0) {
    throw Error(Errc::TriangulationFailure, "final triangle is degenerate");
  }
  out.push_back({ring[0], ring[1], ring[2]});
  return out;
}

std::vector<EdgeFrame> edge_frames(std::span<const Vec2> polygon) {
  const std::size_t n = polygon.size();
  std::vector<EdgeFrame> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    EdgeFrame f;
    f.start = polygon[i];
    f.end = polygon[(i + 1) % n];
    const Vec2 d = f.end - f.start;
    f.length = length(d);
    if (f.length < kEpsilon) {
      throw Error(Errc::DegenerateEdge, "edge " + std::to_string(i) + " is shorter than 1e-9 m");
    }
    f.direction = d * (1.0 / f.length);
    f.outward_normal = {f.direction.y, -f.direction.x};
    frames.push_back(f);
  }
  return frames;
}

std::vector<Vec2> reversed(std::span<const Vec2> polygon) {
  return {polygon.rbegin(), polygon.rend()};
}

}  // namespace cityforge::geometry
