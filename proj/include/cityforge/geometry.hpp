#pragma once

#include <array>
#include <span>
#include <vector>

#include "cityforge/vec.hpp"

namespace cityforge::geometry {

/// Coincidence tolerance for lengths, in meters.
inline constexpr double kEpsilon = 1e-9;
/// Signed areas below this magnitude mark a polygon as degenerate.
inline constexpr double kDegenerateArea = 1e-9;
/// Clipped pieces smaller than this are discarded.
inline constexpr double kSliverArea = 1e-6;

struct AABB {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  friend bool operator==(const AABB&, const AABB&) = default;
};

struct EdgeFrame {
  Vec2 start;
  Vec2 end;
  double length = 0.0;
  Vec2 direction;
  Vec2 outward_normal;
};

using Triangle = std::array<int, 3>;

/// Shoelace area; positive for counter-clockwise rings.
double signed_area(std::span<const Vec2> polygon);

/// True iff no two edges meet except adjacent edges at their shared vertex.
bool is_simple(std::span<const Vec2> polygon);

AABB aabb_of(std::span<const Vec2> polygon);
double aabb_intersection_area(const AABB& a, const AABB& b);

bool is_convex(std::span<const Vec2> polygon);
Vec2 centroid(std::span<const Vec2> polygon);

/// Winding test; points on the boundary count as inside.
bool contains(std::span<const Vec2> polygon, Vec2 p);
double distance_to_boundary(std::span<const Vec2> polygon, Vec2 p);

/// Sutherland-Hodgman clip of `subject` against a convex CCW `clip` ring.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Area of the intersection of two simple polygons. Convex pairs are clipped
/// directly; otherwise both are ear-clipped and triangle pairs are clipped.
/// Results under kSliverArea resolve to 0.
double polygon_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b);

/// Ear-clipping triangulation of a simple polygon (either orientation). Every
/// input vertex is kept, so collinear boundary points never leave T-junctions.
/// Triangles are emitted counter-clockwise. Throws Errc::TriangulationFailure.
std::vector<Triangle> triangulate(std::span<const Vec2> polygon);

/// One frame per edge in vertex order for a CCW polygon; the outward normal is
/// the direction rotated by -90 degrees. Throws Errc::DegenerateEdge.
std::vector<EdgeFrame> edge_frames(std::span<const Vec2> polygon);

std::vector<Vec2> reversed(std::span<const Vec2> polygon);

}  // namespace cityforge::geometry
