#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cityforge/vec.hpp"

namespace cityforge {

/// Per-face material tags; no textures.
enum class Material : std::uint8_t { Concrete, Glass, Wood, Metal, Greenery, Asphalt };

inline constexpr std::array<Material, 6> kAllMaterials{
    Material::Concrete, Material::Glass,    Material::Wood,
    Material::Metal,    Material::Greenery, Material::Asphalt,
};

std::string_view to_string(Material m);
std::optional<Material> material_from_string(std::string_view name);

struct Bounds3 {
  Vec3 min;
  Vec3 max;
};

/// Indexed triangle mesh in world meters, z up.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Material> face_material;

  std::size_t triangle_count() const { return triangles.size(); }
  bool empty() const { return triangles.empty(); }

  std::uint32_t add_vertex(Vec3 v);
  void add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, Material m);
  void append(const Mesh& other);

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

Bounds3 bounds(const Mesh& mesh);

/// Enclosed volume by the divergence theorem; meaningful for closed meshes.
double volume(const Mesh& mesh);

/// Every undirected edge is used by exactly two triangles, once in each
/// direction.
bool is_closed_manifold(const Mesh& mesh);

/// V - E + F over the indexed mesh.
long euler_characteristic(const Mesh& mesh);

/// Largest triangle area below which a face counts as degenerate.
inline constexpr double kDegenerateTriangleArea = 1e-12;
bool has_degenerate_triangles(const Mesh& mesh);

/// Splits every triangle into four through shared edge midpoints.
Mesh subdivide_midpoint(const Mesh& mesh);

/// Merges bit-identical vertex positions.
Mesh weld(const Mesh& mesh);

/// Closed prism over a CCW ring. `levels` are ascending z values; side walls
/// get one quad row per consecutive pair; caps are ear-clipped.
Mesh prism(std::span<const Vec2> ring, std::span<const double> levels, Material side,
           Material bottom, Material top);

}  // namespace cityforge
