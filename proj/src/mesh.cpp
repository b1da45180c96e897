#include "cityforge/mesh.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "cityforge/error.hpp"
#include "cityforge/geometry.hpp"

namespace cityforge {

std::string_view to_string(Material m) {
  switch (m) {
    case Material::Concrete: return "concrete";
    case Material::Glass: return "glass";
    case Material::Wood: return "wood";
    case Material::Metal: return "metal";
    case Material::Greenery: return "greenery";
    case Material::Asphalt: return "asphalt";
  }
  return "concrete";
}

std::optional<Material> material_from_string(std::string_view name) {
  for (Material m : kAllMaterials) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::uint32_t Mesh::add_vertex(Vec3 v) {
  vertices.push_back(v);
  return static_cast<std::uint32_t>(vertices.size() - 1);
}

void Mesh::add_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c, Material m) {
  triangles.push_back({a, b, c});
  face_material.push_back(m);
}

void Mesh::append(const Mesh& other) {
  const auto offset = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& t : other.triangles) triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  face_material.insert(face_material.end(), other.face_material.begin(), other.face_material.end());
}

Bounds3 bounds(const Mesh& mesh) {
  if (mesh.vertices.empty()) return {};
  Bounds3 b{mesh.vertices[0], mesh.vertices[0]};
  for (const Vec3& v : mesh.vertices) {
    b.min = {std::min(b.min.x, v.x), std::min(b.min.y, v.y), std::min(b.min.z, v.z)};
    b.max = {std::max(b.max.x, v.x), std::max(b.max.y, v.y), std::max(b.max.z, v.z)};
  }
  return b;
}

double volume(const Mesh& mesh) {
  double six_v = 0.0;
  for (const auto& t : mesh.triangles) {
    six_v += dot(mesh.vertices[t[0]], cross(mesh.vertices[t[1]], mesh.vertices[t[2]]));
  }
  return six_v / 6.0;
}

bool is_closed_manifold(const Mesh& mesh) {
  // Directed edge -> use count. A closed, consistently oriented 2-manifold
  // uses each directed edge once and its reverse once.
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const std::uint32_t a = t[k];
      const std::uint32_t b = t[(k + 1) % 3];
      if (a == b) return false;
      if (++directed[{a, b}] > 1) return false;
    }
  }
  for (const auto& [edge, count] : directed) {
    if (directed.find({edge.second, edge.first}) == directed.end()) return false;
  }
  return !mesh.triangles.empty();
}

long euler_characteristic(const Mesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  std::vector<bool> used(mesh.vertices.size(), false);
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      used[t[k]] = true;
      const auto a = std::min(t[k], t[(k + 1) % 3]);
      const auto b = std::max(t[k], t[(k + 1) % 3]);
      edges[{a, b}]++;
    }
  }
  const long v = std::count(used.begin(), used.end(), true);
  return v - static_cast<long>(edges.size()) + static_cast<long>(mesh.triangles.size());
}

bool has_degenerate_triangles(const Mesh& mesh) {
  for (const auto& t : mesh.triangles) {
    const Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    if (0.5 * length(n) < kDegenerateTriangleArea) return true;
  }
  return false;
}

Mesh subdivide_midpoint(const Mesh& mesh) {
  Mesh out;
  out.vertices = mesh.vertices;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
  auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
    const auto key = std::minmax(a, b);
    const auto it = midpoints.find({key.first, key.second});
    if (it != midpoints.end()) return it->second;
    const Vec3 m = (mesh.vertices[a] + mesh.vertices[b]) * 0.5;
    const std::uint32_t idx = out.add_vertex(m);
    midpoints.emplace(std::pair{key.first, key.second}, idx);
    return idx;
  };
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto [a, b, c] = mesh.triangles[i];
    const Material m = mesh.face_material[i];
    const std::uint32_t ab = midpoint(a, b);
    const std::uint32_t bc = midpoint(b, c);
    const std::uint32_t ca = midpoint(c, a);
    out.add_triangle(a, ab, ca, m);
    out.add_triangle(ab, b, bc, m);
    out.add_triangle(ca, bc, c, m);
    out.add_triangle(ab, bc, ca, m);
  }
  return out;
}

Mesh weld(const Mesh& mesh) {
  Mesh out;
  std::map<std::tuple<double, double, double>, std::uint32_t> index;
  std::vector<std::uint32_t> remap(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3 v = mesh.vertices[i];
    const auto [it, inserted] = index.try_emplace({v.x, v.y, v.z}, 0);
    if (inserted) it->second = out.add_vertex(v);
    remap[i] = it->second;
  }
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    out.add_triangle(remap[t[0]], remap[t[1]], remap[t[2]], mesh.face_material[i]);
  }
  return out;
}

Mesh prism(std::span<const Vec2> ring, std::span<const double> levels, Material side,
           Material bottom, Material top) {
  const auto n = static_cast<std::uint32_t>(ring.size());
  if (n < 3 || levels.size() < 2) throw Error(Errc::TriangulationFailure, "prism needs a ring and two levels");
  const auto caps = geometry::triangulate(ring);

  Mesh mesh;
  for (const double z : levels) {
    for (const Vec2& p : ring) mesh.add_vertex({p.x, p.y, z});
  }
  auto at = [n](std::size_t level, std::uint32_t i) {
    return static_cast<std::uint32_t>(level * n + (i % n));
  };
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto a = at(k, i), b = at(k, i + 1), c = at(k + 1, i + 1), d = at(k + 1, i);
      mesh.add_triangle(a, b, c, side);
      mesh.add_triangle(a, c, d, side);
    }
  }
  const std::size_t top_level = levels.size() - 1;
  for (const auto& t : caps) {
    mesh.add_triangle(at(0, t[0]), at(0, t[2]), at(0, t[1]), bottom);
    mesh.add_triangle(at(top_level, t[0]), at(top_level, t[1]), at(top_level, t[2]), top);
  }
  return mesh;
}

}  // namespace cityforge
