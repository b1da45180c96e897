#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cityforge/executor.hpp"
#include "cityforge/mesh.hpp"

namespace cityforge {

enum class SceneFormat { Obj, Glb };

std::optional<SceneFormat> scene_format_from_string(std::string_view name);

/// glTF 2.0 binary. Nodes: one per element named by its id (buildings carry a
/// "<id>.components" child), then "streets" and "props". Y-up.
std::vector<std::uint8_t> glb_bytes(const executor::ScenePackage& scene);

struct ObjText {
  std::string obj;
  std::string mtl;
};

ObjText obj_text(const executor::ScenePackage& scene, const std::string& mtl_filename);

/// Writes `path`; OBJ also writes the .mtl next to it.
void export_scene(const executor::ScenePackage& scene, SceneFormat format, const std::filesystem::path& path);

struct ImportedNode {
  std::string name;
  Mesh mesh;  // back in the z-up world frame
};

struct ImportedScene {
  std::vector<ImportedNode> nodes;

  std::size_t triangle_count() const;
  const ImportedNode* find(std::string_view name) const;
};

ImportedScene import_glb(std::span<const std::uint8_t> bytes);
ImportedScene import_obj(std::string_view text);
ImportedScene import_scene(const std::filesystem::path& path);

/// Every triangle the exporters emit, props included.
std::size_t scene_triangle_count(const executor::ScenePackage& scene);

}  // namespace cityforge
