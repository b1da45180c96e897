#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cityforge/geometry.hpp"
#include "cityforge/mesh.hpp"
#include "cityforge/program.hpp"

namespace cityforge::executor {

using ParamValue = std::variant<double, std::string>;
using Parameters = std::map<std::string, ParamValue>;

/// Keyword -> parameter table backing component realization. The shipped
/// table lives in data/components.json and is compiled in as the default.
struct ComponentTable {
  struct Defaults {
    Material material = Material::Concrete;
    Parameters parameters;
  };
  struct Rule {
    std::string component_type;  // "*" matches any type
    std::string keyword;
    std::optional<Material> material;
    Parameters parameters;
  };
  struct WallRule {
    std::string keyword;
    Material material;
  };

  std::map<std::string, Defaults> defaults;  // "*" is the fallback entry
  std::vector<Rule> rules;
  std::vector<WallRule> wall_materials;

  static ComponentTable from_json(std::string_view text);
  static ComponentTable load(const std::string& path);
  static const ComponentTable& builtin();
};

struct ParametricComponent {
  std::string component_type;
  Parameters parameters;
  Material material = Material::Concrete;

  double number(const std::string& key, double fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;

  friend bool operator==(const ParametricComponent&, const ParametricComponent&) = default;
};

/// Rotation about the vertical axis, then translation; `scale` applies in the
/// component's local frame (x along the wall, y up, z outward).
struct PlacementTransform {
  double rotation = 0.0;
  Vec3 translation;
  Vec3 scale{1.0, 1.0, 1.0};

  Vec3 apply(Vec3 local) const;
  /// World direction of the local +z axis.
  Vec3 outward() const;
};

struct Placement {
  ParametricComponent component;
  PlacementTransform transform;
};

struct ExecutorConfig {
  double floor_height = 3.0;
  double bay_width = 2.5;
  double edge_margin = 1.0;
  double protrusion = 0.05;
  double street_width = 6.0;
  double streetlight_spacing = 20.0;
  double tree_spacing = 6.0;
  double tree_inset = 1.0;
  double tree_jitter = 0.75;
  int default_floor_count = 1;
  std::uint64_t seed = 0;
  const ComponentTable* components = nullptr;  // null -> builtin table

  const ComponentTable& table() const { return components ? *components : ComponentTable::builtin(); }
};

/// Keyword-driven mapping from a description to parameters. Depends only on
/// the set of description tokens, never their order.
ParametricComponent realize_component(const BuildingComponent& component,
                                      const ComponentTable& table = ComponentTable::builtin());

/// Wall material for a facade string; concrete when nothing matches.
Material wall_material(std::string_view facade, const ComponentTable& table = ComponentTable::builtin());

/// Closed local-space mesh inside [-0.5, 0.5] x [-0.5, 0.5] x [0, 1]; placement
/// scaling turns it into the final size.
Mesh component_mesh(const ParametricComponent& component);

/// Building shell: prism of height floors * floor_height whose walls are split
/// at every floor line.
Mesh extrude_footprint(const BlockElement& element, double floor_height,
                       Material wall = Material::Concrete, int default_floor_count = 1);

struct RealizedBuilding {
  std::optional<ParametricComponent> window;
  std::optional<ParametricComponent> door;
  std::optional<ParametricComponent> roof;
  std::vector<ParametricComponent> others;
};

RealizedBuilding realize_building(const BuildingProgram& program, const ComponentTable& table);

/// Window grid (one row per storey above the ground storey) and, when
/// `door_edge` is set, one centered ground-floor door. Edges shorter than a
/// bay yield no placements.
std::vector<Placement> layout_facade(const geometry::EdgeFrame& edge, int floors, double floor_height,
                                     const RealizedBuilding& building, const ExecutorConfig& config,
                                     bool door_edge);

/// Roof mesh sitting on top of the shell: a slab, or a gable on rectangles.
Mesh roof_mesh(const Footprint& footprint, double base_height, const ParametricComponent& roof,
               std::vector<std::string>* warnings = nullptr);

enum class PropKind { Tree, Streetlight };
std::string_view to_string(PropKind kind);

struct Prop {
  PropKind kind;
  Vec3 position;

  friend bool operator==(const Prop&, const Prop&) = default;
};

struct BuildingModel {
  std::string id;
  Mesh shell;
  Mesh components;
  int floors = 1;
  double height = 0.0;
};

struct SceneMetadata {
  std::uint64_t block_hash = 0;
  std::map<std::string, std::uint64_t> building_hashes;
  std::map<std::string, double> floor_heights;
  double floor_height = 3.0;
  std::uint64_t seed = 0;
};

struct ScenePackage {
  std::vector<BuildingModel> buildings;
  std::vector<std::pair<std::string, Mesh>> greenspaces;
  Mesh streets;
  std::vector<Prop> props;
  SceneMetadata metadata;
  std::vector<std::string> warnings;
  geometry::AABB region;
};

/// Geometry for one prop, standing on its position.
Mesh prop_mesh(const Prop& prop);

/// Executes a block program and optional per-building programs. Output order
/// follows the element order of the block program.
ScenePackage assemble_scene(const BlockProgram& block,
                            const std::map<std::string, BuildingProgram>& buildings,
                            const ExecutorConfig& config = {});

std::vector<Prop> sample_trees(const BlockElement& greenspace, const ExecutorConfig& config);

}  // namespace cityforge::executor
