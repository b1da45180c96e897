#include <algorithm>
#include <cmath>
#include <numbers>

#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/mesh.hpp"
#include "doctest.h"
#include "support/files.hpp"
#include "support/generators.hpp"

using namespace cityforge;
using namespace cityforge::executor;

namespace {

BlockElement building(const std::string& id, Footprint fp, int floors) {
  BlockElement e;
  e.id = id;
  e.type = "office";
  e.polygon = std::move(fp);
  e.floor_count = floors;
  return e;
}

geometry::EdgeFrame frame_of_length(double len) {
  const std::vector<Vec2> ring{{0, 0}, {len, 0}, {len, 10}, {0, 10}};
  return geometry::edge_frames(ring)[0];
}

std::size_t count_type(const std::vector<Placement>& ps, const std::string& type) {
  return static_cast<std::size_t>(std::count_if(ps.begin(), ps.end(), [&](const Placement& p) {
    return p.component.component_type == type;
  }));
}

}  // namespace

TEST_CASE("unit shell volume and topology") {
  const Mesh shell = extrude_footprint(building("a", cftest::rect(0, 0, 1, 1), 1), 3.0);
  CHECK(volume(shell) == doctest::Approx(3.0));
  CHECK(is_closed_manifold(shell));
  CHECK(euler_characteristic(shell) == 2);
  CHECK_FALSE(has_degenerate_triangles(shell));
}

TEST_CASE("L-shaped shell is a closed sphere-like surface") {
  cftest::Rng rng(1);
  const Footprint l = cftest::l_shape(rng, 0, 0, 20, 16);
  const Mesh shell = extrude_footprint(building("l", l, 4), 3.0);
  CHECK(is_closed_manifold(shell));
  CHECK(euler_characteristic(shell) == 2);
  CHECK(volume(shell) == doctest::Approx(l.area() * 12.0));
}

TEST_CASE("shell height is floors times floor height") {
  cftest::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int floors = rng.integer(1, 60);
    const double fh = rng.uniform(2.5, 4.5);
    const Mesh shell = extrude_footprint(building("b", cftest::random_footprint(rng, 0, 0, 25), floors), fh);
    const Bounds3 b = bounds(shell);
    CHECK(b.min.z == 0.0);
    CHECK(b.max.z == floors * fh);
    CHECK(is_closed_manifold(shell));
  }
}

TEST_CASE("greenspaces cannot be extruded") {
  BlockElement g;
  g.id = "g";
  g.type = "greenspace";
  g.polygon = cftest::rect(0, 0, 5, 5);
  CHECK_THROWS_AS(extrude_footprint(g, 3.0), Error);
}

TEST_CASE("default floor count applies when absent") {
  BlockElement e = building("a", cftest::rect(0, 0, 4, 4), 1);
  e.floor_count.reset();
  CHECK(bounds(extrude_footprint(e, 3.0, Material::Concrete, 5)).max.z == doctest::Approx(15.0));
}

TEST_CASE("a 22 m facade gets 8 window bays per storey") {
  const RealizedBuilding b = realize_building(
      BuildingProgram{{{"window", "rectangular, glass"}, {"door", "wooden"}}, std::nullopt}, ComponentTable::builtin());
  ExecutorConfig cfg;
  const auto edge = frame_of_length(22.0);
  const auto ps = layout_facade(edge, 2, 3.0, b, cfg, false);
  CHECK(count_type(ps, "window") == 8);
  CHECK(count_type(ps, "door") == 0);
  const auto tall = layout_facade(edge, 5, 3.0, b, cfg, true);
  CHECK(count_type(tall, "window") == 32);
  CHECK(count_type(tall, "door") == 1);
  CHECK(layout_facade(frame_of_length(2.0), 5, 3.0, b, cfg, true).empty());
}

TEST_CASE("window placements stay on the wall and inside their storey") {
  const RealizedBuilding b = realize_building(BuildingProgram{{{"window", "tall"}}, std::nullopt}, ComponentTable::builtin());
  ExecutorConfig cfg;
  const auto edge = frame_of_length(17.3);
  const double fh = 3.2;
  for (const auto& p : layout_facade(edge, 4, fh, b, cfg, false)) {
    const Vec3 c = p.transform.translation;
    CHECK(c.y == doctest::Approx(-cfg.protrusion));  // wall at y = 0, outward is -y
    CHECK(c.x >= cfg.edge_margin);
    CHECK(c.x <= 17.3 - cfg.edge_margin);
    const int storey = static_cast<int>(std::floor(c.z / fh));
    CHECK(storey >= 1);
    const double half = p.transform.scale.y / 2;
    CHECK(c.z - half >= storey * fh - 1e-9);
    CHECK(c.z + half <= (storey + 1) * fh + 1e-9);
    const Vec3 out = p.transform.outward();
    CHECK(out.x == doctest::Approx(0.0));
    CHECK(out.y == doctest::Approx(-1.0));
  }
}

TEST_CASE("placement transform") {
  PlacementTransform t;
  t.rotation = std::numbers::pi / 2;
  t.translation = {10, 0, 0};
  t.scale = {2, 3, 0.5};
  // Local x runs along the wall, local y up, local z outward.
  const Vec3 along = t.apply({1, 0, 0});
  CHECK(along.x == doctest::Approx(10.0));
  CHECK(along.y == doctest::Approx(2.0));
  const Vec3 up = t.apply({0, 1, 0});
  CHECK(up.z == doctest::Approx(3.0));
  const Vec3 out = t.outward();
  CHECK(out.x == doctest::Approx(1.0));
  CHECK(out.y == doctest::Approx(0.0));
}

TEST_CASE("component realization depends on the token set only") {
  const auto a = realize_component({"window", "arched, wooden, small"});
  const auto b = realize_component({"window", "small wooden ARCHED"});
  CHECK(a == b);
  CHECK(a.material == Material::Wood);
  CHECK(a.text("arch", "") == "rounded");
  const auto glass = realize_component({"window", "expansive, glass"});
  CHECK(glass.material == Material::Glass);
  CHECK(glass.number("width", 0) > a.number("width", 0));
}

TEST_CASE("component meshes are closed and inside the unit frame") {
  for (const auto* desc : {"arched, wooden", "rectangular, glass", "round window", "metal"}) {
    const Mesh m = component_mesh(realize_component({"window", desc}));
    CHECK(is_closed_manifold(m));
    CHECK(volume(m) > 0.0);
    const Bounds3 b = bounds(m);
    CHECK(b.min.x >= -0.5 - 1e-12);
    CHECK(b.max.x <= 0.5 + 1e-12);
    CHECK(b.min.z >= -1e-12);
    CHECK(b.max.z <= 1.0 + 1e-12);
  }
}

TEST_CASE("wall material keywords") {
  CHECK(wall_material("modern glass and steel") == Material::Glass);
  CHECK(wall_material("red brick") == Material::Concrete);
  CHECK(wall_material("timber cladding") == Material::Wood);
  CHECK(wall_material("") == Material::Concrete);
}

TEST_CASE("roofs") {
  const Footprint r = cftest::rect(0, 0, 20, 10);
  const auto gable = roof_mesh(r, 9.0, realize_component({"roof", "pitched, gable"}));
  CHECK(is_closed_manifold(gable));
  CHECK(bounds(gable).min.z == doctest::Approx(9.0));
  CHECK(bounds(gable).max.z > 9.0);
  const auto flat = roof_mesh(r, 9.0, realize_component({"roof", "flat"}));
  CHECK(is_closed_manifold(flat));
  CHECK(bounds(flat).min.z == doctest::Approx(9.0));

  // Gables need a rectangle; anything else falls back to a slab with a warning.
  cftest::Rng rng(4);
  std::vector<std::string> warnings;
  const auto fallback = roof_mesh(cftest::l_shape(rng, 0, 0, 10, 10), 3.0, realize_component({"roof", "gable"}), &warnings);
  CHECK(is_closed_manifold(fallback));
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("tree sampling is seeded and stays inside the inset polygon") {
  BlockElement g;
  g.id = "park";
  g.type = "greenspace";
  g.polygon = cftest::rect(0, 0, 30, 24);
  ExecutorConfig cfg;
  cfg.seed = 9;
  const auto a = sample_trees(g, cfg);
  CHECK(a == sample_trees(g, cfg));
  CHECK_FALSE(a.empty());
  for (const auto& t : a) {
    CHECK(t.kind == PropKind::Tree);
    CHECK(geometry::distance_to_boundary(g.polygon.vertices, {t.position.x, t.position.y}) >= cfg.tree_inset - 1e-9);
    CHECK(geometry::contains(g.polygon.vertices, {t.position.x, t.position.y}));
  }
  cfg.seed = 10;
  CHECK(sample_trees(g, cfg) != a);
}

TEST_CASE("scene assembly on the example block") {
  const auto block = parse_block_program(cftest::read_text(cftest::fixture("example_block.json"))).program;
  const auto m1 = parse_building_program(cftest::read_text(cftest::fixture("buildings/mixed_1.json"))).program;
  const ScenePackage scene = assemble_scene(block, {{"mixed_1", m1}});
  REQUIRE(scene.buildings.size() == 2);
  CHECK(scene.buildings[0].id == "mixed_1");
  CHECK(scene.buildings[0].height == doctest::Approx(36.0));
  CHECK(bounds(scene.buildings[0].shell).max.z == 36.0);
  CHECK_FALSE(scene.buildings[0].components.empty());
  // mixed_2 has no building program: bare shell plus a warning.
  CHECK(scene.buildings[1].components.empty());
  CHECK(std::any_of(scene.warnings.begin(), scene.warnings.end(),
                    [](const std::string& w) { return w.find("mixed_2") != std::string::npos; }));
  REQUIRE(scene.greenspaces.size() == 2);
  CHECK(scene.greenspaces[0].first == "park_1");
  CHECK_FALSE(scene.streets.empty());
  CHECK(std::any_of(scene.props.begin(), scene.props.end(), [](const Prop& p) { return p.kind == PropKind::Streetlight; }));
  CHECK(std::any_of(scene.props.begin(), scene.props.end(), [](const Prop& p) { return p.kind == PropKind::Tree; }));
  CHECK(scene.metadata.block_hash == program_hash(block));
  CHECK(scene.metadata.building_hashes.at("mixed_1") == program_hash(m1));
}

TEST_CASE("prop meshes stand on their position") {
  for (const auto kind : {PropKind::Tree, PropKind::Streetlight}) {
    const Mesh m = prop_mesh({kind, {5, 6, 0}});
    CHECK_FALSE(m.empty());
    CHECK(bounds(m).min.z == doctest::Approx(0.0));
  }
}

TEST_CASE("component table from JSON") {
  const auto table = ComponentTable::from_json(R"({
    "defaults": {"*": {"material": "concrete", "parameters": {"width": 1.0}}},
    "keywords": [{"type": "window", "keyword": "shiny", "material": "metal", "parameters": {"width": 2.0}}],
    "wall_materials": [{"keyword": "steel", "material": "metal"}]})");
  const auto c = realize_component({"window", "shiny"}, table);
  CHECK(c.material == Material::Metal);
  CHECK(c.number("width", 0) == 2.0);
  CHECK(wall_material("steel frame", table) == Material::Metal);
  CHECK_THROWS_AS(ComponentTable::from_json("{"), Error);
}
