#include <cmath>
#include <numbers>

#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/mesh.hpp"
#include "cityforge/metrics.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/files.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace cityforge;
using namespace cityforge::metrics;

namespace {

Mesh box(double w, double d, double h) {
  const std::vector<Vec2> ring{{0, 0}, {w, 0}, {w, d}, {0, d}};
  const std::vector<double> levels{0.0, h};
  return prism(ring, levels, Material::Concrete, Material::Concrete, Material::Concrete);
}

Mesh rotate_z(const Mesh& m, double angle) {
  Mesh out = m;
  const double c = std::cos(angle), s = std::sin(angle);
  for (auto& v : out.vertices) v = {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
  return out;
}

Mesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  for (const Vec3 v : {Vec3{-1, t, 0}, Vec3{1, t, 0}, Vec3{-1, -t, 0}, Vec3{1, -t, 0}, Vec3{0, -1, t}, Vec3{0, 1, t},
                       Vec3{0, -1, -t}, Vec3{0, 1, -t}, Vec3{t, 0, -1}, Vec3{t, 0, 1}, Vec3{-t, 0, -1}, Vec3{-t, 0, 1}}) {
    m.add_vertex(v);
  }
  const std::uint32_t f[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                                  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                                  {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (const auto& t3 : f) m.add_triangle(t3[0], t3[1], t3[2], Material::Concrete);
  return m;
}

BlockElement shell_element(Footprint fp, int floors) {
  BlockElement e;
  e.id = "s";
  e.type = "office";
  e.polygon = std::move(fp);
  e.floor_count = floors;
  return e;
}

}  // namespace

TEST_CASE("collision rate matches the raster oracle") {
  cftest::Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const BlockProgram p = cftest::random_layout(rng);
    CHECK(std::fabs(collision_rate(p) - cftest::raster_collision_rate(p)) < 0.01);
  }
  BlockProgram empty;
  CHECK_THROWS_AS(collision_rate(empty), Error);
}

TEST_CASE("collision rate of known layouts") {
  BlockProgram p;
  p.region = {{0, 0}, 10, 10};
  BlockElement a = shell_element(cftest::rect(0, 0, 4, 4), 1);
  a.id = "a";
  BlockElement b = shell_element(cftest::rect(2, 2, 6, 6), 1);
  b.id = "b";
  p.elements = {a, b};
  CHECK(collision_rate(p) == doctest::Approx(0.04));
  p.elements[1].polygon = cftest::rect(4, 0, 8, 4);  // shares an edge only
  CHECK(collision_rate(p) == 0.0);
}

TEST_CASE("format accuracy over a mixed corpus") {
  const std::string good = cftest::read_text(cftest::fixture("example_block.json"));
  std::vector<std::string> corpus(98, good);
  corpus.push_back(good.substr(0, good.size() / 2));
  corpus.push_back(cftest::read_text(cftest::fixture("bowtie_block.json")));
  const auto acc = format_accuracy(corpus, ProgramKind::Block);
  CHECK(acc.fraction == 0.98);
  REQUIRE(acc.verdicts.size() == 100);
  CHECK_FALSE(acc.verdicts[98].json_parsable);
  CHECK_FALSE(acc.verdicts[99].geometry_valid);
  CHECK_THROWS_AS(format_accuracy({}, ProgramKind::Block), Error);
}

TEST_CASE("ROS is 1 on axis-aligned extrusions") {
  CHECK(ros(box(10, 6, 3)) == doctest::Approx(1.0).epsilon(1e-12));
  cftest::Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fp = trial % 2 ? cftest::l_shape(rng, 0, 0, rng.uniform(5, 30), rng.uniform(5, 30))
                              : cftest::rect(0, 0, rng.uniform(2, 30), rng.uniform(2, 30));
    const Mesh shell = executor::extrude_footprint(shell_element(fp, rng.integer(1, 10)), 3.0);
    CHECK(std::fabs(ros(shell) - 1.0) <= 1e-6);
  }
}

TEST_CASE("ROS is invariant under rotation about the vertical axis") {
  // 10 x 10 box with one corner chamfered at 45 degrees.
  const std::vector<Vec2> ring{{0, 0}, {10, 0}, {10, 8}, {8, 10}, {0, 10}};
  const std::vector<double> levels{0.0, 6.0};
  const Mesh m = prism(ring, levels, Material::Concrete, Material::Concrete, Material::Concrete);
  const double aligned = 2 * (10 + 8 + 8 + 10);
  const double expected = aligned / (aligned + 2 * 2 * std::sqrt(2.0));
  CHECK(ros(m) == doctest::Approx(expected).epsilon(1e-9));
  cftest::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
    CHECK(std::fabs(ros(rotate_z(m, angle)) - ros(m)) <= 1e-6);
    CHECK(std::fabs(ros(rotate_z(box(7, 3, 2), angle)) - 1.0) <= 1e-6);
  }
}

TEST_CASE("ROS needs horizontal edges") {
  Mesh m;
  m.add_vertex({0, 0, 0});
  m.add_vertex({0, 0, 1});
  m.add_vertex({0, 0, 2});
  m.add_triangle(0, 1, 2, Material::Concrete);
  CHECK_THROWS_AS(ros(m), Error);
}

TEST_CASE("OTR of minimal and subdivided boxes") {
  const Mesh b = box(4, 3, 2);
  REQUIRE(b.triangle_count() == 12);
  CHECK(tessellation_demand(b) == 12);
  CHECK(otr(b) == 1.0);
  const Mesh s = subdivide_midpoint(b);
  CHECK(s.triangle_count() == 48);
  CHECK(tessellation_demand(s) == 12);
  CHECK(otr(s) == 4.0);
  CHECK(otr(subdivide_midpoint(s)) == 16.0);
}

TEST_CASE("OTR counts each curved facet as its own patch") {
  const Mesh ico = icosahedron();
  CHECK(otr(ico) == 1.0);
  // Subdivision adds coplanar pieces inside each facet.
  CHECK(otr(subdivide_midpoint(ico)) == 4.0);
}

TEST_CASE("executor shells are cheaper than their subdivided copies") {
  cftest::Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Mesh shell = executor::extrude_footprint(shell_element(cftest::random_footprint(rng, 0, 0, 25), rng.integer(1, 8)), 3.0);
    const double a = otr(shell);
    CHECK(a >= 1.0);
    CHECK(a < otr(subdivide_midpoint(shell)));
  }
}

TEST_CASE("single-storey prism over a convex ring is minimal") {
  cftest::Rng rng(22);
  const auto ring = cftest::star_polygon(rng, {0, 0}, 9.0, 9.0, 7);
  const std::vector<double> levels{0.0, 3.0};
  const Mesh m = prism(ring, levels, Material::Concrete, Material::Concrete, Material::Concrete);
  CHECK(otr(m) == doctest::Approx(1.0));
}

TEST_CASE("non-manifold meshes are rejected by OTR") {
  Mesh m;
  for (const Vec3 v : {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, -1, 0}, Vec3{0, 0, 1}}) m.add_vertex(v);
  m.add_triangle(0, 1, 2, Material::Concrete);
  m.add_triangle(1, 0, 3, Material::Concrete);
  m.add_triangle(0, 1, 4, Material::Concrete);
  CHECK_THROWS_AS(otr(m), Error);
}

TEST_CASE("scene meshes by scope") {
  const auto block = parse_block_program(cftest::read_text(cftest::fixture("example_block.json"))).program;
  const auto scene = executor::assemble_scene(block, {});
  const Mesh shells = scene_mesh(scene, EdgeScope::Shells);
  const Mesh full = scene_mesh(scene, EdgeScope::FullScene);
  CHECK(shells.triangle_count() == scene.buildings[0].shell.triangle_count() + scene.buildings[1].shell.triangle_count());
  CHECK(full.triangle_count() > shells.triangle_count());
  CHECK(ros(shells) == doctest::Approx(1.0));
}

TEST_CASE("quality report") {
  const std::string good = cftest::read_text(cftest::fixture("example_block.json"));
  std::vector<ReportInput> inputs;
  inputs.push_back({"b", good, executor::extrude_footprint(shell_element(cftest::rect(0, 0, 5, 5), 1), 3.0)});
  inputs.push_back({"a", std::string("{"), std::nullopt});
  const QualityReport r = build_report(inputs);
  REQUIRE(r.items.size() == 2);
  CHECK(r.items[0].id == "a");
  CHECK(r.format_accuracy == doctest::Approx(0.5));
  CHECK(r.collision_rate == doctest::Approx(0.0));
  CHECK(r.otr == doctest::Approx(1.0));
  CHECK(r.ros == doctest::Approx(1.0));

  const std::string csv = report_csv(r);
  CHECK(csv.rfind(kCsvHeader, 0) == 0);
  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["summary"]["format_accuracy"] == 0.5);
  CHECK(j["items"].size() == 2);

  cftest::TempDir dir;
  write_report(r, dir.path().string());
  CHECK(cftest::read_text(dir / "report.csv") == csv);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK_THROWS_AS(build_report({}), Error);
}
