#include "cityforge/executor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "cityforge/data.hpp"
#include "json.hpp"

namespace cityforge::executor {
namespace {

using Json = nlohmann::ordered_json;

Material parse_material(const Json& j, const std::string& where) {
  if (!j.is_string()) throw Error(Errc::BadConfig, where + ": material must be a string");
  const auto m = material_from_string(j.get<std::string>());
  if (!m) throw Error(Errc::BadConfig, where + ": unknown material '" + j.get<std::string>() + "'");
  return *m;
}

Parameters parse_parameters(const Json& j, const std::string& where) {
  Parameters params;
  if (j.is_null()) return params;
  if (!j.is_object()) throw Error(Errc::BadConfig, where + ": parameters must be an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_number()) {
      params[key] = value.get<double>();
    } else if (value.is_string()) {
      params[key] = value.get<std::string>();
    } else {
      throw Error(Errc::BadConfig, where + ": parameter '" + key + "' must be a number or string");
    }
  }
  return params;
}

std::set<std::string> description_tokens(std::string_view text) {
  std::set<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    tokens.insert(cur);
    if (cur.find('-') != std::string::npos) {
      std::stringstream parts(cur);
      std::string part;
      while (std::getline(parts, part, '-')) {
        if (!part.empty()) tokens.insert(part);
      }
    }
    cur.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Mesh box(Vec3 center_bottom, double sx, double sy, double sz, Material m) {
  const std::array<Vec2, 4> ring{{
      {center_bottom.x - sx / 2, center_bottom.y - sy / 2},
      {center_bottom.x + sx / 2, center_bottom.y - sy / 2},
      {center_bottom.x + sx / 2, center_bottom.y + sy / 2},
      {center_bottom.x - sx / 2, center_bottom.y + sy / 2},
  }};
  const std::array<double, 2> levels{center_bottom.z, center_bottom.z + sz};
  return prism(ring, levels, m, m, m);
}

Mesh flat_polygon(std::span<const Vec2> ring, double z, Material m) {
  Mesh mesh;
  for (const Vec2& p : ring) mesh.add_vertex({p.x, p.y, z});
  for (const auto& t : geometry::triangulate(ring)) {
    mesh.add_triangle(static_cast<std::uint32_t>(t[0]), static_cast<std::uint32_t>(t[1]),
                      static_cast<std::uint32_t>(t[2]), m);
  }
  return mesh;
}

bool is_rectangle(const std::vector<Vec2>& v) {
  if (v.size() != 4) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 a = v[(i + 1) % 4] - v[i];
    const Vec2 b = v[(i + 2) % 4] - v[(i + 1) % 4];
    if (std::abs(dot(a, b)) > 1e-6 * length(a) * length(b)) return false;
  }
  return true;
}

Mesh gable_roof(std::vector<Vec2> ring, double base, double pitch, Material m) {
  // Make ring[0] -> ring[1] a long edge so the ridge runs along it.
  if (length(ring[1] - ring[0]) < length(ring[2] - ring[1])) {
    std::rotate(ring.begin(), ring.begin() + 1, ring.end());
  }
  const double half_span = 0.5 * length(ring[2] - ring[1]);
  const double rise = pitch * half_span;
  Mesh mesh;
  std::array<std::uint32_t, 4> p{};
  for (int i = 0; i < 4; ++i) p[i] = mesh.add_vertex({ring[i].x, ring[i].y, base});
  const Vec2 ma = (ring[3] + ring[0]) * 0.5;
  const Vec2 mb = (ring[1] + ring[2]) * 0.5;
  const std::uint32_t ra = mesh.add_vertex({ma.x, ma.y, base + rise});
  const std::uint32_t rb = mesh.add_vertex({mb.x, mb.y, base + rise});
  mesh.add_triangle(p[0], p[3], p[2], m);
  mesh.add_triangle(p[0], p[2], p[1], m);
  mesh.add_triangle(p[0], p[1], rb, m);
  mesh.add_triangle(p[0], rb, ra, m);
  mesh.add_triangle(p[2], p[3], ra, m);
  mesh.add_triangle(p[2], ra, rb, m);
  mesh.add_triangle(p[1], p[2], rb, m);
  mesh.add_triangle(p[3], p[0], ra, m);
  return mesh;
}

Mesh transformed(const Mesh& local, const PlacementTransform& xf) {
  Mesh out = local;
  for (Vec3& v : out.vertices) v = xf.apply(v);
  return out;
}

[[noreturn]] void rethrow_for(const std::string& id, const Error& e) {
  throw Error(e.code(), "element '" + id + "': " + e.what(), id);
}

}  // namespace

ComponentTable ComponentTable::from_json(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& ex) {
    throw Error(Errc::BadConfig, std::string("component table is not valid JSON: ") + ex.what());
  }
  ComponentTable table;
  if (root.contains("defaults")) {
    for (const auto& [type, entry] : root["defaults"].items()) {
      Defaults d;
      if (entry.contains("material")) d.material = parse_material(entry["material"], "defaults." + type);
      if (entry.contains("parameters")) d.parameters = parse_parameters(entry["parameters"], "defaults." + type);
      table.defaults[type] = std::move(d);
    }
  }
  if (root.contains("keywords")) {
    for (const auto& rule : root["keywords"]) {
      Rule r;
      r.component_type = rule.value("type", std::string("*"));
      r.keyword = rule.value("keyword", std::string());
      if (r.keyword.empty()) throw Error(Errc::BadConfig, "component rule without keyword");
      if (rule.contains("material")) r.material = parse_material(rule["material"], "keyword " + r.keyword);
      if (rule.contains("parameters")) r.parameters = parse_parameters(rule["parameters"], "keyword " + r.keyword);
      table.rules.push_back(std::move(r));
    }
  }
  if (root.contains("wall_materials")) {
    for (const auto& rule : root["wall_materials"]) {
      table.wall_materials.push_back(
          {rule.value("keyword", std::string()), parse_material(rule["material"], "wall_materials")});
    }
  }
  return table;
}

ComponentTable ComponentTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read component table " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const ComponentTable& ComponentTable::builtin() {
  static const ComponentTable table = from_json(data::components_json());
  return table;
}

double ParametricComponent::number(const std::string& key, double fallback) const {
  const auto it = parameters.find(key);
  if (it == parameters.end()) return fallback;
  if (const double* d = std::get_if<double>(&it->second)) return *d;
  return fallback;
}

std::string ParametricComponent::text(const std::string& key, const std::string& fallback) const {
  const auto it = parameters.find(key);
  if (it == parameters.end()) return fallback;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  return fallback;
}

Vec3 PlacementTransform::apply(Vec3 local) const {
  // Local frame (x along wall, y up, z outward) -> world frame with z up.
  const double x = local.x * scale.x;
  const double up = local.y * scale.y;
  const double out = local.z * scale.z;
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  return {translation.x + x * c + out * s, translation.y + x * s - out * c, translation.z + up};
}

Vec3 PlacementTransform::outward() const { return {std::sin(rotation), -std::cos(rotation), 0.0}; }

ParametricComponent realize_component(const BuildingComponent& component, const ComponentTable& table) {
  ParametricComponent pc;
  pc.component_type = canonical_component_type(component.component_type);
  auto def = table.defaults.find(pc.component_type);
  if (def == table.defaults.end()) def = table.defaults.find("*");
  if (def != table.defaults.end()) {
    pc.material = def->second.material;
    pc.parameters = def->second.parameters;
  }
  const auto tokens = description_tokens(component.description);
  for (const auto& rule : table.rules) {
    if (rule.component_type != "*" && rule.component_type != pc.component_type) continue;
    if (!tokens.contains(rule.keyword)) continue;
    if (rule.material) pc.material = *rule.material;
    for (const auto& [k, v] : rule.parameters) pc.parameters[k] = v;
  }
  return pc;
}

Material wall_material(std::string_view facade, const ComponentTable& table) {
  const auto tokens = description_tokens(facade);
  for (const auto& rule : table.wall_materials) {
    if (tokens.contains(rule.keyword)) return rule.material;
  }
  return Material::Concrete;
}

Mesh component_mesh(const ParametricComponent& component) {
  std::vector<Vec2> profile;
  if (component.text("arch", "flat") == "rounded") {
    profile = {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.0}};
    constexpr int kSegments = 8;
    for (int i = 1; i < kSegments; ++i) {
      const double a = std::numbers::pi * i / kSegments;
      profile.push_back({0.5 * std::cos(a), 0.5 * std::sin(a)});
    }
    profile.push_back({-0.5, 0.0});
  } else {
    profile = {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}};
  }
  const std::array<double, 2> levels{0.0, 1.0};
  return prism(profile, levels, component.material, component.material, component.material);
}

Mesh extrude_footprint(const BlockElement& element, double floor_height, Material wall,
                       int default_floor_count) {
  if (!element.is_building()) {
    throw Error(Errc::NotABuilding, "element '" + element.id + "' is not a building", element.id);
  }
  if (!(floor_height > 0.0)) throw Error(Errc::InvalidArgument, "floor height must be positive");
  const int floors = element.floor_count.value_or(default_floor_count);
  if (floors < 1) throw Error(Errc::BadFloorCount, "floor_count must be >= 1", element.id);
  if (auto issue = polygon_issue(element.polygon, element.id)) {
    throw Error(Errc::TriangulationFailure, "footprint is not a simple CCW polygon: " + issue->message,
                element.id);
  }
  std::vector<double> levels(static_cast<std::size_t>(floors) + 1);
  for (int k = 0; k <= floors; ++k) levels[k] = static_cast<double>(k) * floor_height;
  return prism(element.polygon.vertices, levels, wall, Material::Concrete, Material::Concrete);
}

RealizedBuilding realize_building(const BuildingProgram& program, const ComponentTable& table) {
  RealizedBuilding rb;
  for (const auto& c : program.components) {
    ParametricComponent pc = realize_component(c, table);
    if (pc.component_type == "window") rb.window = std::move(pc);
    else if (pc.component_type == "door") rb.door = std::move(pc);
    else if (pc.component_type == "roof") rb.roof = std::move(pc);
    else rb.others.push_back(std::move(pc));
  }
  return rb;
}

std::vector<Placement> layout_facade(const geometry::EdgeFrame& edge, int floors, double floor_height,
                                     const RealizedBuilding& building, const ExecutorConfig& config,
                                     bool door_edge) {
  std::vector<Placement> out;
  if (edge.length < config.bay_width) return out;
  const double usable = edge.length - 2.0 * config.edge_margin;
  if (usable <= 0.0) return out;
  const double rotation = std::atan2(edge.direction.y, edge.direction.x);
  auto place = [&](const ParametricComponent& c, double along, double center_z, Vec3 size) {
    const Vec2 base = edge.start + edge.direction * along + edge.outward_normal * config.protrusion;
    out.push_back({c, PlacementTransform{rotation, {base.x, base.y, center_z}, size}});
  };

  const int bays = static_cast<int>(std::floor(usable / config.bay_width + 1e-9));
  if (building.window && bays > 0) {
    const auto& w = *building.window;
    const Vec3 size{std::min(w.number("width", 1.4), 0.8 * config.bay_width),
                    std::min(w.number("height", 1.6), 0.6 * floor_height), w.number("depth", 0.12)};
    const double first = config.edge_margin + 0.5 * (usable - bays * config.bay_width) + 0.5 * config.bay_width;
    for (int k = 1; k < floors; ++k) {
      for (int i = 0; i < bays; ++i) {
        place(w, first + i * config.bay_width, (k + 0.5) * floor_height, size);
      }
    }
  }
  if (door_edge && building.door) {
    const auto& d = *building.door;
    const double width = d.number("width", 1.2);
    if (width + 2.0 * config.edge_margin <= edge.length) {
      const double height = std::min(d.number("height", 2.2), 0.85 * floor_height);
      place(d, 0.5 * edge.length, 0.5 * height, {width, height, d.number("depth", 0.1)});
    }
  }
  return out;
}

Mesh roof_mesh(const Footprint& footprint, double base_height, const ParametricComponent& roof,
               std::vector<std::string>* warnings) {
  const std::string form = roof.text("form", "flat");
  if (form == "gable") {
    if (is_rectangle(footprint.vertices)) {
      return gable_roof(footprint.vertices, base_height, roof.number("pitch", 0.5), roof.material);
    }
    if (warnings) warnings->push_back("gable roof needs a rectangular footprint; using a flat slab");
  }
  const std::array<double, 2> levels{base_height, base_height + roof.number("thickness", 0.3)};
  return prism(footprint.vertices, levels, roof.material, roof.material, roof.material);
}

std::string_view to_string(PropKind kind) { return kind == PropKind::Tree ? "tree" : "streetlight"; }

Mesh prop_mesh(const Prop& prop) {
  const Vec3 p = prop.position;
  Mesh mesh;
  if (prop.kind == PropKind::Tree) {
    mesh.append(box(p, 0.3, 0.3, 2.5, Material::Wood));
    mesh.append(box({p.x, p.y, p.z + 2.5}, 2.4, 2.4, 2.5, Material::Greenery));
  } else {
    mesh.append(box(p, 0.15, 0.15, 5.0, Material::Metal));
    mesh.append(box({p.x, p.y, p.z + 5.0}, 0.6, 0.6, 0.2, Material::Metal));
  }
  return mesh;
}

std::vector<Prop> sample_trees(const BlockElement& greenspace, const ExecutorConfig& config) {
  std::vector<Prop> trees;
  const auto& ring = greenspace.polygon.vertices;
  const auto box = geometry::aabb_of(ring);
  const double sp = config.tree_spacing;
  if (!(sp > 0.0)) return trees;
  std::mt19937_64 rng(config.seed ^ fnv1a(greenspace.id));
  const int nx = static_cast<int>(std::floor(box.width() / sp)) + 1;
  const int ny = static_cast<int>(std::floor(box.height() / sp)) + 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double jx = (2.0 * unit_draw(rng) - 1.0) * config.tree_jitter;
      const double jy = (2.0 * unit_draw(rng) - 1.0) * config.tree_jitter;
      const Vec2 p{box.x_min + 0.5 * sp + i * sp + jx, box.y_min + 0.5 * sp + j * sp + jy};
      if (!geometry::contains(ring, p)) continue;
      if (geometry::distance_to_boundary(ring, p) < config.tree_inset) continue;
      trees.push_back({PropKind::Tree, {p.x, p.y, 0.0}});
    }
  }
  return trees;
}

ScenePackage assemble_scene(const BlockProgram& block, const std::map<std::string, BuildingProgram>& buildings,
                            const ExecutorConfig& config) {
  ScenePackage scene;
  scene.region = block.region.box();
  scene.metadata.block_hash = program_hash(block);
  scene.metadata.floor_height = config.floor_height;
  scene.metadata.seed = config.seed;
  const ComponentTable& table = config.table();

  for (const BlockElement& e : block.elements) {
    if (!e.is_building()) {
      try {
        scene.greenspaces.emplace_back(e.id, flat_polygon(e.polygon.vertices, 0.0, Material::Greenery));
      } catch (const Error& err) {
        rethrow_for(e.id, err);
      }
      auto trees = sample_trees(e, config);
      scene.props.insert(scene.props.end(), trees.begin(), trees.end());
      continue;
    }

    BuildingModel model;
    model.id = e.id;
    model.floors = e.floor_count.value_or(config.default_floor_count);
    if (!e.floor_count) {
      scene.warnings.push_back("element '" + e.id + "' has no floor_count; using " +
                               std::to_string(config.default_floor_count));
    }
    model.height = static_cast<double>(model.floors) * config.floor_height;
    scene.metadata.floor_heights[e.id] = model.height;
    const Material wall = e.facade ? wall_material(*e.facade, table) : Material::Concrete;
    try {
      model.shell = extrude_footprint(e, config.floor_height, wall, config.default_floor_count);
      const auto program = buildings.find(e.id);
      if (program == buildings.end()) {
        scene.warnings.push_back("no building program for '" + e.id + "'; bare shell");
      } else {
        scene.metadata.building_hashes[e.id] = program_hash(program->second);
        const RealizedBuilding realized = realize_building(program->second, table);
        const auto frames = geometry::edge_frames(e.polygon.vertices);
        std::size_t longest = 0;
        for (std::size_t i = 1; i < frames.size(); ++i) {
          if (frames[i].length > frames[longest].length) longest = i;
        }
        for (std::size_t i = 0; i < frames.size(); ++i) {
          for (const Placement& p : layout_facade(frames[i], model.floors, config.floor_height, realized,
                                                  config, i == longest)) {
            model.components.append(transformed(component_mesh(p.component), p.transform));
          }
        }
        if (realized.roof) {
          std::vector<std::string> notes;
          model.components.append(roof_mesh(e.polygon, model.height, *realized.roof, &notes));
          for (auto& n : notes) scene.warnings.push_back("element '" + e.id + "': " + n);
        }
        for (const auto& other : realized.others) {
          scene.warnings.push_back("element '" + e.id + "': component type '" + other.component_type +
                                   "' has no placement rule; skipped");
        }
      }
    } catch (const Error& err) {
      rethrow_for(e.id, err);
    }
    scene.buildings.push_back(std::move(model));
  }

  // Perimeter street ring around the block region.
  const auto r = scene.region;
  const double w = config.street_width;
  const std::array<geometry::AABB, 4> strips{{
      {r.x_min - w, r.x_max + w, r.y_min - w, r.y_min},
      {r.x_min - w, r.x_max + w, r.y_max, r.y_max + w},
      {r.x_min - w, r.x_min, r.y_min, r.y_max},
      {r.x_max, r.x_max + w, r.y_min, r.y_max},
  }};
  for (const auto& s : strips) {
    const std::array<Vec2, 4> quad{{{s.x_min, s.y_min}, {s.x_max, s.y_min}, {s.x_max, s.y_max}, {s.x_min, s.y_max}}};
    scene.streets.append(flat_polygon(quad, 0.0, Material::Asphalt));
  }

  if (config.streetlight_spacing > 0.0) {
    const double half = 0.5 * w;
    const std::array<Vec2, 4> corners{{{r.x_min - half, r.y_min - half},
                                       {r.x_max + half, r.y_min - half},
                                       {r.x_max + half, r.y_max + half},
                                       {r.x_min - half, r.y_max + half}}};
    double carry = 0.0;
    for (int side = 0; side < 4; ++side) {
      const Vec2 a = corners[side];
      const Vec2 b = corners[(side + 1) % 4];
      const double len = length(b - a);
      for (double d = carry; d < len; d += config.streetlight_spacing) {
        const Vec2 p = a + (b - a) * (d / len);
        scene.props.push_back({PropKind::Streetlight, {p.x, p.y, 0.0}});
        carry = d + config.streetlight_spacing - len;
      }
    }
  }
  return scene;
}

}  // namespace cityforge::executor
