#pragma once

// Random programs, layouts and edit commands for property tests. Everything
// is driven by an explicit seed so failures reproduce.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cityforge/edit.hpp"
#include "cityforge/program.hpp"

namespace cftest {

using cityforge::BlockElement;
using cityforge::BlockProgram;
using cityforge::BuildingComponent;
using cityforge::BuildingProgram;
using cityforge::Footprint;
using cityforge::Region;
using cityforge::Vec2;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(engine_); }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(integer(0, static_cast<int>(items.size()) - 1))];
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline double q(double v) { return cityforge::quantize(v); }

inline Footprint rect(double x0, double y0, double x1, double y1) {
  return Footprint{{{q(x0), q(y0)}, {q(x1), q(y0)}, {q(x1), q(y1)}, {q(x0), q(y1)}}};
}

/// Star-shaped ring around `c`: sorted angles with jittered radii. Always
/// simple and counter-clockwise.
inline std::vector<Vec2> star_polygon(Rng& rng, Vec2 c, double r_min, double r_max, int n) {
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) {
    angles.push_back((i + rng.uniform(0.1, 0.9)) * 2.0 * std::numbers::pi / n);
  }
  std::vector<Vec2> ring;
  for (const double a : angles) {
    const double r = rng.uniform(r_min, r_max);
    ring.push_back({q(c.x + r * std::cos(a)), q(c.y + r * std::sin(a))});
  }
  return ring;
}

/// Axis-aligned L shape inside [x0, x0 + w] x [y0, y0 + h].
inline Footprint l_shape(Rng& rng, double x0, double y0, double w, double h) {
  const double cx = x0 + w * rng.uniform(0.35, 0.7);
  const double cy = y0 + h * rng.uniform(0.35, 0.7);
  return Footprint{{{q(x0), q(y0)},
                    {q(x0 + w), q(y0)},
                    {q(x0 + w), q(cy)},
                    {q(cx), q(cy)},
                    {q(cx), q(y0 + h)},
                    {q(x0), q(y0 + h)}}};
}

/// Rectangle rotated by `angle` about its center.
inline Footprint rotated_rect(Vec2 c, double w, double h, double angle) {
  const double cs = std::cos(angle), sn = std::sin(angle);
  Footprint fp;
  for (const Vec2 d : {Vec2{-w / 2, -h / 2}, Vec2{w / 2, -h / 2}, Vec2{w / 2, h / 2}, Vec2{-w / 2, h / 2}}) {
    fp.vertices.push_back({q(c.x + cs * d.x - sn * d.y), q(c.y + sn * d.x + cs * d.y)});
  }
  return fp;
}

/// Some footprint fully inside the square [x0, x0 + size]^2.
inline Footprint random_footprint(Rng& rng, double x0, double y0, double size) {
  switch (rng.integer(0, 3)) {
    case 0: {
      const double w = rng.uniform(0.3, 1.0) * size, h = rng.uniform(0.3, 1.0) * size;
      const double ox = x0 + rng.uniform(0.0, size - w), oy = y0 + rng.uniform(0.0, size - h);
      return rect(ox, oy, ox + w, oy + h);
    }
    case 1:
      return l_shape(rng, x0, y0, size * rng.uniform(0.6, 1.0), size * rng.uniform(0.6, 1.0));
    case 2: {
      const double s = size * rng.uniform(0.3, 0.65);
      return rotated_rect({x0 + size / 2, y0 + size / 2}, s, s * rng.uniform(0.5, 1.0), rng.uniform(0.0, 3.0));
    }
    default:
      return Footprint{star_polygon(rng, {x0 + size / 2, y0 + size / 2}, size * 0.2, size * 0.48, rng.integer(3, 9))};
  }
}

inline const std::vector<std::string>& building_types() {
  static const std::vector<std::string> types{"residential", "commercial", "office", "school",
                                              "library", "mixed-use building"};
  return types;
}

inline const std::vector<std::string>& facades() {
  static const std::vector<std::string> f{"modern glass and steel", "red brick with white trim",
                                          "concrete with greenery on the upper floors",
                                          "timber cladding, warm tones", "white stucco"};
  return f;
}

struct LayoutOptions {
  int min_elements = 1;
  int max_elements = 8;
  double region = 100.0;
  /// Chance that an element is dropped near an existing one so pairs overlap.
  double overlap_bias = 0.5;
};

/// Random block program in a fixed square region. Elements may overlap.
inline BlockProgram random_layout(Rng& rng, const LayoutOptions& opt = {}) {
  BlockProgram p;
  p.region = Region{{0.0, 0.0}, opt.region, opt.region};
  const int n = rng.integer(opt.min_elements, opt.max_elements);
  std::vector<Vec2> anchors;
  for (int i = 0; i < n; ++i) {
    const double size = rng.uniform(8.0, 30.0);
    Vec2 at{rng.uniform(0.0, opt.region - size), rng.uniform(0.0, opt.region - size)};
    if (!anchors.empty() && rng.chance(opt.overlap_bias)) {
      const Vec2 near = rng.pick(anchors);
      at = {std::clamp(near.x + rng.uniform(-10.0, 10.0), 0.0, opt.region - size),
            std::clamp(near.y + rng.uniform(-10.0, 10.0), 0.0, opt.region - size)};
    }
    anchors.push_back(at);
    BlockElement e;
    e.id = "e" + std::to_string(i);
    e.polygon = random_footprint(rng, at.x, at.y, size);
    if (rng.chance(0.25)) {
      e.type = "greenspace";
    } else {
      e.type = rng.pick(building_types());
      e.floor_count = rng.integer(1, 20);
      if (rng.chance(0.7)) e.facade = rng.pick(facades());
    }
    p.elements.push_back(std::move(e));
  }
  return p;
}

/// Non-overlapping layout on a grid of cells; coverage is roughly
/// controlled by `fill` (fraction of each cell's side used).
inline BlockProgram grid_layout(Rng& rng, int cells_per_side, double fill, double region = 100.0) {
  BlockProgram p;
  p.region = Region{{0.0, 0.0}, region, region};
  const double cell = region / cells_per_side;
  int k = 0;
  for (int i = 0; i < cells_per_side; ++i) {
    for (int j = 0; j < cells_per_side; ++j) {
      BlockElement e;
      e.id = "g" + std::to_string(k++);
      const double side = cell * fill * rng.uniform(0.8, 1.0);
      const double x0 = i * cell + (cell - side) / 2, y0 = j * cell + (cell - side) / 2;
      e.polygon = rect(x0, y0, x0 + side, y0 + side);
      e.type = rng.pick(building_types());
      e.floor_count = rng.integer(1, 12);
      p.elements.push_back(std::move(e));
    }
  }
  return p;
}

inline BuildingProgram random_building_program(Rng& rng) {
  static const std::vector<std::string> windows{"arched, wooden, small", "expansive, glass, blue-tinted",
                                                "rectangular, metal frame", "round, stained glass",
                                                "tall, narrow, white frame"};
  static const std::vector<std::string> doors{"double-leaf, wooden, arched", "sleek, glass, automatic",
                                              "metal, heavy, rectangular", "red lacquer, wooden"};
  static const std::vector<std::string> roofs{"flat, slab", "pitched, gable, tiled", "gabled, grey, slate",
                                              "flat, green roof, greenery", "hipped, red tiles"};
  static const std::vector<std::string> extras{"balcony", "chimney", "awning", "column"};
  BuildingProgram b;
  if (rng.chance(0.9)) b.components.push_back({"window", rng.pick(windows)});
  if (rng.chance(0.8)) b.components.push_back({"door", rng.pick(doors)});
  if (rng.chance(0.8)) b.components.push_back({"roof", rng.pick(roofs)});
  if (rng.chance(0.3)) b.components.push_back({rng.pick(extras), "small, metal"});
  if (b.components.empty()) b.components.push_back({"window", rng.pick(windows)});
  return b;
}

inline std::string polygon_arg(const Footprint& fp) {
  std::string s;
  for (const Vec2& v : fp.vertices) {
    if (!s.empty()) s += ';';
    s += std::to_string(v.x) + ',' + std::to_string(v.y);
  }
  return s;
}

inline std::vector<std::string> building_ids(const BlockProgram& p) {
  std::vector<std::string> ids;
  for (const auto& e : p.elements) {
    if (e.is_building()) ids.push_back(e.id);
  }
  return ids;
}

/// A command that is applicable to `city` (its target exists and the verb
/// fits the element kind). Arguments are in range.
inline cityforge::edit::EditCommand random_command(Rng& rng, const cityforge::edit::CityProgram& city) {
  using cityforge::edit::EditCommand;
  using cityforge::edit::Verb;
  const auto buildings = building_ids(city.block);
  std::vector<Verb> verbs{Verb::ScaleDensity, Verb::AddElement};
  if (!buildings.empty()) {
    verbs.insert(verbs.end(), {Verb::SetFloorCount, Verb::SetStyle, Verb::SetComponent});
  }
  if (!city.block.elements.empty()) verbs.insert(verbs.end(), {Verb::RemoveElement, Verb::RetypeElement});
  EditCommand cmd;
  cmd.verb = rng.pick(verbs);
  switch (cmd.verb) {
    case Verb::SetFloorCount:
      cmd.target = rng.pick(buildings);
      cmd.arguments["floors"] = std::to_string(rng.integer(1, 40));
      break;
    case Verb::ScaleDensity:
      cmd.target = "block";
      cmd.arguments["density"] = std::to_string(rng.uniform(0.05, 0.9));
      if (rng.chance(0.3)) cmd.arguments["allow_move"] = "true";
      break;
    case Verb::SetStyle: {
      static const std::vector<std::string> styles{"chinese", "modern", "industrial", "victorian"};
      cmd.target = rng.pick(buildings);
      cmd.arguments["style"] = rng.pick(styles);
      break;
    }
    case Verb::SetComponent: {
      static const std::vector<std::string> types{"window", "door", "roof", "balcony"};
      static const std::vector<std::string> descs{"arched, wooden", "flat, glass", "pitched, tiled",
                                                  "small, metal"};
      cmd.target = rng.pick(buildings);
      cmd.arguments["type"] = rng.pick(types);
      cmd.arguments["description"] = rng.pick(descs);
      break;
    }
    case Verb::AddElement: {
      cmd.target = "block";
      cmd.arguments["id"] = "new_" + std::to_string(rng.integer(0, 1 << 20));
      const auto box = city.block.region.box();
      const double size = std::min({8.0, box.width(), box.height()});
      const double x0 = rng.uniform(box.x_min, box.x_max - size), y0 = rng.uniform(box.y_min, box.y_max - size);
      cmd.arguments["polygon"] = polygon_arg(rect(x0 + 0.5, y0 + 0.5, x0 + size - 0.5, y0 + size - 0.5));
      if (rng.chance(0.3)) {
        cmd.arguments["type"] = "greenspace";
      } else {
        cmd.arguments["type"] = rng.pick(building_types());
        cmd.arguments["floors"] = std::to_string(rng.integer(1, 10));
      }
      break;
    }
    case Verb::RemoveElement:
      cmd.target = rng.pick(city.block.elements).id;
      break;
    case Verb::RetypeElement:
      cmd.target = rng.pick(city.block.elements).id;
      cmd.arguments["type"] = rng.chance(0.3) ? std::string("greenspace") : rng.pick(building_types());
      break;
  }
  return cmd;
}

/// Layout plus building programs for every building element.
inline cityforge::edit::CityProgram random_city(Rng& rng, const LayoutOptions& opt = {}) {
  cityforge::edit::CityProgram city;
  city.block = random_layout(rng, opt);
  for (const auto& e : city.block.elements) {
    if (e.is_building() && rng.chance(0.8)) city.buildings[e.id] = random_building_program(rng);
  }
  return city;
}

}  // namespace cftest
