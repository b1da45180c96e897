#include "cityforge/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cityforge/error.hpp"
#include "json.hpp"

namespace cityforge {
namespace {

using Json = nlohmann::json;

double positive(const Json& j, const char* key) {
  if (!j.is_number()) throw Error(Errc::BadConfig, std::string(key) + " must be a number", key);
  const double v = j.get<double>();
  if (!(v > 0.0)) throw Error(Errc::BadConfig, std::string(key) + " must be positive", key);
  return v;
}

}  // namespace

executor::ExecutorConfig AppConfig::executor_config() const {
  executor::ExecutorConfig c = executor;
  c.components = components.get();
  return c;
}

scoring::Rgb parse_hex_color(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') throw Error(Errc::BadConfig, "colors are written #rrggbb");
  auto byte = [&](std::size_t at) {
    unsigned v = 0;
    for (std::size_t i = at; i < at + 2; ++i) {
      const char c = text[i];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<unsigned>(c - 'A' + 10);
      else throw Error(Errc::BadConfig, "bad hex color '" + std::string(text) + "'");
    }
    return static_cast<std::uint8_t>(v);
  };
  return {byte(1), byte(3), byte(5)};
}

AppConfig config_from_json(std::string_view text, const std::string& base_dir) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {
    throw Error(Errc::BadConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(Errc::BadConfig, "config must be a JSON object");

  static const std::set<std::string> known = {
      "floor_height", "bay_width",   "edge_margin", "street_width",      "streetlight_spacing",
      "tree_spacing", "seed",        "band",        "raster_resolution", "palette",
      "component_table"};
  for (const auto& [key, value] : root.items()) {
    if (!known.contains(key)) throw Error(Errc::BadConfig, "unknown config key '" + key + "'", key);
  }

  AppConfig cfg;
  auto& ex = cfg.executor;
  if (root.contains("floor_height")) ex.floor_height = positive(root["floor_height"], "floor_height");
  if (root.contains("bay_width")) ex.bay_width = positive(root["bay_width"], "bay_width");
  if (root.contains("edge_margin")) {
    if (!root["edge_margin"].is_number() || root["edge_margin"].get<double>() < 0.0) {
      throw Error(Errc::BadConfig, "edge_margin must be a non-negative number", "edge_margin");
    }
    ex.edge_margin = root["edge_margin"].get<double>();
  }
  if (root.contains("street_width")) ex.street_width = positive(root["street_width"], "street_width");
  if (root.contains("streetlight_spacing")) {
    ex.streetlight_spacing = positive(root["streetlight_spacing"], "streetlight_spacing");
  }
  if (root.contains("tree_spacing")) ex.tree_spacing = positive(root["tree_spacing"], "tree_spacing");
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw Error(Errc::BadConfig, "seed must be a non-negative integer", "seed");
    ex.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("band")) {
    const Json& b = root["band"];
    double lo = 0.0, hi = 0.0;
    if (b.is_array() && b.size() == 2 && b[0].is_number() && b[1].is_number()) {
      lo = b[0].get<double>();
      hi = b[1].get<double>();
    } else if (b.is_object() && b.contains("d_min") && b.contains("d_max")) {
      lo = b["d_min"].get<double>();
      hi = b["d_max"].get<double>();
    } else {
      throw Error(Errc::BadConfig, "band must be [d_min, d_max]", "band");
    }
    cfg.band = scoring::DensityBand(lo, hi);
  }
  if (root.contains("raster_resolution")) {
    const Json& r = root["raster_resolution"];
    if (!r.is_number_integer() || r.get<int>() < 8 || r.get<int>() > 8192) {
      throw Error(Errc::BadConfig, "raster_resolution must be an integer in [8, 8192]", "raster_resolution");
    }
    cfg.raster_resolution = r.get<int>();
  }
  if (root.contains("palette")) {
    const Json& p = root["palette"];
    if (!p.is_object()) throw Error(Errc::BadConfig, "palette must be an object", "palette");
    for (const auto& [key, value] : p.items()) {
      if (!value.is_string()) throw Error(Errc::BadConfig, "palette colors are strings", "palette." + key);
      const auto color = parse_hex_color(value.get<std::string>());
      if (key == "building") cfg.palette.building = color;
      else if (key == "greenspace") cfg.palette.greenspace = color;
      else if (key == "background") cfg.palette.background = color;
      else throw Error(Errc::BadConfig, "unknown palette entry '" + key + "'", "palette." + key);
    }
  }
  if (root.contains("component_table")) {
    if (!root["component_table"].is_string()) {
      throw Error(Errc::BadConfig, "component_table must be a path", "component_table");
    }
    std::filesystem::path path = root["component_table"].get<std::string>();
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    cfg.components = std::make_shared<const executor::ComponentTable>(executor::ComponentTable::load(path.string()));
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return config_from_json(ss.str(), dir.empty() ? "." : dir.string());
}

}  // namespace cityforge
