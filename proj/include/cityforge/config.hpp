#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "cityforge/executor.hpp"
#include "cityforge/scoring.hpp"

namespace cityforge {

/// Settings shared by the CLI and the service, loaded from a JSON file:
///
///   {"floor_height": 3.0, "bay_width": 2.5, "edge_margin": 1.0,
///    "street_width": 6.0, "streetlight_spacing": 20.0, "tree_spacing": 6.0,
///    "seed": 0, "band": [0.5, 0.8], "raster_resolution": 512,
///    "palette": {"building": "#1f4fd8", "greenspace": "#2e9e44", "background": "#ffffff"},
///    "component_table": "components.json"}
///
/// Every key is optional. A relative component_table path resolves against
/// the config file's directory.
struct AppConfig {
  executor::ExecutorConfig executor;
  scoring::DensityBand band;
  scoring::Palette palette;
  int raster_resolution = 512;
  std::shared_ptr<const executor::ComponentTable> components;  // null -> builtin

  /// Executor settings with the component table pointer wired in.
  executor::ExecutorConfig executor_config() const;
};

AppConfig config_from_json(std::string_view text, const std::string& base_dir = ".");
AppConfig load_config(const std::string& path);

scoring::Rgb parse_hex_color(std::string_view text);

}  // namespace cityforge
