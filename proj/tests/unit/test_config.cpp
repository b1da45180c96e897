#include "cityforge/config.hpp"
#include "cityforge/error.hpp"
#include "doctest.h"
#include "support/files.hpp"

using namespace cityforge;

TEST_CASE("defaults") {
  const AppConfig c = config_from_json("{}");
  CHECK(c.executor.floor_height == 3.0);
  CHECK(c.band.d_min() == 0.5);
  CHECK(c.band.d_max() == 0.8);
  CHECK(c.raster_resolution == 512);
  CHECK(c.components == nullptr);
}

TEST_CASE("every key is read") {
  const AppConfig c = config_from_json(R"({"floor_height": 3.5, "bay_width": 3, "edge_margin": 0.5,
    "street_width": 8, "streetlight_spacing": 15, "tree_spacing": 5, "seed": 42,
    "band": {"d_min": 0.3, "d_max": 0.6}, "raster_resolution": 256,
    "palette": {"building": "#000000", "greenspace": "#00ff00", "background": "#FFFFFF"}})");
  CHECK(c.executor.floor_height == 3.5);
  CHECK(c.executor.bay_width == 3.0);
  CHECK(c.executor.edge_margin == 0.5);
  CHECK(c.executor.street_width == 8.0);
  CHECK(c.executor.streetlight_spacing == 15.0);
  CHECK(c.executor.tree_spacing == 5.0);
  CHECK(c.executor.seed == 42);
  CHECK(c.band.d_min() == 0.3);
  CHECK(c.raster_resolution == 256);
  CHECK(c.palette.greenspace == scoring::Rgb{0, 255, 0});
  CHECK(c.palette.background == scoring::Rgb{255, 255, 255});
  CHECK(config_from_json(R"({"band": [0.2, 0.4]})").band.d_max() == 0.4);
}

TEST_CASE("bad configs") {
  auto code = [](const std::string& text) {
    try {
      config_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::MalformedJson;  // sentinel: no error
  };
  CHECK(code(R"({"floor_hieght": 3})") == Errc::BadConfig);
  CHECK(code(R"({"floor_height": -1})") == Errc::BadConfig);
  CHECK(code("[") == Errc::BadConfig);
  CHECK(code(R"({"band": [0.8, 0.5]})") == Errc::InvalidBand);
  CHECK(code(R"({"palette": {"building": "blue"}})") == Errc::BadConfig);
  CHECK_THROWS_AS(load_config("/nonexistent/cityforge.json"), Error);
}

TEST_CASE("component table path resolves against the config directory") {
  cftest::TempDir dir;
  cftest::write_text(dir / "table.json", R"({"defaults": {"*": {"material": "metal"}}})");
  cftest::write_text(dir / "cfg.json", R"({"component_table": "table.json", "floor_height": 4})");
  const AppConfig c = load_config((dir / "cfg.json").string());
  REQUIRE(c.components != nullptr);
  CHECK(c.executor_config().components == c.components.get());
  CHECK(c.executor_config().floor_height == 4.0);
  CHECK(parse_hex_color("#1f4fd8") == scoring::Rgb{0x1f, 0x4f, 0xd8});
}
