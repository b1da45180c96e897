// Thin text-in/text-out bindings. Programs cross the boundary as JSON strings;
// the Python package turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "cityforge/edit.hpp"
#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/metrics.hpp"
#include "cityforge/program.hpp"
#include "cityforge/scene_io.hpp"
#include "cityforge/scoring.hpp"

namespace py = pybind11;
using namespace cityforge;

namespace {

ProgramKind kind_of(const std::string& name) {
  if (name == "block") return ProgramKind::Block;
  if (name == "building") return ProgramKind::Building;
  throw py::value_error("kind must be 'block' or 'building'");
}

edit::CityProgram city_of(const std::string& block, const std::map<std::string, std::string>& buildings) {
  edit::CityProgram city;
  city.block = parse_block_program(block).program;
  for (const auto& [id, text] : buildings) city.buildings[id] = parse_building_program(text).program;
  return city;
}

std::map<std::string, std::string> serialized_buildings(const edit::CityProgram& city) {
  std::map<std::string, std::string> out;
  for (const auto& [id, b] : city.buildings) out[id] = serialize(b);
  return out;
}

executor::ScenePackage scene_of(const std::string& block, const std::map<std::string, std::string>& buildings,
                                std::uint64_t seed, double floor_height) {
  const auto city = city_of(block, buildings);
  executor::ExecutorConfig cfg;
  cfg.seed = seed;
  cfg.floor_height = floor_height;
  return executor::assemble_scene(city.block, city.buildings, cfg);
}

}  // namespace

PYBIND11_MODULE(_cityforge, m) {
  m.doc() = "Native core of the cityforge package";

  static py::exception<Error> error_type(m, "CityforgeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // args = (code, message, path)
      py::object args = py::make_tuple(std::string(to_string(e.code())), std::string(e.what()), e.path());
      PyErr_SetObject(error_type.ptr(), args.ptr());
    }
  });

  m.def("canonicalize_block", [](const std::string& text) { return serialize(parse_block_program(text).program); },
        py::arg("text"));
  m.def("canonicalize_building",
        [](const std::string& text) { return serialize(parse_building_program(text).program); }, py::arg("text"));

  m.def(
      "check_format",
      [](const std::string& text, const std::string& kind) {
        const FormatVerdict v = check_format(text, kind_of(kind));
        py::dict d;
        d["json_parsable"] = v.json_parsable;
        d["geometry_valid"] = v.geometry_valid;
        d["fields_complete"] = v.fields_complete;
        d["overall"] = v.overall;
        py::list diags;
        for (const auto& x : v.diagnostics) diags.append(py::make_tuple(x.path, x.message));
        d["diagnostics"] = diags;
        return d;
      },
      py::arg("text"), py::arg("kind") = "block");

  m.def(
      "format_accuracy",
      [](const std::vector<std::string>& corpus, const std::string& kind) {
        return metrics::format_accuracy(corpus, kind_of(kind)).fraction;
      },
      py::arg("corpus"), py::arg("kind") = "block");

  m.def("coverage", [](const std::string& text) { return scoring::coverage(parse_block_program(text).program); },
        py::arg("text"));
  m.def(
      "overlap_fraction",
      [](const std::string& text, bool buildings_only) {
        return scoring::overlap_fraction(parse_block_program(text).program,
                                         buildings_only ? scoring::OverlapScope::BuildingsOnly
                                                        : scoring::OverlapScope::AllElements);
      },
      py::arg("text"), py::arg("buildings_only") = false);
  m.def(
      "density_score",
      [](double coverage, double d_min, double d_max) {
        return scoring::density_score(coverage, scoring::DensityBand(d_min, d_max));
      },
      py::arg("coverage"), py::arg("d_min") = 0.5, py::arg("d_max") = 0.8);
  m.def(
      "score",
      [](const std::string& text, const std::string& prompt, double d_min, double d_max) {
        scoring::ScoringOptions opts;
        opts.band = scoring::DensityBand(d_min, d_max);
        const auto s = scoring::score_spatial(parse_block_program(text).program, prompt, scoring::StubScorer{}, opts);
        py::dict d;
        d["s_align"] = s.s_align;
        d["s_plau"] = s.s_plau;
        d["s_overlap"] = s.s_overlap;
        d["s_density"] = s.s_density;
        d["s_spatial"] = s.s_spatial;
        d["semantic_source"] = std::string(scoring::to_string(s.semantic_source));
        return d;
      },
      py::arg("text"), py::arg("prompt") = "", py::arg("d_min") = 0.5, py::arg("d_max") = 0.8);
  m.def("collision_rate",
        [](const std::string& text) { return metrics::collision_rate(parse_block_program(text).program); },
        py::arg("text"));

  m.def(
      "execute",
      [](const std::string& block, const std::map<std::string, std::string>& buildings, const std::string& format,
         std::uint64_t seed, double floor_height) -> py::object {
        const auto scene = scene_of(block, buildings, seed, floor_height);
        if (format == "glb") {
          const auto bytes = glb_bytes(scene);
          return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        }
        if (format == "obj") return py::str(obj_text(scene, "scene.mtl").obj);
        throw Error(Errc::UnsupportedFormat, "format must be glb or obj");
      },
      py::arg("block"), py::arg("buildings") = std::map<std::string, std::string>{}, py::arg("format") = "glb",
      py::arg("seed") = 0, py::arg("floor_height") = 3.0);

  m.def(
      "scene_metrics",
      [](const std::string& block, const std::map<std::string, std::string>& buildings, std::uint64_t seed) {
        const auto scene = scene_of(block, buildings, seed, 3.0);
        const Mesh shells = metrics::scene_mesh(scene, metrics::EdgeScope::Shells);
        py::dict d;
        d["triangles"] = scene_triangle_count(scene);
        d["ros"] = metrics::ros(shells);
        d["otr"] = metrics::otr(shells);
        return d;
      },
      py::arg("block"), py::arg("buildings") = std::map<std::string, std::string>{}, py::arg("seed") = 0);

  m.def(
      "apply_edit",
      [](const std::string& block, const std::map<std::string, std::string>& buildings, const std::string& command,
         bool allow_move) {
        edit::EditOptions opts;
        opts.allow_move = allow_move;
        const auto r = edit::apply_edit(city_of(block, buildings), edit::parse_edit_command(command), opts);
        py::dict d;
        d["block"] = serialize(r.after.block);
        d["buildings"] = serialized_buildings(r.after);
        d["diff"] = edit::diff_json(r.diff);
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("block"), py::arg("buildings") = std::map<std::string, std::string>{}, py::arg("command"),
      py::arg("allow_move") = false);

  m.def("verbs", [] {
    std::vector<std::string> out;
    for (const auto v : edit::all_verbs()) out.emplace_back(edit::to_string(v));
    return out;
  });
}
