// cityforge command-line entry point.
//
// Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O error.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cityforge/config.hpp"
#include "cityforge/edit.hpp"
#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/metrics.hpp"
#include "cityforge/program.hpp"
#include "cityforge/scene_io.hpp"
#include "cityforge/scoring.hpp"
#include "cityforge/service.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace cityforge;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(Errc::IoFailure, "cannot write " + path);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoFailure:
    case Errc::ExternalScorerUnavailable:
      return kIo;
    case Errc::UnknownVerb:
    case Errc::BadArguments:
    case Errc::BadConfig:
    case Errc::InvalidBand:
    case Errc::UnsupportedFormat:
      return kUsage;
    default:
      return kInvalid;
  }
}

Json verdict_json(const FormatVerdict& v) {
  Json diags = Json::array();
  for (const auto& d : v.diagnostics) diags.push_back({{"path", d.path}, {"message", d.message}});
  return {{"json_parsable", v.json_parsable},
          {"geometry_valid", v.geometry_valid},
          {"fields_complete", v.fields_complete},
          {"overall", v.overall},
          {"diagnostics", diags}};
}

BlockProgram load_block(const std::string& path) {
  const std::string text = read_file(path);
  auto parsed = parse_block_program(text);
  for (const auto& n : parsed.notes) std::cerr << "note: " << n.path << ": " << n.message << "\n";
  return std::move(parsed.program);
}

std::map<std::string, BuildingProgram> load_buildings(const std::string& dir) {
  std::map<std::string, BuildingProgram> out;
  if (dir.empty()) return out;
  if (!fs::is_directory(dir)) throw Error(Errc::IoFailure, "buildings directory " + dir + " not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      out[f.stem().string()] = parse_building_program(read_file(f.string())).program;
    } catch (const Error& e) {
      throw Error(e.code(), f.string() + ": " + e.what(), e.path());
    }
  }
  return out;
}

Json score_json(const scoring::SpatialScore& s) {
  return {{"s_align", s.s_align},
          {"s_plau", s.s_plau},
          {"s_overlap", s.s_overlap},
          {"s_density", s.s_density},
          {"s_spatial", s.s_spatial},
          {"semantic_source", std::string(scoring::to_string(s.semantic_source))}};
}

scoring::DensityBand parse_band(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(Errc::InvalidBand, "--band expects dmin,dmax");
  try {
    return scoring::DensityBand(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
  } catch (const std::logic_error&) {
    throw Error(Errc::InvalidBand, "--band expects two numbers");
  }
}

service::CityService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->interrupt();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cityforge: block/building programs to scored, editable 3D city blocks"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config (floor_height, bay_width, band, palette, component_table)");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a program and print its format verdict");
  std::string validate_path;
  std::string validate_kind = "block";
  validate->add_option("path", validate_path, "Program file")->required();
  validate->add_option("--kind", validate_kind, "block or building")->check(CLI::IsMember({"block", "building"}));

  // score
  auto* score = app.add_subcommand("score", "Compute the spatial reward for a block program");
  std::string score_path, prompt, scorer = "stub", band_text;
  bool allow_fallback = false;
  bool buildings_only = false;
  score->add_option("path", score_path, "Block program")->required();
  score->add_option("--prompt", prompt, "Prompt used for semantic alignment");
  score->add_option("--scorer", scorer, "stub or an http:// URL");
  score->add_option("--band", band_text, "Density band dmin,dmax (default 0.5,0.8)");
  score->add_flag("--allow-stub-fallback", allow_fallback, "Fall back to the stub if the scorer fails");
  score->add_flag("--buildings-only-overlap", buildings_only, "Leave greenspaces out of the overlap sum");

  // execute
  auto* execute = app.add_subcommand("execute", "Build a 3D scene and export it");
  std::string exec_path, exec_buildings, exec_format, exec_out;
  std::optional<std::uint64_t> exec_seed;
  execute->add_option("path", exec_path, "Block program")->required();
  execute->add_option("--buildings", exec_buildings, "Directory of <element_id>.json building programs");
  execute->add_option("--format", exec_format, "obj or glb (default: from -o extension)")
      ->check(CLI::IsMember({"obj", "glb"}));
  execute->add_option("--seed", exec_seed, "Prop placement seed");
  execute->add_option("-o,--output", exec_out, "Output file")->required();

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Write report.json and report.csv");
  std::vector<std::string> metric_inputs;
  std::string metrics_out = ".";
  std::string metrics_buildings;
  std::string metrics_scope = "shells";
  metrics_cmd->add_option("inputs", metric_inputs, "Block programs (.json) and scenes (.glb/.obj)")->required();
  metrics_cmd->add_option("-o,--output-dir", metrics_out, "Report directory");
  metrics_cmd->add_option("--buildings", metrics_buildings, "Building programs used when executing inputs");
  metrics_cmd->add_option("--scope", metrics_scope, "Edges for ROS/OTR on executed programs: shells or full")
      ->check(CLI::IsMember({"shells", "full"}));

  // edit
  auto* edit_cmd = app.add_subcommand("edit", "Apply one edit command to a program");
  std::string edit_path, edit_command, edit_buildings, edit_out, edit_buildings_out;
  bool allow_move = false;
  edit_cmd->add_option("path", edit_path, "Block program")->required();
  edit_cmd->add_option("-c,--command", edit_command, "Edit command, e.g. 'set_floor_count mixed_1 5'")->required();
  edit_cmd->add_option("--buildings", edit_buildings, "Directory of building programs");
  edit_cmd->add_option("-o,--output", edit_out, "Write the edited block program here");
  edit_cmd->add_option("--buildings-out", edit_buildings_out, "Write edited building programs here");
  edit_cmd->add_flag("--allow-move", allow_move, "Let scale_density shift buildings");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1", static_dir, snapshot, serve_scorer;
  int port = 8080;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--static", static_dir, "Directory served at /");
  serve->add_option("--snapshot", snapshot, "Session snapshot file (restored on start, written on exit)");
  serve->add_option("--scorer", serve_scorer, "External scorer URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    AppConfig config = config_path.empty() ? AppConfig{} : load_config(config_path);

    if (*validate) {
      const std::string text = read_file(validate_path);
      const auto verdict =
          check_format(text, validate_kind == "block" ? ProgramKind::Block : ProgramKind::Building);
      std::cout << verdict_json(verdict).dump(2) << "\n";
      for (const auto& d : verdict.diagnostics) std::cerr << d.path << ": " << d.message << "\n";
      return verdict.overall ? kOk : kInvalid;
    }

    if (*score) {
      const BlockProgram block = load_block(score_path);
      scoring::ScoringOptions opts;
      opts.band = band_text.empty() ? config.band : parse_band(band_text);
      opts.raster_resolution = config.raster_resolution;
      opts.palette = config.palette;
      opts.allow_stub_fallback = allow_fallback;
      if (buildings_only) opts.overlap_scope = scoring::OverlapScope::BuildingsOnly;
      scoring::SpatialScore s;
      if (scorer == "stub") {
        s = scoring::score_spatial(block, prompt, scoring::StubScorer{}, opts);
      } else {
        s = scoring::score_spatial(block, prompt, scoring::HttpScorer({scorer}), opts);
      }
      std::cout << score_json(s).dump(2) << "\n";
      return kOk;
    }

    if (*execute) {
      const BlockProgram block = load_block(exec_path);
      const auto buildings = load_buildings(exec_buildings);
      executor::ExecutorConfig cfg = config.executor_config();
      if (exec_seed) cfg.seed = *exec_seed;
      const auto scene = executor::assemble_scene(block, buildings, cfg);
      for (const auto& w : scene.warnings) std::cerr << "warning: " << w << "\n";
      std::string fmt = exec_format;
      if (fmt.empty()) fmt = fs::path(exec_out).extension() == ".obj" ? "obj" : "glb";
      export_scene(scene, *scene_format_from_string(fmt), exec_out);
      std::cout << Json{{"output", exec_out},
                        {"format", fmt},
                        {"buildings", scene.buildings.size()},
                        {"greenspaces", scene.greenspaces.size()},
                        {"props", scene.props.size()},
                        {"triangles", scene_triangle_count(scene)},
                        {"warnings", scene.warnings}}
                       .dump(2)
                << "\n";
      return kOk;
    }

    if (*metrics_cmd) {
      const auto buildings = load_buildings(metrics_buildings);
      const auto scope = metrics_scope == "full" ? metrics::EdgeScope::FullScene : metrics::EdgeScope::Shells;
      std::vector<metrics::ReportInput> inputs;
      for (const auto& path : metric_inputs) {
        const fs::path p(path);
        metrics::ReportInput in;
        in.id = p.stem().string();
        const auto ext = p.extension().string();
        if (ext == ".glb" || ext == ".obj") {
          Mesh all;
          for (const auto& node : import_scene(p).nodes) all.append(node.mesh);
          in.mesh = std::move(all);
        } else {
          in.program_text = read_file(path);
          try {
            const auto block = parse_block_program(*in.program_text).program;
            executor::ExecutorConfig cfg = config.executor_config();
            in.mesh = metrics::scene_mesh(executor::assemble_scene(block, buildings, cfg), scope);
            if (in.mesh->empty()) in.mesh.reset();
          } catch (const Error& e) {
            std::cerr << path << ": " << e.what() << "\n";
          }
        }
        inputs.push_back(std::move(in));
      }
      const auto report = metrics::build_report(inputs);
      metrics::write_report(report, metrics_out);
      std::cout << Json::parse(metrics::report_json(report))["summary"].dump(2) << "\n";
      return kOk;
    }

    if (*edit_cmd) {
      edit::CityProgram city;
      city.block = load_block(edit_path);
      city.buildings = load_buildings(edit_buildings);
      const auto command = edit::parse_edit_command(edit_command);
      edit::EditOptions opts;
      opts.allow_move = allow_move;
      const auto result = edit::apply_edit(city, command, opts);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      if (!edit_out.empty()) write_text(edit_out, serialize(result.after.block));
      if (!edit_buildings_out.empty()) {
        fs::create_directories(edit_buildings_out);
        for (const auto& [id, bp] : result.after.buildings) {
          write_text((fs::path(edit_buildings_out) / (id + ".json")).string(), serialize(bp));
        }
      }
      std::cout << Json{{"command", edit::format_command(command)},
                        {"diff", Json::parse(edit::diff_json(result.diff))},
                        {"warnings", result.warnings}}
                       .dump(2)
                << "\n";
      return kOk;
    }

    if (*serve) {
      service::ServiceOptions opts;
      opts.config = config;
      opts.static_dir = static_dir;
      opts.snapshot_path = snapshot;
      opts.scorer_url = serve_scorer;
      service::CityService svc(opts);
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "cityforge serving on http://" << host << ":" << port << "\n";
      svc.run(host, port);
      g_service = nullptr;
      svc.stop();
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
