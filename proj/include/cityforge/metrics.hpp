#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cityforge/executor.hpp"
#include "cityforge/mesh.hpp"
#include "cityforge/program.hpp"

namespace cityforge::metrics {

/// Sum of pairwise true-footprint intersection areas over the region area.
double collision_rate(const BlockProgram& program);

struct FormatAccuracy {
  double fraction = 0.0;
  std::vector<FormatVerdict> verdicts;
};

FormatAccuracy format_accuracy(const std::vector<std::string>& corpus, ProgramKind kind);

inline constexpr double kRosToleranceDegrees = 5.0;

/// Length-weighted share of horizontal feature-edge directions within the
/// tolerance of the dominant axis pair. Edges between coplanar triangles are
/// not features; vertical edges have no horizontal direction and are skipped.
double ros(const Mesh& mesh, double tolerance_degrees = kRosToleranceDegrees);

/// Minimal triangle count for the mesh's maximal planar patches: corners plus
/// two per boundary loop, minus four, per patch (collinear boundary vertices
/// are not corners).
std::size_t tessellation_demand(const Mesh& mesh);

/// Actual over demanded triangle count. Topology is taken from the indices.
double otr(const Mesh& mesh);

enum class EdgeScope { Shells, FullScene };

/// Geometry used for ROS / OTR: building shells only, or every mesh in the
/// scene including components, ground, streets and props.
Mesh scene_mesh(const executor::ScenePackage& scene, EdgeScope scope);

struct ReportInput {
  std::string id;
  std::optional<std::string> program_text;  // block program bytes
  std::optional<Mesh> mesh;
};

struct ReportItem {
  std::string id;
  std::optional<double> collision_rate;
  std::optional<FormatVerdict> format;
  std::optional<double> ros;
  std::optional<double> otr;
  std::vector<std::string> errors;
};

struct QualityReport {
  std::optional<double> format_accuracy;
  std::optional<double> collision_rate;  // mean over items that have one
  std::optional<double> ros;
  std::optional<double> otr;
  std::vector<ReportItem> items;  // sorted by id
};

QualityReport build_report(const std::vector<ReportInput>& inputs);

inline constexpr const char* kCsvHeader = "id,collision_rate,json_ok,geom_ok,fields_ok,ros,otr";

std::string report_json(const QualityReport& report);
std::string report_csv(const QualityReport& report);

/// Writes report.json and report.csv into `directory`.
void write_report(const QualityReport& report, const std::string& directory);

}  // namespace cityforge::metrics
