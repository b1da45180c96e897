#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cityforge/error.hpp"
#include "cityforge/geometry.hpp"
#include "cityforge/vec.hpp"

namespace cityforge {

/// Coordinates are snapped to this grid on ingest so serialization is exact.
inline constexpr double kCoordinateQuantum = 1e-6;

double quantize(double v);

inline constexpr int kMaxFloorCount = 1000;

/// Simple, counter-clockwise ring with implicit closure.
struct Footprint {
  std::vector<Vec2> vertices;

  double area() const { return geometry::signed_area(vertices); }
  geometry::AABB bounds() const { return geometry::aabb_of(vertices); }

  friend bool operator==(const Footprint&, const Footprint&) = default;
};

/// Axis-aligned block bounds anchored at `origin`.
struct Region {
  Vec2 origin;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  geometry::AABB box() const { return {origin.x, origin.x + width, origin.y, origin.y + height}; }

  friend bool operator==(const Region&, const Region&) = default;
};

/// Known element categories. Any other string is a valid generic building.
inline constexpr std::string_view kGreenspaceType = "greenspace";
inline constexpr std::string_view kKnownTypes[] = {
    "residential", "commercial", "office", "school", "library", "mixed-use building", "greenspace",
};

struct BlockElement {
  std::string id;
  std::string type;
  Footprint polygon;
  std::optional<int> floor_count;
  std::optional<std::string> facade;

  bool is_building() const { return type != kGreenspaceType; }

  friend bool operator==(const BlockElement&, const BlockElement&) = default;
};

struct BlockProgram {
  std::vector<BlockElement> elements;
  Region region;
  std::optional<std::string> description;

  const BlockElement* find(std::string_view id) const;
  BlockElement* find(std::string_view id);

  friend bool operator==(const BlockProgram&, const BlockProgram&) = default;
};

struct BuildingComponent {
  std::string component_type;
  std::string description;

  friend bool operator==(const BuildingComponent&, const BuildingComponent&) = default;
};

struct BuildingProgram {
  std::vector<BuildingComponent> components;
  std::optional<std::string> source_facade;

  const BuildingComponent* find(std::string_view type) const;

  friend bool operator==(const BuildingProgram&, const BuildingProgram&) = default;
};

enum class ProgramKind { Block, Building };

struct Diagnostic {
  std::string path;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// Hard issue found while validating; the Errc decides which verdict
/// component it belongs to.
struct Issue {
  Errc code;
  std::string path;
  std::string message;
};

struct FormatVerdict {
  bool json_parsable = false;
  bool geometry_valid = false;
  bool fields_complete = false;
  bool overall = false;
  std::vector<Diagnostic> diagnostics;
};

template <typename Program>
struct Parsed {
  Program program;
  /// Soft notes such as orientation fixes or dropped duplicate vertices.
  std::vector<Diagnostic> notes;
};

/// Parses either a bare element array, the `{"description", "layout":
/// {"buildings", "greenspaces"}}` wrapper (optionally inside a one-element
/// array), or the canonical `{"region", "elements"}` object. Throws Error on
/// the first violated constraint.
Parsed<BlockProgram> parse_block_program(std::string_view text);

/// Accepts the component list form, the flat `{"window": ...}` map form, and
/// the `{"facade", "output": {...}}` wrapper.
Parsed<BuildingProgram> parse_building_program(std::string_view text);

std::string serialize(const BlockProgram& program);
std::string serialize(const BuildingProgram& program);

/// Never throws; every failure is encoded in the verdict.
FormatVerdict check_format(std::string_view text, ProgramKind kind);

/// Re-checks every invariant of an already-typed program (used after edits).
std::vector<Issue> validate(const BlockProgram& program);
std::vector<Issue> validate(const BuildingProgram& program);

/// Smallest region anchored at min(0, min coordinate) with sides snapped up
/// to multiples of 10 m; 100 x 100 m for an empty program.
Region default_region(const std::vector<BlockElement>& elements);

/// Canonicalizes a polygon: drops repeated/closing vertices, reverses
/// clockwise rings, snaps coordinates. Records notes for each fix.
Footprint normalize_polygon(std::vector<Vec2> raw, const std::string& path,
                            std::vector<Diagnostic>* notes);

/// Geometry checks shared by the parser and the edit engine.
std::optional<Issue> polygon_issue(const Footprint& polygon, const std::string& path);

std::string canonical_component_type(std::string_view raw);

/// 64-bit FNV-1a over the canonical serialization.
std::uint64_t program_hash(const BlockProgram& program);
std::uint64_t program_hash(const BuildingProgram& program);

bool is_geometry_error(Errc code);

}  // namespace cityforge
