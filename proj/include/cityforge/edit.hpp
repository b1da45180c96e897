#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cityforge/program.hpp"

namespace cityforge::edit {

enum class Verb {
  SetFloorCount,
  ScaleDensity,
  SetStyle,
  SetComponent,
  AddElement,
  RemoveElement,
  RetypeElement,
};

std::string_view to_string(Verb verb);
std::optional<Verb> verb_from_string(std::string_view name);
const std::vector<Verb>& all_verbs();

/// `target` is "block" or an element id.
struct EditCommand {
  Verb verb = Verb::SetFloorCount;
  std::string target;
  std::map<std::string, std::string> arguments;

  friend bool operator==(const EditCommand&, const EditCommand&) = default;
};

/// Grammar:
///
///   command    = verb target { argument } ;
///   argument   = value | key "=" value ;       (positional values fill the
///                                                verb's keys in order)
///   value      = bare | '"' chars '"' | "'" chars "'" ;
///
/// Keys per verb (positional order first):
///   set_floor_count  floors
///   scale_density    density [allow_move]
///   set_style        style
///   set_component    type description
///   add_element      id type [polygon floors facade]
///   remove_element   -
///   retype_element   type
///
/// Polygons are JSON ("[[0,0],[10,0],[10,10]]") or "x,y;x,y;x,y".
/// Throws Errc::UnknownVerb (listing the verbs) or Errc::BadArguments.
EditCommand parse_edit_command(std::string_view text);

/// {"verb": ..., "target": ..., "arguments": {...}}; argument values may be
/// strings, numbers, booleans or polygon arrays.
EditCommand command_from_json(std::string_view json_text);

/// Canonical text form that parse_edit_command reads back.
std::string format_command(const EditCommand& command);

struct CityProgram {
  BlockProgram block;
  std::map<std::string, BuildingProgram> buildings;  // keyed by element id

  friend bool operator==(const CityProgram&, const CityProgram&) = default;
};

/// One changed location. Paths are id-based ("/elements/<id>/floor_count",
/// "/buildings/<id>/components/<type>"); values are compact JSON and absent
/// when the location did not exist on that side.
struct DiffEntry {
  std::string path;
  std::optional<std::string> before;
  std::optional<std::string> after;

  friend bool operator==(const DiffEntry&, const DiffEntry&) = default;
};

struct EditResult {
  CityProgram after;
  std::vector<DiffEntry> diff;
  std::vector<std::string> warnings;
};

struct StyleEntry {
  std::string facade;
  std::map<std::string, std::string> components;
  std::optional<int> floor_cap;
};

/// Style name -> facade text, component descriptions, optional floor cap.
/// Shipped as data/styles.json.
struct StyleLexicon {
  std::map<std::string, StyleEntry> styles;

  static StyleLexicon from_json(std::string_view text);
  static const StyleLexicon& builtin();
  const StyleEntry* find(std::string_view name) const;
};

struct EditOptions {
  const StyleLexicon* styles = nullptr;  // null -> builtin
  /// Lets scale_density shift buildings a few meters before it shrinks them.
  bool allow_move = false;
};

/// Throws Errc::UnknownTarget, Errc::InvalidArgument, Errc::InfeasibleDensity.
EditResult apply_edit(const CityProgram& program, const EditCommand& command, const EditOptions& options = {});

std::vector<DiffEntry> diff_programs(const CityProgram& before, const CityProgram& after);

/// Replays a diff produced by diff_programs / apply_edit.
CityProgram apply_diff(const CityProgram& before, const std::vector<DiffEntry>& diff);

std::string diff_json(const std::vector<DiffEntry>& diff);

}  // namespace cityforge::edit
