#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cityforge {

enum class Errc {
  // program model
  MalformedJson,
  MissingField,
  WrongType,
  FieldNotAllowed,
  BadPolygon,
  DuplicateId,
  BadFloorCount,
  OutOfRegion,
  EmptyDescription,
  UnknownForm,
  // geometry
  DegenerateEdge,
  TriangulationFailure,
  // scoring
  EmptyRegion,
  InvalidBand,
  ExternalScorerUnavailable,
  // executor / export
  NotABuilding,
  IoFailure,
  UnsupportedFormat,
  BadSceneFile,
  // metrics
  EmptyCorpus,
  DegenerateMesh,
  NonManifold,
  // edits
  UnknownVerb,
  BadArguments,
  UnknownTarget,
  InvalidArgument,
  InfeasibleDensity,
  // configuration
  BadConfig,
};

std::string_view to_string(Errc code);

/// Error carrying a stable code and, where it applies, the JSON path (or
/// element id) that triggered it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::string path = {});

  Errc code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  Errc code_;
  std::string path_;
};

}  // namespace cityforge
