#include "cityforge/error.hpp"

namespace cityforge {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedJson: return "MalformedJson";
    case Errc::MissingField: return "MissingField";
    case Errc::WrongType: return "WrongType";
    case Errc::FieldNotAllowed: return "FieldNotAllowed";
    case Errc::BadPolygon: return "BadPolygon";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::BadFloorCount: return "BadFloorCount";
    case Errc::OutOfRegion: return "OutOfRegion";
    case Errc::EmptyDescription: return "EmptyDescription";
    case Errc::UnknownForm: return "UnknownForm";
    case Errc::DegenerateEdge: return "DegenerateEdge";
    case Errc::TriangulationFailure: return "TriangulationFailure";
    case Errc::EmptyRegion: return "EmptyRegion";
    case Errc::InvalidBand: return "InvalidBand";
    case Errc::ExternalScorerUnavailable: return "ExternalScorerUnavailable";
    case Errc::NotABuilding: return "NotABuilding";
    case Errc::IoFailure: return "IoFailure";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::BadSceneFile: return "BadSceneFile";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::DegenerateMesh: return "DegenerateMesh";
    case Errc::NonManifold: return "NonManifold";
    case Errc::UnknownVerb: return "UnknownVerb";
    case Errc::BadArguments: return "BadArguments";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InfeasibleDensity: return "InfeasibleDensity";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

Error::Error(Errc code, std::string message, std::string path)
    : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

}  // namespace cityforge
