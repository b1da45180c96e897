#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cityforge/program.hpp"

namespace cityforge::scoring {

/// Target built-coverage interval, 0 < d_min < d_max < 1.
class DensityBand {
 public:
  DensityBand() = default;
  /// Throws Errc::InvalidBand unless 0 < d_min < d_max < 1.
  DensityBand(double d_min, double d_max);

  double d_min() const { return d_min_; }
  double d_max() const { return d_max_; }

 private:
  double d_min_ = 0.5;
  double d_max_ = 0.8;
};

/// Which elements enter the pairwise AABB overlap sum.
enum class OverlapScope { AllElements, BuildingsOnly };

enum class SemanticSource { Stub, External };

struct SpatialScore {
  double s_align = 0.0;
  double s_plau = 0.0;
  double s_overlap = 0.0;
  double s_density = 0.0;
  double s_spatial = 0.0;
  SemanticSource semantic_source = SemanticSource::Stub;
};

/// Per-component weights for the combined reward; uniform by default.
struct RewardWeights {
  double align = 1.0;
  double plau = 1.0;
  double overlap = 1.0;
  double density = 1.0;
};

/// Sum over unordered pairs of AABB intersection areas, divided by the region
/// area. Throws Errc::EmptyRegion.
double overlap_fraction(const BlockProgram& program, OverlapScope scope = OverlapScope::AllElements);

/// Summed AABB area of building elements over the region area.
double coverage(const BlockProgram& program);

/// 10 * (1 - O), clamped to [0, 10].
double overlap_score(double overlap);
double score_overlap(const BlockProgram& program, OverlapScope scope = OverlapScope::AllElements);

/// 10 inside the band, 10 * D / d_min below it, 10 * (1 - D) / (1 - d_max)
/// above it.
double density_score(double coverage, const DensityBand& band);
double score_density(const BlockProgram& program, const DensityBand& band = {});

double combine(const SpatialScore& components, const RewardWeights& weights = {});

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Palette {
  Rgb building{0x1f, 0x4f, 0xd8};
  Rgb greenspace{0x2e, 0x9e, 0x44};
  Rgb background{0xff, 0xff, 0xff};
};

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first

  Rgb pixel(int x, int y) const;
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Top-down image of the block region; pixel centers are sampled against
/// each footprint in program order.
Raster render_topdown(const BlockProgram& program, int resolution, const Palette& palette = {});

std::vector<std::uint8_t> encode_png(const Raster& raster);

struct SemanticScores {
  double s_align = 0.0;
  double s_plau = 0.0;
};

class SemanticScorer {
 public:
  virtual ~SemanticScorer() = default;
  virtual SemanticScores score(std::string_view prompt, const BlockProgram& program,
                               const Raster& raster) const = 0;
  virtual SemanticSource source() const = 0;
};

/// Deterministic stand-in for a vision-language judge. s_align compares the
/// element-type counts named in the prompt with the program's; s_plau is the
/// overlap score measured on true footprints.
class StubScorer final : public SemanticScorer {
 public:
  SemanticScores score(std::string_view prompt, const BlockProgram& program,
                       const Raster& raster) const override;
  SemanticSource source() const override { return SemanticSource::Stub; }
};

/// Category counts declared in free text, e.g. "3 residential buildings and a
/// park" -> {residential: 3, greenspace: 1}.
std::vector<std::pair<std::string, int>> declared_types(std::string_view prompt);

/// Category of an element type string, using the same vocabulary.
std::string type_category(std::string_view element_type);

/// Multiset edit distance normalized by the larger multiset size.
double normalized_multiset_distance(const std::vector<std::pair<std::string, int>>& a,
                                    const std::vector<std::pair<std::string, int>>& b);

struct HttpScorerOptions {
  std::string url;  // http://host:port/path
  std::chrono::milliseconds timeout{5000};
  int retries = 2;
};

/// POSTs {"prompt", "image_png_b64"} and reads {"semantic_alignment",
/// "global_plausibility"}. Throws Errc::ExternalScorerUnavailable.
class HttpScorer final : public SemanticScorer {
 public:
  explicit HttpScorer(HttpScorerOptions options);
  SemanticScores score(std::string_view prompt, const BlockProgram& program,
                       const Raster& raster) const override;
  SemanticSource source() const override { return SemanticSource::External; }

 private:
  HttpScorerOptions options_;
};

struct ScoringOptions {
  DensityBand band;
  OverlapScope overlap_scope = OverlapScope::AllElements;
  RewardWeights weights;
  int raster_resolution = 512;
  Palette palette;
  /// Use the stub when the external scorer fails instead of propagating.
  bool allow_stub_fallback = false;
};

SpatialScore score_spatial(const BlockProgram& program, std::string_view prompt,
                           const SemanticScorer& scorer, const ScoringOptions& options = {});

struct PreferencePair {
  BlockProgram chosen;
  BlockProgram rejected;
  SpatialScore chosen_score;
  SpatialScore rejected_score;
  double margin = 0.0;
};

inline constexpr double kDefaultPairThreshold = 5.0;

/// Every unordered pair whose s_spatial difference reaches `threshold`, with
/// the higher-scoring program as `chosen`. Pairs follow candidate order.
std::vector<PreferencePair> build_preference_pairs(
    const std::vector<std::pair<BlockProgram, SpatialScore>>& candidates,
    double threshold = kDefaultPairThreshold);

std::string_view to_string(SemanticSource source);

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace cityforge::scoring
