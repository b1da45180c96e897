#include "cityforge/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <thread>

#include <png.h>

#include "cityforge/metrics.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cityforge::scoring {
namespace {

double region_area_checked(const BlockProgram& program) {
  const double area = program.region.area();
  if (!(area > 0.0) || !std::isfinite(area)) {
    throw Error(Errc::EmptyRegion, "block region has zero area");
  }
  return area;
}

const std::map<std::string, std::string, std::less<>>& vocabulary() {
  static const std::map<std::string, std::string, std::less<>> vocab = {
      {"residential", "residential"}, {"resident", "residential"},   {"apartment", "residential"},
      {"apartments", "residential"},  {"housing", "residential"},    {"house", "residential"},
      {"houses", "residential"},      {"home", "residential"},       {"homes", "residential"},
      {"commercial", "commercial"},   {"commerical", "commercial"},  {"shop", "commercial"},
      {"shops", "commercial"},        {"store", "commercial"},       {"stores", "commercial"},
      {"retail", "commercial"},       {"mall", "commercial"},        {"office", "office"},
      {"offices", "office"},          {"school", "school"},          {"schools", "school"},
      {"library", "library"},         {"libraries", "library"},      {"mixed-use", "mixed-use"},
      {"mixed", "mixed-use"},         {"greenspace", "greenspace"},  {"greenspaces", "greenspace"},
      {"park", "greenspace"},         {"parks", "greenspace"},       {"garden", "greenspace"},
      {"gardens", "greenspace"},
  };
  return vocab;
}

std::optional<int> count_word(std::string_view token) {
  static const std::map<std::string, int, std::less<>> words = {
      {"a", 1},     {"an", 1},    {"one", 1},   {"single", 1}, {"two", 2},     {"pair", 2},
      {"three", 3}, {"four", 4},  {"five", 5},  {"six", 6},    {"seven", 7},   {"eight", 8},
      {"nine", 9},  {"ten", 10},  {"eleven", 11}, {"twelve", 12}, {"several", 3},
  };
  if (const auto it = words.find(token); it != words.end()) return it->second;
  if (!token.empty() && token.size() <= 4 &&
      std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::stoi(std::string(token));
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Returns the category of tokens[i] (consuming "green space" as one word).
std::optional<std::string> category_at(const std::vector<std::string>& tokens, std::size_t i) {
  const auto& vocab = vocabulary();
  if (tokens[i] == "green" && i + 1 < tokens.size() &&
      (tokens[i + 1] == "space" || tokens[i + 1] == "spaces")) {
    return std::string("greenspace");
  }
  if (const auto it = vocab.find(tokens[i]); it != vocab.end()) return it->second;
  return std::nullopt;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t size) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + size);
}

void png_flush_noop(png_structp) {}

}  // namespace

DensityBand::DensityBand(double d_min, double d_max) : d_min_(d_min), d_max_(d_max) {
  if (!(0.0 < d_min && d_min < d_max && d_max < 1.0)) {
    throw Error(Errc::InvalidBand, "density band needs 0 < d_min < d_max < 1");
  }
}

double overlap_fraction(const BlockProgram& program, OverlapScope scope) {
  const double region = region_area_checked(program);
  std::vector<geometry::AABB> boxes;
  for (const auto& e : program.elements) {
    if (scope == OverlapScope::BuildingsOnly && !e.is_building()) continue;
    boxes.push_back(e.polygon.bounds());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      total += geometry::aabb_intersection_area(boxes[i], boxes[j]);
    }
  }
  return total / region;
}

double coverage(const BlockProgram& program) {
  const double region = region_area_checked(program);
  double built = 0.0;
  for (const auto& e : program.elements) {
    if (e.is_building()) built += e.polygon.bounds().area();
  }
  return built / region;
}

double overlap_score(double overlap) { return std::clamp(10.0 * (1.0 - overlap), 0.0, 10.0); }

double score_overlap(const BlockProgram& program, OverlapScope scope) {
  return overlap_score(overlap_fraction(program, scope));
}

double density_score(double d, const DensityBand& band) {
  if (d < band.d_min()) return std::max(0.0, 10.0 * d / band.d_min());
  if (d <= band.d_max()) return 10.0;
  return 10.0 * std::max(0.0, (1.0 - d) / (1.0 - band.d_max()));
}

double score_density(const BlockProgram& program, const DensityBand& band) {
  return density_score(coverage(program), band);
}

double combine(const SpatialScore& c, const RewardWeights& w) {
  const double total = w.align + w.plau + w.overlap + w.density;
  if (!(total > 0.0)) throw Error(Errc::BadConfig, "reward weights must have a positive sum");
  if (w.align == w.plau && w.plau == w.overlap && w.overlap == w.density) {
    return (c.s_align + c.s_plau + c.s_overlap + c.s_density) / 4.0;
  }
  return (w.align * c.s_align + w.plau * c.s_plau + w.overlap * c.s_overlap +
          w.density * c.s_density) /
         total;
}

Rgb Raster::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

Raster render_topdown(const BlockProgram& program, int resolution, const Palette& palette) {
  if (resolution <= 0) throw Error(Errc::InvalidArgument, "raster resolution must be positive");
  Raster img;
  img.width = resolution;
  img.height = resolution;
  img.rgb.resize(static_cast<std::size_t>(resolution) * resolution * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = palette.background.r;
    img.rgb[i + 1] = palette.background.g;
    img.rgb[i + 2] = palette.background.b;
  }
  const auto box = program.region.box();
  const double sx = box.width() / resolution;
  const double sy = box.height() / resolution;
  if (!(sx > 0.0) || !(sy > 0.0)) return img;

  std::vector<double> crossings;
  for (const auto& e : program.elements) {
    const Rgb color = e.is_building() ? palette.building : palette.greenspace;
    const auto& v = e.polygon.vertices;
    const std::size_t n = v.size();
    for (int row = 0; row < resolution; ++row) {
      const double y = box.y_max - (row + 0.5) * sy;
      crossings.clear();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((v[i].y > y) != (v[j].y > y)) {
          crossings.push_back(v[i].x + (y - v[i].y) * (v[j].x - v[i].x) / (v[j].y - v[i].y));
        }
      }
      std::sort(crossings.begin(), crossings.end());
      for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
        // Pixel centers at x_min + (col + 0.5) * sx inside [c0, c1).
        const int c0 = static_cast<int>(std::ceil((crossings[k] - box.x_min) / sx - 0.5));
        const int c1 = static_cast<int>(std::ceil((crossings[k + 1] - box.x_min) / sx - 0.5));
        for (int col = std::max(c0, 0); col < std::min(c1, resolution); ++col) {
          const std::size_t p = (static_cast<std::size_t>(row) * resolution + col) * 3;
          img.rgb[p] = color.r;
          img.rgb[p + 1] = color.g;
          img.rgb[p + 2] = color.b;
        }
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(Errc::IoFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::IoFailure, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, raster.width, raster.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y) {
    auto* row = const_cast<png_bytep>(raster.rgb.data() + static_cast<std::size_t>(y) * raster.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::pair<std::string, int>> declared_types(std::string_view prompt) {
  const auto tokens = tokenize(prompt);
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto category = category_at(tokens, i);
    if (!category) continue;
    int count = 1;
    for (std::size_t back = 1; back <= 2 && back <= i; ++back) {
      if (category_at(tokens, i - back)) break;
      if (const auto c = count_word(tokens[i - back])) {
        count = *c;
        break;
      }
    }
    counts[*category] += count;
    if (tokens[i] == "green") ++i;  // skip "space"
  }
  return {counts.begin(), counts.end()};
}

std::string type_category(std::string_view element_type) {
  const auto tokens = tokenize(element_type);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto c = category_at(tokens, i)) return *c;
  }
  std::string lowered(element_type);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lowered;
}

double normalized_multiset_distance(const std::vector<std::pair<std::string, int>>& a,
                                    const std::vector<std::pair<std::string, int>>& b) {
  std::map<std::string, std::pair<int, int>> merged;
  for (const auto& [k, n] : a) merged[k].first += n;
  for (const auto& [k, n] : b) merged[k].second += n;
  int size_a = 0, size_b = 0, shared = 0;
  for (const auto& [k, counts] : merged) {
    size_a += counts.first;
    size_b += counts.second;
    shared += std::min(counts.first, counts.second);
  }
  const int larger = std::max(size_a, size_b);
  if (larger == 0) return 0.0;
  return static_cast<double>(larger - shared) / larger;
}

SemanticScores StubScorer::score(std::string_view prompt, const BlockProgram& program,
                                 const Raster&) const {
  std::map<std::string, int> present;
  for (const auto& e : program.elements) ++present[type_category(e.type)];
  const std::vector<std::pair<std::string, int>> actual(present.begin(), present.end());
  SemanticScores s;
  s.s_align = 10.0 * (1.0 - normalized_multiset_distance(declared_types(prompt), actual));
  s.s_plau = overlap_score(metrics::collision_rate(program));
  return s;
}

HttpScorer::HttpScorer(HttpScorerOptions options) : options_(std::move(options)) {}

SemanticScores HttpScorer::score(std::string_view prompt, const BlockProgram&,
                                 const Raster& raster) const {
  const std::string& url = options_.url;
  const auto scheme_end = url.find("://");
  if (url.rfind("http://", 0) != 0) {
    throw Error(Errc::ExternalScorerUnavailable, "only http:// scorer URLs are supported: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string host = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  nlohmann::json body = {{"prompt", std::string(prompt)},
                         {"image_png_b64", base64_encode(encode_png(raster))}};
  const std::string payload = body.dump();

  httplib::Client client(host);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
    const auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const auto reply = nlohmann::json::parse(res->body);
      const double align = reply.at("semantic_alignment").get<double>();
      const double plau = reply.at("global_plausibility").get<double>();
      if (!(align >= 0.0 && align <= 10.0 && plau >= 0.0 && plau <= 10.0)) {
        throw Error(Errc::ExternalScorerUnavailable, "scorer returned values outside [0, 10]");
      }
      return {align, plau};
    } catch (const nlohmann::json::exception& ex) {
      throw Error(Errc::ExternalScorerUnavailable, std::string("malformed scorer reply: ") + ex.what());
    }
  }
  throw Error(Errc::ExternalScorerUnavailable, "scorer at " + url + " unavailable: " + last_error);
}

SpatialScore score_spatial(const BlockProgram& program, std::string_view prompt,
                           const SemanticScorer& scorer, const ScoringOptions& options) {
  SpatialScore score;
  score.s_overlap = score_overlap(program, options.overlap_scope);
  score.s_density = score_density(program, options.band);

  const Raster raster = render_topdown(program, options.raster_resolution, options.palette);
  SemanticScores semantic;
  score.semantic_source = scorer.source();
  try {
    semantic = scorer.score(prompt, program, raster);
  } catch (const Error& ex) {
    if (ex.code() != Errc::ExternalScorerUnavailable || !options.allow_stub_fallback) throw;
    semantic = StubScorer{}.score(prompt, program, raster);
    score.semantic_source = SemanticSource::Stub;
  }
  score.s_align = std::clamp(semantic.s_align, 0.0, 10.0);
  score.s_plau = std::clamp(semantic.s_plau, 0.0, 10.0);
  score.s_spatial = combine(score, options.weights);
  return score;
}

std::vector<PreferencePair> build_preference_pairs(
    const std::vector<std::pair<BlockProgram, SpatialScore>>& candidates, double threshold) {
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < candidates.size(); ++j) {
      const auto* hi = &candidates[i];
      const auto* lo = &candidates[j];
      if (lo->second.s_spatial > hi->second.s_spatial) std::swap(hi, lo);
      const double margin = hi->second.s_spatial - lo->second.s_spatial;
      if (margin < threshold) continue;
      pairs.push_back({hi->first, lo->first, hi->second, lo->second, margin});
    }
  }
  return pairs;
}

std::string_view to_string(SemanticSource source) {
  return source == SemanticSource::Stub ? "stub" : "external";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

}  // namespace cityforge::scoring
