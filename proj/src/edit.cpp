#include "cityforge/edit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "cityforge/data.hpp"
#include "cityforge/error.hpp"
#include "cityforge/geometry.hpp"
#include "cityforge/scoring.hpp"
#include "json.hpp"

namespace cityforge::edit {
namespace {

using Json = nlohmann::ordered_json;

struct VerbSpec {
  Verb verb;
  std::string_view name;
  std::vector<std::string> positional;
  std::vector<std::string> optional;
};

const std::vector<VerbSpec>& specs() {
  static const std::vector<VerbSpec> table = {
      {Verb::SetFloorCount, "set_floor_count", {"floors"}, {}},
      {Verb::ScaleDensity, "scale_density", {"density"}, {"allow_move"}},
      {Verb::SetStyle, "set_style", {"style"}, {}},
      {Verb::SetComponent, "set_component", {"type", "description"}, {}},
      {Verb::AddElement, "add_element", {"id", "type"}, {"polygon", "floors", "facade"}},
      {Verb::RemoveElement, "remove_element", {}, {}},
      {Verb::RetypeElement, "retype_element", {"type"}, {}},
  };
  return table;
}

const VerbSpec& spec_of(Verb verb) {
  for (const auto& s : specs()) {
    if (s.verb == verb) return s;
  }
  throw Error(Errc::UnknownVerb, "unknown verb");
}

std::string verb_list() {
  std::string out;
  for (const auto& s : specs()) {
    if (!out.empty()) out += ", ";
    out += s.name;
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string number_text(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> parse_long(std::string_view s) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  return std::nullopt;
}

std::optional<std::vector<Vec2>> parse_polygon(std::string_view text) {
  std::vector<Vec2> pts;
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '[') {
    try {
      const Json j = Json::parse(t);
      if (!j.is_array()) return std::nullopt;
      for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) return std::nullopt;
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
      }
    } catch (const Json::exception&) {
      return std::nullopt;
    }
    return pts;
  }
  std::stringstream ss(t);
  std::string pair;
  while (std::getline(ss, pair, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos) return std::nullopt;
    const auto x = parse_double(trim(std::string_view(pair).substr(0, comma)));
    const auto y = parse_double(trim(std::string_view(pair).substr(comma + 1)));
    if (!x || !y) return std::nullopt;
    pts.push_back({*x, *y});
  }
  return pts;
}

// Checks keys and value shapes; ranges are checked when the edit is applied.
void check_arguments(const EditCommand& cmd) {
  const VerbSpec& spec = spec_of(cmd.verb);
  if (cmd.target.empty()) throw Error(Errc::BadArguments, std::string(spec.name) + " needs a target");
  for (const auto& [key, value] : cmd.arguments) {
    const bool known = std::find(spec.positional.begin(), spec.positional.end(), key) != spec.positional.end() ||
                       std::find(spec.optional.begin(), spec.optional.end(), key) != spec.optional.end();
    if (!known) {
      throw Error(Errc::BadArguments, std::string(spec.name) + " does not take '" + key + "'", key);
    }
  }
  for (const auto& key : spec.positional) {
    if (!cmd.arguments.contains(key)) {
      throw Error(Errc::BadArguments, std::string(spec.name) + " needs '" + key + "'", key);
    }
  }
  if (cmd.verb == Verb::AddElement && !cmd.arguments.contains("polygon")) {
    throw Error(Errc::BadArguments, "add_element needs 'polygon'", "polygon");
  }
  auto arg = [&](const std::string& k) -> const std::string* {
    const auto it = cmd.arguments.find(k);
    return it == cmd.arguments.end() ? nullptr : &it->second;
  };
  if (const auto* v = arg("floors"); v && !parse_long(*v)) {
    throw Error(Errc::BadArguments, "floors must be an integer, got '" + *v + "'", "floors");
  }
  if (const auto* v = arg("density"); v && !parse_double(*v)) {
    throw Error(Errc::BadArguments, "density must be a number, got '" + *v + "'", "density");
  }
  if (const auto* v = arg("allow_move"); v && !parse_bool(*v)) {
    throw Error(Errc::BadArguments, "allow_move must be true or false", "allow_move");
  }
  if (const auto* v = arg("polygon"); v && !parse_polygon(*v)) {
    throw Error(Errc::BadArguments, "polygon must be [[x,y],...] or 'x,y;x,y;...'", "polygon");
  }
}

struct Token {
  std::string text;
  std::optional<std::size_t> eq;  // first unquoted '='
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  Token cur;
  bool in_token = false;
  char quote = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else if (c == '\\' && quote == '"' && i + 1 < text.size()) {
        cur.text.push_back(text[++i]);
      } else {
        cur.text.push_back(c);
      }
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (in_token) tokens.push_back(std::move(cur));
      cur = {};
      in_token = false;
      continue;
    }
    in_token = true;
    if (c == '"' || c == '\'') {
      quote = c;
    } else {
      if (c == '=' && !cur.eq) cur.eq = cur.text.size();
      cur.text.push_back(c);
    }
  }
  if (quote) throw Error(Errc::BadArguments, "unterminated quote");
  if (in_token) tokens.push_back(std::move(cur));
  return tokens;
}

std::string quote_if_needed(const std::string& v) {
  const bool plain = !v.empty() && v.find_first_of(" \t\r\n\"'=\\") == std::string::npos;
  if (plain) return v;
  std::string out = "\"";
  for (const char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

// ---- JSON forms used in diffs ----

std::string escape_segment(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out.push_back(c);
  }
  return out;
}

std::string unescape_segment(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '~' && i + 1 < s.size() && (s[i + 1] == '0' || s[i + 1] == '1')) {
      out.push_back(s[i + 1] == '0' ? '~' : '/');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  if (path.empty() || path[0] != '/') throw Error(Errc::InvalidArgument, "diff path must start with '/'");
  std::size_t start = 1;
  while (true) {
    const auto slash = path.find('/', start);
    parts.push_back(unescape_segment(path.substr(start, slash == std::string_view::npos ? slash : slash - start)));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

Json polygon_json(const Footprint& fp) {
  Json arr = Json::array();
  for (const Vec2& p : fp.vertices) arr.push_back({p.x, p.y});
  return arr;
}

Footprint polygon_from(const Json& j) {
  Footprint fp;
  for (const auto& p : j) fp.vertices.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return fp;
}

Json element_json(const BlockElement& e) {
  Json j;
  j["id"] = e.id;
  j["type"] = e.type;
  j["polygon"] = polygon_json(e.polygon);
  if (e.floor_count) j["floor_count"] = *e.floor_count;
  if (e.facade) j["facade"] = *e.facade;
  return j;
}

BlockElement element_from(const Json& j) {
  BlockElement e;
  e.id = j.at("id").get<std::string>();
  e.type = j.at("type").get<std::string>();
  e.polygon = polygon_from(j.at("polygon"));
  if (j.contains("floor_count")) e.floor_count = j["floor_count"].get<int>();
  if (j.contains("facade")) e.facade = j["facade"].get<std::string>();
  return e;
}

Json region_json(const Region& r) {
  return {{"origin", {r.origin.x, r.origin.y}}, {"width", r.width}, {"height", r.height}};
}

Region region_from(const Json& j) {
  return {{j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()},
          j.at("width").get<double>(),
          j.at("height").get<double>()};
}

Json building_json(const BuildingProgram& b) {
  Json j;
  if (b.source_facade) j["facade"] = *b.source_facade;
  Json comps = Json::array();
  for (const auto& c : b.components) comps.push_back({c.component_type, c.description});
  j["components"] = comps;
  return j;
}

BuildingProgram building_from(const Json& j) {
  BuildingProgram b;
  if (j.contains("facade")) b.source_facade = j["facade"].get<std::string>();
  for (const auto& c : j.at("components")) b.components.push_back({c.at(0).get<std::string>(), c.at(1).get<std::string>()});
  return b;
}

std::optional<std::string> dumped(const std::optional<Json>& j) {
  if (!j) return std::nullopt;
  return j->dump();
}

template <typename T>
std::optional<Json> opt_json(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  return Json(*v);
}

void push_if_changed(std::vector<DiffEntry>& out, std::string path, const std::optional<Json>& before,
                     const std::optional<Json>& after) {
  if (before == after) return;
  out.push_back({std::move(path), dumped(before), dumped(after)});
}

std::vector<std::string> ids_of(const BlockProgram& p) {
  std::vector<std::string> ids;
  for (const auto& e : p.elements) ids.push_back(e.id);
  return ids;
}

std::vector<std::string> types_of(const BuildingProgram& b) {
  std::vector<std::string> types;
  for (const auto& c : b.components) types.push_back(c.component_type);
  return types;
}

Json parse_value(const std::optional<std::string>& text) {
  if (!text) return nullptr;
  return Json::parse(*text);
}

// ---- edit helpers ----

BlockElement& element_for(CityProgram& city, const std::string& id) {
  BlockElement* e = city.block.find(id);
  if (!e) throw Error(Errc::UnknownTarget, "no element with id '" + id + "'", id);
  return *e;
}

BlockElement& building_for(CityProgram& city, const std::string& id) {
  BlockElement& e = element_for(city, id);
  if (!e.is_building()) throw Error(Errc::InvalidArgument, "element '" + id + "' is not a building", id);
  return e;
}

void require_block_target(const EditCommand& cmd) {
  if (cmd.target != "block") {
    throw Error(Errc::InvalidArgument, std::string(to_string(cmd.verb)) + " applies to the block; use target 'block'");
  }
}

void set_component(BuildingProgram& program, const std::string& type, const std::string& description) {
  for (auto& c : program.components) {
    if (c.component_type == type) {
      c.description = description;
      return;
    }
  }
  program.components.push_back({type, description});
}

bool inside_region(const Region& region, const std::vector<Vec2>& pts) {
  const auto box = region.box();
  const double tol = geometry::kEpsilon;
  return std::all_of(pts.begin(), pts.end(), [&](Vec2 p) {
    return p.x >= box.x_min - tol && p.x <= box.x_max + tol && p.y >= box.y_min - tol && p.y <= box.y_max + tol;
  });
}

void apply_style(CityProgram& city, BlockElement& e, const StyleEntry& style) {
  e.facade = style.facade;
  if (style.floor_cap && e.floor_count && *e.floor_count > *style.floor_cap) e.floor_count = *style.floor_cap;
  BuildingProgram& program = city.buildings[e.id];
  for (const auto& [type, description] : style.components) set_component(program, type, description);
}

// ---- density ----

class DensityScaler {
 public:
  DensityScaler(BlockProgram& block, bool allow_move) : block_(block), allow_move_(allow_move) {
    const std::size_t n = block_.elements.size();
    orig_.reserve(n);
    for (const auto& e : block_.elements) orig_.push_back(e.polygon);
    scale_.assign(n, 1.0);
    offset_.assign(n, Vec2{});
    current_ = orig_;
    const double pairs = std::max(1.0, 0.5 * static_cast<double>(n) * static_cast<double>(n > 0 ? n - 1 : 0));
    tolerance_ = 1e-10 * block_.region.area() / pairs;
    orig_overlap_.assign(n, std::vector<double>(n, -1.0));
    now_overlap_.assign(n, std::vector<double>(n, 0.0));
  }

  /// Returns false when nothing could change without adding overlap.
  bool run(double target, std::vector<std::string>& warnings) {
    const double d = scoring::coverage(block_);
    const double s = std::sqrt(target / d);
    for (std::size_t i = 0; i < block_.elements.size(); ++i) {
      if (!block_.elements[i].is_building()) continue;
      scale_[i] = std::min(s, max_scale(i));
      if (!realize(i)) {
        warnings.push_back("element '" + block_.elements[i].id + "' cannot be rescaled; kept as is");
        freeze(i);
      }
    }
    for (std::size_t i = 0; i < current_.size(); ++i) refresh_row(i);

    const std::size_t cap = 64 * std::max<std::size_t>(1, current_.size()) + 64;
    std::vector<bool> move_tried(current_.size(), false);
    std::size_t iter = 0;
    for (; iter < cap; ++iter) {
      const auto excess = excess_per_element();
      std::optional<std::size_t> worst;
      for (std::size_t i = 0; i < excess.size(); ++i) {
        if (excess[i] <= 0.0 || !adjustable(i)) continue;
        if (!worst || excess[i] > excess[*worst] ||
            (excess[i] == excess[*worst] && block_.elements[i].id < block_.elements[*worst].id)) {
          worst = i;
        }
      }
      if (!worst) break;
      const std::size_t k = *worst;
      if (allow_move_ && !move_tried[k]) {
        move_tried[k] = true;
        if (try_moves(k)) continue;
      }
      scale_[k] = 0.5 * (scale_[k] + 1.0);
      if (std::abs(scale_[k] - 1.0) < 1e-3 || !realize(k)) freeze(k);
      refresh_row(k);
    }
    if (iter == cap) {
      warnings.push_back("overlap repair did not converge; layout left unchanged");
      for (std::size_t i = 0; i < current_.size(); ++i) freeze(i);
    }

    bool changed = false;
    for (std::size_t i = 0; i < current_.size(); ++i) {
      block_.elements[i].polygon = current_[i];
      changed = changed || current_[i] != orig_[i];
    }
    return changed;
  }

 private:
  bool adjustable(std::size_t i) const { return scale_[i] != 1.0 || offset_[i] != Vec2{}; }

  void freeze(std::size_t i) {
    scale_[i] = 1.0;
    offset_[i] = Vec2{};
    current_[i] = orig_[i];
  }

  // Largest scale that keeps the element's AABB inside the region. When moves
  // are allowed the element only has to fit; realize() pushes it back inside.
  double max_scale(std::size_t i) const {
    const auto& v = orig_[i].vertices;
    if (allow_move_) {
      const auto b = orig_[i].bounds();
      const auto box = block_.region.box();
      double limit = std::numeric_limits<double>::infinity();
      if (b.x_max > b.x_min) limit = std::min(limit, (box.x_max - box.x_min) / (b.x_max - b.x_min));
      if (b.y_max > b.y_min) limit = std::min(limit, (box.y_max - box.y_min) / (b.y_max - b.y_min));
      return std::max(1.0, limit);
    }
    const Vec2 c = geometry::centroid(v);
    const auto box = block_.region.box();
    double limit = std::numeric_limits<double>::infinity();
    for (const Vec2& p : v) {
      const Vec2 d = p - c;
      if (d.x > 0) limit = std::min(limit, (box.x_max - c.x) / d.x);
      if (d.x < 0) limit = std::min(limit, (box.x_min - c.x) / d.x);
      if (d.y > 0) limit = std::min(limit, (box.y_max - c.y) / d.y);
      if (d.y < 0) limit = std::min(limit, (box.y_min - c.y) / d.y);
    }
    return std::max(1.0, limit);
  }

  bool realize(std::size_t i) {
    if (scale_[i] == 1.0 && offset_[i] == Vec2{}) {
      current_[i] = orig_[i];
      return true;
    }
    const auto& v = orig_[i].vertices;
    const Vec2 c = geometry::centroid(v);
    std::vector<Vec2> raw;
    for (const Vec2& p : v) raw.push_back(c + (p - c) * scale_[i] + offset_[i]);
    if (allow_move_) {
      const auto box = block_.region.box();
      Vec2 lo = raw.front(), hi = raw.front();
      for (const Vec2& q : raw) {
        lo = {std::min(lo.x, q.x), std::min(lo.y, q.y)};
        hi = {std::max(hi.x, q.x), std::max(hi.y, q.y)};
      }
      Vec2 shift{};
      if (lo.x < box.x_min) shift.x = box.x_min - lo.x;
      else if (hi.x > box.x_max) shift.x = box.x_max - hi.x;
      if (lo.y < box.y_min) shift.y = box.y_min - lo.y;
      else if (hi.y > box.y_max) shift.y = box.y_max - hi.y;
      for (Vec2& q : raw) q = q + shift;
    }
    Footprint fp;
    for (const Vec2& q : raw) fp.vertices.push_back({quantize(q.x), quantize(q.y)});
    if (polygon_issue(fp, "") || !inside_region(block_.region, fp.vertices)) return false;
    current_[i] = std::move(fp);
    return true;
  }

  double orig_overlap(std::size_t i, std::size_t j) {
    double& cached = orig_overlap_[i][j];
    if (cached < 0.0) {
      cached = intersection(orig_[i], orig_[j]);
      orig_overlap_[j][i] = cached;
    }
    return cached;
  }

  static double intersection(const Footprint& a, const Footprint& b) {
    if (geometry::aabb_intersection_area(a.bounds(), b.bounds()) <= 0.0) return 0.0;
    return geometry::polygon_intersection_area(a.vertices, b.vertices);
  }

  void refresh_row(std::size_t i) {
    for (std::size_t j = 0; j < current_.size(); ++j) {
      if (j == i) continue;
      const double a = intersection(current_[i], current_[j]);
      now_overlap_[i][j] = a;
      now_overlap_[j][i] = a;
    }
  }

  std::vector<double> excess_per_element() {
    std::vector<double> excess(current_.size(), 0.0);
    for (std::size_t i = 0; i < current_.size(); ++i) {
      for (std::size_t j = i + 1; j < current_.size(); ++j) {
        if (now_overlap_[i][j] <= 0.0) continue;
        const double over = now_overlap_[i][j] - orig_overlap(i, j);
        if (over > tolerance_) {
          excess[i] += over;
          excess[j] += over;
        }
      }
    }
    return excess;
  }

  double excess_of(std::size_t i) {
    double total = 0.0;
    for (std::size_t j = 0; j < current_.size(); ++j) {
      if (j == i) continue;
      const double over = intersection(current_[i], current_[j]) - orig_overlap(i, j);
      if (over > tolerance_) total += over;
    }
    return total;
  }

  bool try_moves(std::size_t k) {
    if (!block_.elements[k].is_building()) return false;
    const Footprint keep = current_[k];
    const Vec2 keep_offset = offset_[k];
    for (const double step : {0.5, 1.0, 2.0, 4.0}) {
      for (const Vec2 dir : {Vec2{1, 0}, Vec2{-1, 0}, Vec2{0, 1}, Vec2{0, -1}}) {
        offset_[k] = keep_offset + dir * step;
        if (realize(k) && excess_of(k) <= 0.0) {
          refresh_row(k);
          return true;
        }
      }
    }
    offset_[k] = keep_offset;
    current_[k] = keep;
    return false;
  }

  BlockProgram& block_;
  bool allow_move_;
  std::vector<Footprint> orig_;
  std::vector<Footprint> current_;
  std::vector<double> scale_;
  std::vector<Vec2> offset_;
  std::vector<std::vector<double>> orig_overlap_;
  std::vector<std::vector<double>> now_overlap_;
  double tolerance_ = 0.0;
};

void scale_density(CityProgram& city, double target, bool allow_move, std::vector<std::string>& warnings) {
  BlockProgram& block = city.block;
  const double d = scoring::coverage(block);
  if (std::abs(d - target) < 1e-6) return;
  const bool any_building =
      std::any_of(block.elements.begin(), block.elements.end(), [](const auto& e) { return e.is_building(); });
  if (!any_building || !(d > 0.0)) {
    throw Error(Errc::InfeasibleDensity, "no buildings to rescale toward the target density");
  }
  DensityScaler scaler(block, allow_move);
  if (!scaler.run(target, warnings)) {
    throw Error(Errc::InfeasibleDensity,
                "coverage cannot move toward " + number_text(target) +
                    " without adding overlap or leaving the region");
  }
  const double reached = scoring::coverage(block);
  if (std::abs(reached - target) > 1e-3) {
    warnings.push_back("coverage reached " + number_text(reached) + " (target " + number_text(target) + ")");
  }
}

}  // namespace

std::string_view to_string(Verb verb) { return spec_of(verb).name; }

std::optional<Verb> verb_from_string(std::string_view name) {
  for (const auto& s : specs()) {
    if (s.name == name) return s.verb;
  }
  return std::nullopt;
}

const std::vector<Verb>& all_verbs() {
  static const std::vector<Verb> verbs = [] {
    std::vector<Verb> v;
    for (const auto& s : specs()) v.push_back(s.verb);
    return v;
  }();
  return verbs;
}

EditCommand parse_edit_command(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(Errc::UnknownVerb, "empty command; verbs are: " + verb_list());
  const auto verb = verb_from_string(tokens[0].text);
  if (!verb) {
    throw Error(Errc::UnknownVerb, "unknown verb '" + tokens[0].text + "'; verbs are: " + verb_list());
  }
  EditCommand cmd;
  cmd.verb = *verb;
  if (tokens.size() < 2 || tokens[1].eq) throw Error(Errc::BadArguments, tokens[0].text + " needs a target");
  cmd.target = tokens[1].text;
  const VerbSpec& spec = spec_of(cmd.verb);
  std::size_t next_positional = 0;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    std::string key;
    std::string value;
    if (t.eq) {
      key = t.text.substr(0, *t.eq);
      value = t.text.substr(*t.eq + 1);
    } else {
      if (next_positional >= spec.positional.size()) {
        throw Error(Errc::BadArguments, "too many arguments for " + std::string(spec.name));
      }
      key = spec.positional[next_positional++];
      value = t.text;
    }
    if (!cmd.arguments.emplace(key, value).second) {
      throw Error(Errc::BadArguments, "argument '" + key + "' given twice", key);
    }
  }
  check_arguments(cmd);
  return cmd;
}

EditCommand command_from_json(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text.begin(), json_text.end());
  } catch (const Json::exception& e) {
    throw Error(Errc::BadArguments, std::string("command is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("verb") || !j["verb"].is_string()) {
    throw Error(Errc::BadArguments, "command needs a string 'verb'");
  }
  const auto verb = verb_from_string(j["verb"].get<std::string>());
  if (!verb) {
    throw Error(Errc::UnknownVerb,
                "unknown verb '" + j["verb"].get<std::string>() + "'; verbs are: " + verb_list());
  }
  EditCommand cmd;
  cmd.verb = *verb;
  if (!j.contains("target") || !j["target"].is_string()) throw Error(Errc::BadArguments, "command needs a string 'target'");
  cmd.target = j["target"].get<std::string>();
  const Json args = j.value("arguments", Json::object());
  if (!args.is_object()) throw Error(Errc::BadArguments, "'arguments' must be an object");
  for (const auto& [key, value] : args.items()) {
    if (value.is_string()) cmd.arguments[key] = value.get<std::string>();
    else if (value.is_number_integer()) cmd.arguments[key] = std::to_string(value.get<long long>());
    else if (value.is_number()) cmd.arguments[key] = number_text(value.get<double>());
    else if (value.is_boolean()) cmd.arguments[key] = value.get<bool>() ? "true" : "false";
    else if (value.is_array()) cmd.arguments[key] = value.dump();
    else throw Error(Errc::BadArguments, "unsupported value for '" + key + "'", key);
  }
  check_arguments(cmd);
  return cmd;
}

std::string format_command(const EditCommand& command) {
  std::string out(to_string(command.verb));
  out += ' ';
  out += quote_if_needed(command.target);
  for (const auto& [key, value] : command.arguments) out += ' ' + key + '=' + quote_if_needed(value);
  return out;
}

StyleLexicon StyleLexicon::from_json(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {
    throw Error(Errc::BadConfig, std::string("style lexicon is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(Errc::BadConfig, "style lexicon must be an object");
  StyleLexicon lex;
  for (const auto& [name, body] : root.items()) {
    StyleEntry entry;
    entry.facade = body.value("facade", std::string());
    if (entry.facade.empty()) throw Error(Errc::BadConfig, "style '" + name + "' needs a facade", name);
    const Json components = body.value("components", Json::object());
    for (const auto& [type, desc] : components.items()) {
      entry.components[canonical_component_type(type)] = desc.get<std::string>();
    }
    if (body.contains("floor_cap")) {
      const int cap = body["floor_cap"].get<int>();
      if (cap < 1) throw Error(Errc::BadConfig, "style '" + name + "' has a floor_cap below 1", name);
      entry.floor_cap = cap;
    }
    lex.styles[name] = std::move(entry);
  }
  return lex;
}

const StyleLexicon& StyleLexicon::builtin() {
  static const StyleLexicon lex = from_json(data::styles_json());
  return lex;
}

const StyleEntry* StyleLexicon::find(std::string_view name) const {
  std::string key;
  for (const char c : trim(name)) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto it = styles.find(key);
  return it == styles.end() ? nullptr : &it->second;
}

EditResult apply_edit(const CityProgram& program, const EditCommand& command, const EditOptions& options) {
  check_arguments(command);
  const StyleLexicon& styles = options.styles ? *options.styles : StyleLexicon::builtin();
  EditResult result;
  result.after = program;
  CityProgram& city = result.after;
  const auto& args = command.arguments;
  auto arg = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = args.find(key);
    if (it == args.end()) return std::nullopt;
    return it->second;
  };

  switch (command.verb) {
    case Verb::SetFloorCount: {
      BlockElement& e = building_for(city, command.target);
      const long floors = *parse_long(*arg("floors"));
      if (floors < 1 || floors > kMaxFloorCount) {
        throw Error(Errc::InvalidArgument, "floors must be in [1, " + std::to_string(kMaxFloorCount) + "]", "floors");
      }
      e.floor_count = static_cast<int>(floors);
      break;
    }
    case Verb::ScaleDensity: {
      require_block_target(command);
      const double target = *parse_double(*arg("density"));
      if (!(target > 0.0 && target <= 1.0)) {
        throw Error(Errc::InvalidArgument, "density must be in (0, 1]", "density");
      }
      const bool allow_move = options.allow_move || (arg("allow_move") && *parse_bool(*arg("allow_move")));
      scale_density(city, target, allow_move, result.warnings);
      break;
    }
    case Verb::SetStyle: {
      const std::string name = *arg("style");
      const StyleEntry* style = styles.find(name);
      if (!style) {
        std::string known;
        for (const auto& [k, v] : styles.styles) known += (known.empty() ? "" : ", ") + k;
        throw Error(Errc::InvalidArgument, "unknown style '" + name + "'; known styles: " + known, "style");
      }
      if (command.target == "block") {
        for (auto& e : city.block.elements) {
          if (e.is_building()) apply_style(city, e, *style);
        }
      } else {
        apply_style(city, building_for(city, command.target), *style);
      }
      break;
    }
    case Verb::SetComponent: {
      BlockElement& e = building_for(city, command.target);
      const std::string type = canonical_component_type(*arg("type"));
      const std::string description = trim(*arg("description"));
      if (type.empty()) throw Error(Errc::InvalidArgument, "component type is empty", "type");
      if (description.empty()) throw Error(Errc::InvalidArgument, "component description is empty", "description");
      set_component(city.buildings[e.id], type, description);
      break;
    }
    case Verb::AddElement: {
      require_block_target(command);
      BlockElement e;
      e.id = trim(*arg("id"));
      e.type = trim(*arg("type"));
      if (e.id.empty()) throw Error(Errc::InvalidArgument, "id is empty", "id");
      if (e.type.empty()) throw Error(Errc::InvalidArgument, "type is empty", "type");
      if (city.block.find(e.id)) throw Error(Errc::InvalidArgument, "element '" + e.id + "' already exists", "id");
      std::vector<Diagnostic> notes;
      e.polygon = normalize_polygon(*parse_polygon(*arg("polygon")), "polygon", &notes);
      for (const auto& n : notes) result.warnings.push_back(n.message);
      if (auto issue = polygon_issue(e.polygon, "polygon")) {
        throw Error(Errc::InvalidArgument, "bad polygon: " + issue->message, "polygon");
      }
      if (!inside_region(city.block.region, e.polygon.vertices)) {
        throw Error(Errc::InvalidArgument, "polygon leaves the block region", "polygon");
      }
      if (const auto floors = arg("floors")) {
        if (!e.is_building()) throw Error(Errc::InvalidArgument, "greenspaces have no floors", "floors");
        const long f = *parse_long(*floors);
        if (f < 1 || f > kMaxFloorCount) throw Error(Errc::InvalidArgument, "floors out of range", "floors");
        e.floor_count = static_cast<int>(f);
      }
      if (const auto facade = arg("facade")) {
        if (!e.is_building()) throw Error(Errc::InvalidArgument, "greenspaces have no facade", "facade");
        e.facade = *facade;
      }
      city.block.elements.push_back(std::move(e));
      break;
    }
    case Verb::RemoveElement: {
      element_for(city, command.target);
      auto& elements = city.block.elements;
      elements.erase(std::remove_if(elements.begin(), elements.end(),
                                    [&](const BlockElement& x) { return x.id == command.target; }),
                     elements.end());
      city.buildings.erase(command.target);
      break;
    }
    case Verb::RetypeElement: {
      BlockElement& e = element_for(city, command.target);
      const std::string type = trim(*arg("type"));
      if (type.empty()) throw Error(Errc::InvalidArgument, "type is empty", "type");
      e.type = type;
      if (!e.is_building()) {
        if (e.floor_count || e.facade || city.buildings.contains(e.id)) {
          result.warnings.push_back("element '" + e.id + "' is now a greenspace; building fields dropped");
        }
        e.floor_count.reset();
        e.facade.reset();
        city.buildings.erase(e.id);
      }
      break;
    }
  }

  auto issues = validate(city.block);
  for (const auto& [id, bp] : city.buildings) {
    for (auto& issue : validate(bp)) issues.push_back({issue.code, "buildings/" + id + issue.path.substr(1), issue.message});
  }
  if (!issues.empty()) {
    throw Error(Errc::InvalidArgument, "edit would produce an invalid program: " + issues.front().message,
                issues.front().path);
  }
  result.diff = diff_programs(program, city);
  return result;
}

std::vector<DiffEntry> diff_programs(const CityProgram& before, const CityProgram& after) {
  std::vector<DiffEntry> out;
  push_if_changed(out, "/description", opt_json(before.block.description), opt_json(after.block.description));
  if (before.block.region != after.block.region) {
    out.push_back({"/region", region_json(before.block.region).dump(), region_json(after.block.region).dump()});
  }

  for (const auto& e : before.block.elements) {
    if (!after.block.find(e.id)) out.push_back({"/elements/" + escape_segment(e.id), element_json(e).dump(), std::nullopt});
  }
  for (const auto& a : before.block.elements) {
    const BlockElement* b = after.block.find(a.id);
    if (!b) continue;
    const std::string base = "/elements/" + escape_segment(a.id);
    push_if_changed(out, base + "/type", Json(a.type), Json(b->type));
    push_if_changed(out, base + "/polygon", polygon_json(a.polygon), polygon_json(b->polygon));
    push_if_changed(out, base + "/floor_count", opt_json(a.floor_count), opt_json(b->floor_count));
    push_if_changed(out, base + "/facade", opt_json(a.facade), opt_json(b->facade));
  }
  std::vector<std::string> replayed;
  for (const auto& e : before.block.elements) {
    if (after.block.find(e.id)) replayed.push_back(e.id);
  }
  for (const auto& e : after.block.elements) {
    if (!before.block.find(e.id)) {
      out.push_back({"/elements/" + escape_segment(e.id), std::nullopt, element_json(e).dump()});
      replayed.push_back(e.id);
    }
  }
  if (replayed != ids_of(after.block)) {
    out.push_back({"/element_order", Json(ids_of(before.block)).dump(), Json(ids_of(after.block)).dump()});
  }

  std::set<std::string> keys;
  for (const auto& [id, bp] : before.buildings) keys.insert(id);
  for (const auto& [id, bp] : after.buildings) keys.insert(id);
  for (const auto& id : keys) {
    const auto ia = before.buildings.find(id);
    const auto ib = after.buildings.find(id);
    const std::string base = "/buildings/" + escape_segment(id);
    if (ia == before.buildings.end()) {
      out.push_back({base, std::nullopt, building_json(ib->second).dump()});
      continue;
    }
    if (ib == after.buildings.end()) {
      out.push_back({base, building_json(ia->second).dump(), std::nullopt});
      continue;
    }
    const BuildingProgram& a = ia->second;
    const BuildingProgram& b = ib->second;
    push_if_changed(out, base + "/facade", opt_json(a.source_facade), opt_json(b.source_facade));
    std::vector<std::string> replayed_types;
    for (const auto& c : a.components) {
      const BuildingComponent* other = b.find(c.component_type);
      const std::string path = base + "/components/" + escape_segment(c.component_type);
      if (!other) {
        out.push_back({path, Json(c.description).dump(), std::nullopt});
      } else {
        push_if_changed(out, path, Json(c.description), Json(other->description));
        replayed_types.push_back(c.component_type);
      }
    }
    for (const auto& c : b.components) {
      if (!a.find(c.component_type)) {
        out.push_back({base + "/components/" + escape_segment(c.component_type), std::nullopt,
                       Json(c.description).dump()});
        replayed_types.push_back(c.component_type);
      }
    }
    if (replayed_types != types_of(b)) {
      out.push_back({base + "/component_order", Json(types_of(a)).dump(), Json(types_of(b)).dump()});
    }
  }
  return out;
}

CityProgram apply_diff(const CityProgram& before, const std::vector<DiffEntry>& diff) {
  CityProgram city = before;
  auto& elements = city.block.elements;
  try {
    for (const DiffEntry& entry : diff) {
      const auto parts = split_path(entry.path);
      const Json value = parse_value(entry.after);
      if (parts.size() == 1 && parts[0] == "description") {
        if (value.is_null()) city.block.description.reset();
        else city.block.description = value.get<std::string>();
      } else if (parts.size() == 1 && parts[0] == "region") {
        city.block.region = region_from(value);
      } else if (parts.size() == 1 && parts[0] == "element_order") {
        std::vector<BlockElement> reordered;
        for (const auto& id : value) {
          const BlockElement* e = city.block.find(id.get<std::string>());
          if (!e) throw Error(Errc::InvalidArgument, "element_order names unknown id");
          reordered.push_back(*e);
        }
        elements = std::move(reordered);
      } else if (parts.size() == 2 && parts[0] == "elements") {
        const std::string& id = parts[1];
        if (value.is_null()) {
          elements.erase(std::remove_if(elements.begin(), elements.end(), [&](const auto& e) { return e.id == id; }),
                         elements.end());
        } else if (BlockElement* e = city.block.find(id)) {
          *e = element_from(value);
        } else {
          elements.push_back(element_from(value));
        }
      } else if (parts.size() == 3 && parts[0] == "elements") {
        BlockElement* e = city.block.find(parts[1]);
        if (!e) throw Error(Errc::InvalidArgument, "diff names unknown element '" + parts[1] + "'");
        const std::string& field = parts[2];
        if (field == "type") e->type = value.get<std::string>();
        else if (field == "polygon") e->polygon = polygon_from(value);
        else if (field == "floor_count") e->floor_count = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
        else if (field == "facade") e->facade = value.is_null() ? std::nullopt : std::optional<std::string>(value.get<std::string>());
        else throw Error(Errc::InvalidArgument, "unknown element field '" + field + "'");
      } else if (parts.size() == 2 && parts[0] == "buildings") {
        if (value.is_null()) city.buildings.erase(parts[1]);
        else city.buildings[parts[1]] = building_from(value);
      } else if (parts.size() == 3 && parts[0] == "buildings" && parts[2] == "facade") {
        auto& b = city.buildings.at(parts[1]);
        b.source_facade = value.is_null() ? std::nullopt : std::optional<std::string>(value.get<std::string>());
      } else if (parts.size() == 3 && parts[0] == "buildings" && parts[2] == "component_order") {
        auto& b = city.buildings.at(parts[1]);
        std::vector<BuildingComponent> reordered;
        for (const auto& t : value) reordered.push_back(*b.find(t.get<std::string>()));
        b.components = std::move(reordered);
      } else if (parts.size() == 4 && parts[0] == "buildings" && parts[2] == "components") {
        auto& b = city.buildings.at(parts[1]);
        const std::string& type = parts[3];
        if (value.is_null()) {
          b.components.erase(std::remove_if(b.components.begin(), b.components.end(),
                                            [&](const auto& c) { return c.component_type == type; }),
                             b.components.end());
        } else {
          set_component(b, type, value.get<std::string>());
        }
      } else {
        throw Error(Errc::InvalidArgument, "unknown diff path '" + entry.path + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed diff value: ") + e.what());
  } catch (const std::out_of_range&) {
    throw Error(Errc::InvalidArgument, "diff names an unknown building program");
  }
  return city;
}

std::string diff_json(const std::vector<DiffEntry>& diff) {
  Json arr = Json::array();
  for (const auto& d : diff) {
    arr.push_back({{"path", d.path}, {"before", parse_value(d.before)}, {"after", parse_value(d.after)}});
  }
  return arr.dump();
}

}  // namespace cityforge::edit
