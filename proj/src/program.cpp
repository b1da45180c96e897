#include "cityforge/program.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"

namespace cityforge {

using Json = nlohmann::ordered_json;

namespace {

// Coordinates beyond this magnitude are treated like non-finite input.
constexpr double kMaxCoordinate = 1e9;

struct Collector {
  std::vector<Issue> issues;
  std::vector<Diagnostic> notes;

  void fail(Errc code, std::string path, std::string message) {
    issues.push_back({code, std::move(path), std::move(message)});
  }
  void note(std::string path, std::string message) {
    notes.push_back({std::move(path), std::move(message)});
  }
};

std::string at(const std::string& base, std::string_view key) {
  return base + "." + std::string(key);
}
std::string at(const std::string& base, std::size_t index) {
  return base + "[" + std::to_string(index) + "]";
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

Json number(double v) {
  if (v == 0.0) return 0;
  if (std::abs(v) < 9e15 && std::floor(v) == v) return static_cast<std::int64_t>(v);
  return v;
}

std::optional<Json> parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::exception&) {
    return std::nullopt;
  }
}

bool all_collinear(const std::vector<Vec2>& v) {
  for (std::size_t i = 2; i < v.size(); ++i) {
    const Vec2 a = v[1] - v[0];
    const Vec2 b = v[i] - v[0];
    if (std::abs(cross(a, b)) > geometry::kEpsilon * std::max({length(a), length(b), 1.0})) {
      return false;
    }
  }
  return true;
}

bool inside_region(const Region& region, const Footprint& polygon) {
  const auto box = region.box();
  const double tol = geometry::kEpsilon;
  return std::all_of(polygon.vertices.begin(), polygon.vertices.end(), [&](Vec2 p) {
    return p.x >= box.x_min - tol && p.x <= box.x_max + tol && p.y >= box.y_min - tol &&
           p.y <= box.y_max + tol;
  });
}

// Reads an optional field that may also be JSON null.
const Json* field(const Json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::optional<std::string> required_string(const Json& obj, std::string_view key,
                                           const std::string& path, Collector& out) {
  const Json* v = field(obj, key);
  if (v == nullptr) {
    out.fail(Errc::MissingField, at(path, key), "required field is missing");
    return std::nullopt;
  }
  if (!v->is_string() || trim(v->get<std::string>()).empty()) {
    out.fail(Errc::WrongType, at(path, key), "expected a non-empty string");
    return std::nullopt;
  }
  return v->get<std::string>();
}

std::optional<Footprint> read_polygon(const Json& obj, const std::string& path, Collector& out) {
  const std::string ppath = at(path, "polygon");
  const Json* v = field(obj, "polygon");
  if (v == nullptr) {
    out.fail(Errc::MissingField, ppath, "required field is missing");
    return std::nullopt;
  }
  if (!v->is_array()) {
    out.fail(Errc::WrongType, ppath, "expected a list of [x, y] pairs");
    return std::nullopt;
  }
  std::vector<Vec2> raw;
  raw.reserve(v->size());
  for (std::size_t i = 0; i < v->size(); ++i) {
    const Json& p = (*v)[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      out.fail(Errc::WrongType, at(ppath, i), "expected an [x, y] number pair");
      return std::nullopt;
    }
    const double x = p[0].get<double>();
    const double y = p[1].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > kMaxCoordinate ||
        std::abs(y) > kMaxCoordinate) {
      out.fail(Errc::BadPolygon, at(ppath, i), "non-finite: coordinate is not a finite value");
      return std::nullopt;
    }
    raw.push_back({x, y});
  }
  Footprint fp = normalize_polygon(std::move(raw), ppath, &out.notes);
  if (auto issue = polygon_issue(fp, ppath)) {
    out.issues.push_back(*issue);
    return std::nullopt;
  }
  return fp;
}

void read_element(const Json& obj, const std::string& path, Collector& out,
                  std::vector<BlockElement>& elements, std::vector<std::string>& paths) {
  if (!obj.is_object()) {
    out.fail(Errc::WrongType, path, "expected an element object");
    return;
  }
  const std::size_t before = out.issues.size();
  BlockElement e;
  if (auto id = required_string(obj, "id", path, out)) e.id = *id;
  if (auto type = required_string(obj, "type", path, out)) e.type = *type;
  if (auto poly = read_polygon(obj, path, out)) e.polygon = std::move(*poly);

  const bool building = e.type != kGreenspaceType;
  if (const Json* fc = field(obj, "floor_count")) {
    const std::string fpath = at(path, "floor_count");
    if (!building) {
      out.fail(Errc::FieldNotAllowed, fpath, "floor_count applies to buildings only");
    } else if (!fc->is_number() || !std::isfinite(fc->get<double>()) ||
               std::floor(fc->get<double>()) != fc->get<double>() || fc->get<double>() < 1.0 ||
               fc->get<double>() > kMaxFloorCount) {
      out.fail(Errc::BadFloorCount, fpath, "floor_count must be an integer >= 1");
    } else {
      e.floor_count = static_cast<int>(fc->get<double>());
    }
  }
  if (const Json* fa = field(obj, "facade")) {
    const std::string fpath = at(path, "facade");
    if (!building) {
      out.fail(Errc::FieldNotAllowed, fpath, "facade applies to buildings only");
    } else if (!fa->is_string()) {
      out.fail(Errc::WrongType, fpath, "expected a string");
    } else {
      e.facade = fa->get<std::string>();
    }
  }
  if (out.issues.size() == before) {
    elements.push_back(std::move(e));
    paths.push_back(path);
  }
}

void read_element_list(const Json& list, const std::string& path, Collector& out,
                       std::vector<BlockElement>& elements, std::vector<std::string>& paths) {
  if (!list.is_array()) {
    out.fail(Errc::WrongType, path, "expected a list of elements");
    return;
  }
  for (std::size_t i = 0; i < list.size(); ++i) read_element(list[i], at(path, i), out, elements, paths);
}

std::optional<Region> read_region(const Json& obj, Collector& out) {
  const Json* r = field(obj, "region");
  if (r == nullptr) return std::nullopt;
  const std::string path = "$.region";
  auto positive = [](const Json* v) {
    return v != nullptr && v->is_number() && std::isfinite(v->get<double>()) && v->get<double>() > 0.0;
  };
  if (!r->is_object() || !positive(field(*r, "width")) || !positive(field(*r, "height"))) {
    out.fail(Errc::WrongType, path, "region needs positive width and height");
    return std::nullopt;
  }
  Region region;
  region.width = quantize((*r)["width"].get<double>());
  region.height = quantize((*r)["height"].get<double>());
  if (const Json* o = field(*r, "origin")) {
    if (!o->is_array() || o->size() != 2 || !(*o)[0].is_number() || !(*o)[1].is_number()) {
      out.fail(Errc::WrongType, at(path, "origin"), "expected an [x, y] pair");
      return std::nullopt;
    }
    region.origin = {quantize((*o)[0].get<double>()), quantize((*o)[1].get<double>())};
  }
  return region;
}

struct BlockDraft {
  std::vector<BlockElement> elements;
  std::vector<std::string> paths;
  std::optional<Region> region;
  std::optional<std::string> description;
};

BlockDraft collect_block(const Json& root, Collector& out) {
  BlockDraft draft;
  const Json* wrapper = nullptr;
  if (root.is_array()) {
    if (root.size() == 1 && root[0].is_object() && root[0].contains("layout")) {
      wrapper = &root[0];
    } else {
      read_element_list(root, "$", out, draft.elements, draft.paths);
    }
  } else if (root.is_object()) {
    wrapper = &root;
  } else {
    out.fail(Errc::UnknownForm, "$", "expected an element list or a layout object");
  }

  if (wrapper != nullptr) {
    const std::string base = wrapper == &root ? "$" : "$[0]";
    if (const Json* d = field(*wrapper, "description"); d != nullptr && d->is_string()) {
      draft.description = d->get<std::string>();
    }
    draft.region = read_region(*wrapper, out);
    if (const Json* layout = field(*wrapper, "layout")) {
      const std::string lpath = at(base, "layout");
      if (!layout->is_object()) {
        out.fail(Errc::WrongType, lpath, "expected an object with buildings and greenspaces");
      } else {
        if (const Json* b = field(*layout, "buildings")) {
          read_element_list(*b, at(lpath, "buildings"), out, draft.elements, draft.paths);
        }
        if (const Json* g = field(*layout, "greenspaces")) {
          read_element_list(*g, at(lpath, "greenspaces"), out, draft.elements, draft.paths);
        }
      }
    } else if (const Json* list = field(*wrapper, "elements")) {
      read_element_list(*list, at(base, "elements"), out, draft.elements, draft.paths);
    } else {
      out.fail(Errc::MissingField, at(base, "layout"), "expected a layout or elements key");
    }
  }

  std::set<std::string> seen;
  for (std::size_t i = 0; i < draft.elements.size(); ++i) {
    if (!seen.insert(draft.elements[i].id).second) {
      out.fail(Errc::DuplicateId, at(draft.paths[i], "id"),
               "duplicate element id '" + draft.elements[i].id + "'");
    }
  }
  if (draft.region) {
    for (std::size_t i = 0; i < draft.elements.size(); ++i) {
      if (!inside_region(*draft.region, draft.elements[i].polygon)) {
        out.fail(Errc::OutOfRegion, at(draft.paths[i], "polygon"), "polygon leaves the block region");
      }
    }
  }
  return draft;
}

struct BuildingDraft {
  std::vector<BuildingComponent> components;
  std::optional<std::string> facade;
};

void add_component(BuildingDraft& draft, std::string type, std::string description,
                   const std::string& path, Collector& out) {
  type = canonical_component_type(type);
  description = trim(description);
  if (type.empty()) {
    out.fail(Errc::WrongType, path, "component type must be a non-empty string");
    return;
  }
  if (description.empty()) {
    out.fail(Errc::EmptyDescription, path, "empty description for component '" + type + "'");
    return;
  }
  for (BuildingComponent& c : draft.components) {
    if (c.component_type == type) {
      out.note(path, "duplicate component '" + type + "'; last occurrence wins");
      c.description = std::move(description);
      return;
    }
  }
  draft.components.push_back({std::move(type), std::move(description)});
}

void read_component_map(const Json& map, const std::string& path, BuildingDraft& draft,
                        Collector& out) {
  for (const auto& [key, value] : map.items()) {
    const std::string cpath = at(path, key);
    if (!value.is_string()) {
      out.fail(Errc::WrongType, cpath, "component description must be a string");
      continue;
    }
    add_component(draft, key, value.get<std::string>(), cpath, out);
  }
}

BuildingDraft collect_building(const Json& root, Collector& out) {
  BuildingDraft draft;
  const Json* wrapper = nullptr;
  std::string base = "$";
  if (root.is_array() && root.size() == 1 && root[0].is_object() && root[0].contains("output")) {
    wrapper = &root[0];
    base = "$[0]";
  } else if (root.is_object() && root.contains("output")) {
    wrapper = &root;
  }

  if (wrapper != nullptr) {
    if (const Json* f = field(*wrapper, "facade"); f != nullptr && f->is_string()) {
      draft.facade = f->get<std::string>();
    }
    const Json& output = (*wrapper)["output"];
    if (!output.is_object()) {
      out.fail(Errc::UnknownForm, at(base, "output"), "expected a component map");
      return draft;
    }
    read_component_map(output, at(base, "output"), draft, out);
  } else if (root.is_object()) {
    read_component_map(root, "$", draft, out);
  } else if (root.is_array()) {
    for (std::size_t i = 0; i < root.size(); ++i) {
      const Json& c = root[i];
      const std::string cpath = at(std::string("$"), i);
      if (!c.is_object()) {
        out.fail(Errc::UnknownForm, cpath, "expected component objects with type and description");
        continue;
      }
      const auto type = required_string(c, "type", cpath, out);
      const Json* d = field(c, "description");
      if (d == nullptr) {
        out.fail(Errc::MissingField, at(cpath, "description"), "required field is missing");
        continue;
      }
      if (!d->is_string()) {
        out.fail(Errc::WrongType, at(cpath, "description"), "expected a string");
        continue;
      }
      if (type) add_component(draft, *type, d->get<std::string>(), cpath, out);
    }
  } else {
    out.fail(Errc::UnknownForm, "$", "expected a component list or map");
  }
  return draft;
}

[[noreturn]] void raise(const Issue& issue) { throw Error(issue.code, issue.message, issue.path); }

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

double quantize(double v) {
  if (!std::isfinite(v) || std::abs(v) >= kMaxCoordinate) return v;
  const double q = std::round(v / kCoordinateQuantum) / 1e6;
  return q == 0.0 ? 0.0 : q;
}

const BlockElement* BlockProgram::find(std::string_view id) const {
  for (const auto& e : elements) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

BlockElement* BlockProgram::find(std::string_view id) {
  for (auto& e : elements) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const BuildingComponent* BuildingProgram::find(std::string_view type) const {
  for (const auto& c : components) {
    if (c.component_type == type) return &c;
  }
  return nullptr;
}

std::string canonical_component_type(std::string_view raw) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_geometry_error(Errc code) {
  return code == Errc::BadPolygon || code == Errc::OutOfRegion;
}

Footprint normalize_polygon(std::vector<Vec2> raw, const std::string& path,
                            std::vector<Diagnostic>* notes) {
  Footprint fp;
  fp.vertices.reserve(raw.size());
  bool dropped = false;
  for (Vec2 p : raw) {
    p = {quantize(p.x), quantize(p.y)};
    if (!fp.vertices.empty() && fp.vertices.back() == p) {
      dropped = true;
      continue;
    }
    fp.vertices.push_back(p);
  }
  while (fp.vertices.size() > 1 && fp.vertices.front() == fp.vertices.back()) {
    fp.vertices.pop_back();
    dropped = true;
  }
  if (dropped && notes) notes->push_back({path, "dropped repeated or closing vertices"});
  if (fp.vertices.size() >= 3 && geometry::signed_area(fp.vertices) < 0.0) {
    std::reverse(fp.vertices.begin() + 1, fp.vertices.end());
    if (notes) notes->push_back({path, "clockwise polygon reversed to counter-clockwise"});
  }
  return fp;
}

std::optional<Issue> polygon_issue(const Footprint& polygon, const std::string& path) {
  const auto& v = polygon.vertices;
  for (const Vec2& p : v) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::abs(p.x) > kMaxCoordinate ||
        std::abs(p.y) > kMaxCoordinate) {
      return Issue{Errc::BadPolygon, path, "non-finite: coordinate is not a finite value"};
    }
  }
  if (v.size() < 3) {
    return Issue{Errc::BadPolygon, path, "too-few-vertices: a polygon needs at least 3 vertices"};
  }
  const double area = geometry::signed_area(v);
  if (std::abs(area) < geometry::kDegenerateArea && all_collinear(v)) {
    return Issue{Errc::BadPolygon, path, "zero-area: polygon is degenerate"};
  }
  if (!geometry::is_simple(v)) {
    return Issue{Errc::BadPolygon, path, "self-intersecting: polygon edges cross"};
  }
  if (std::abs(area) < geometry::kDegenerateArea) {
    return Issue{Errc::BadPolygon, path, "zero-area: polygon is degenerate"};
  }
  if (area < 0.0) {
    return Issue{Errc::BadPolygon, path, "polygon is clockwise"};
  }
  return std::nullopt;
}

Region default_region(const std::vector<BlockElement>& elements) {
  bool any = false;
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  for (const auto& e : elements) {
    for (const Vec2& p : e.polygon.vertices) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
      x_min = std::min(x_min, p.x);
      y_min = std::min(y_min, p.y);
      x_max = std::max(x_max, p.x);
      y_max = std::max(y_max, p.y);
      any = true;
    }
  }
  if (!any) return Region{{0.0, 0.0}, 100.0, 100.0};
  Region r;
  r.origin = {std::floor(x_min / 10.0) * 10.0, std::floor(y_min / 10.0) * 10.0};
  r.width = std::max(10.0, std::ceil(x_max / 10.0) * 10.0 - r.origin.x);
  r.height = std::max(10.0, std::ceil(y_max / 10.0) * 10.0 - r.origin.y);
  return r;
}

Parsed<BlockProgram> parse_block_program(std::string_view text) {
  const auto root = parse_json(text);
  if (!root) throw Error(Errc::MalformedJson, "input is not valid JSON", "$");
  Collector out;
  BlockDraft draft = collect_block(*root, out);
  if (!out.issues.empty()) raise(out.issues.front());

  Parsed<BlockProgram> parsed;
  parsed.program.region = draft.region ? *draft.region : default_region(draft.elements);
  parsed.program.elements = std::move(draft.elements);
  parsed.program.description = std::move(draft.description);
  parsed.notes = std::move(out.notes);
  return parsed;
}

Parsed<BuildingProgram> parse_building_program(std::string_view text) {
  const auto root = parse_json(text);
  if (!root) throw Error(Errc::MalformedJson, "input is not valid JSON", "$");
  Collector out;
  BuildingDraft draft = collect_building(*root, out);
  if (!out.issues.empty()) raise(out.issues.front());
  Parsed<BuildingProgram> parsed;
  parsed.program.components = std::move(draft.components);
  parsed.program.source_facade = std::move(draft.facade);
  parsed.notes = std::move(out.notes);
  return parsed;
}

std::string serialize(const BlockProgram& program) {
  Json root = Json::object();
  if (program.description) root["description"] = *program.description;
  root["region"] = {
      {"origin", {number(program.region.origin.x), number(program.region.origin.y)}},
      {"width", number(program.region.width)},
      {"height", number(program.region.height)},
  };
  Json elements = Json::array();
  for (const BlockElement& e : program.elements) {
    Json el = Json::object();
    el["id"] = e.id;
    el["type"] = e.type;
    Json poly = Json::array();
    for (const Vec2& p : e.polygon.vertices) poly.push_back({number(p.x), number(p.y)});
    el["polygon"] = std::move(poly);
    if (e.floor_count) el["floor_count"] = *e.floor_count;
    if (e.facade) el["facade"] = *e.facade;
    elements.push_back(std::move(el));
  }
  root["elements"] = std::move(elements);
  return root.dump(2, ' ', false) + "\n";
}

std::string serialize(const BuildingProgram& program) {
  Json root;
  if (program.source_facade) {
    Json output = Json::object();
    for (const auto& c : program.components) output[c.component_type] = c.description;
    root = {{"facade", *program.source_facade}, {"output", std::move(output)}};
  } else {
    root = Json::array();
    for (const auto& c : program.components) {
      root.push_back({{"type", c.component_type}, {"description", c.description}});
    }
  }
  return root.dump(2, ' ', false) + "\n";
}

FormatVerdict check_format(std::string_view text, ProgramKind kind) {
  FormatVerdict verdict;
  std::optional<Json> root;
  try {
    root = parse_json(text);
  } catch (...) {
    root.reset();
  }
  if (!root) {
    verdict.diagnostics.push_back({"$", "input is not valid JSON"});
    return verdict;
  }
  verdict.json_parsable = true;

  Collector out;
  try {
    if (kind == ProgramKind::Block) {
      collect_block(*root, out);
    } else {
      collect_building(*root, out);
    }
  } catch (const std::exception& ex) {
    out.fail(Errc::UnknownForm, "$", ex.what());
  }

  verdict.geometry_valid = std::none_of(out.issues.begin(), out.issues.end(),
                                        [](const Issue& i) { return is_geometry_error(i.code); });
  verdict.fields_complete = std::all_of(out.issues.begin(), out.issues.end(),
                                        [](const Issue& i) { return is_geometry_error(i.code); });
  verdict.overall = verdict.json_parsable && verdict.geometry_valid && verdict.fields_complete;
  for (const Issue& i : out.issues) {
    verdict.diagnostics.push_back({i.path, std::string(to_string(i.code)) + ": " + i.message});
  }
  for (const Diagnostic& n : out.notes) verdict.diagnostics.push_back({n.path, "note: " + n.message});
  return verdict;
}

std::vector<Issue> validate(const BlockProgram& program) {
  std::vector<Issue> issues;
  const Region& r = program.region;
  if (!(std::isfinite(r.width) && std::isfinite(r.height) && r.width > 0.0 && r.height > 0.0)) {
    issues.push_back({Errc::WrongType, "$.region", "region needs positive width and height"});
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < program.elements.size(); ++i) {
    const BlockElement& e = program.elements[i];
    const std::string path = at(std::string("$.elements"), i);
    if (trim(e.id).empty()) issues.push_back({Errc::WrongType, at(path, "id"), "empty id"});
    if (trim(e.type).empty()) issues.push_back({Errc::WrongType, at(path, "type"), "empty type"});
    if (!seen.insert(e.id).second) {
      issues.push_back({Errc::DuplicateId, at(path, "id"), "duplicate element id '" + e.id + "'"});
    }
    if (auto issue = polygon_issue(e.polygon, at(path, "polygon"))) issues.push_back(*issue);
    if (!e.is_building() && (e.floor_count || e.facade)) {
      issues.push_back({Errc::FieldNotAllowed, path, "greenspace carries building-only fields"});
    }
    if (e.floor_count && (*e.floor_count < 1 || *e.floor_count > kMaxFloorCount)) {
      issues.push_back({Errc::BadFloorCount, at(path, "floor_count"), "floor_count must be in [1, 1000]"});
    }
    if (!inside_region(r, e.polygon)) {
      issues.push_back({Errc::OutOfRegion, at(path, "polygon"), "polygon leaves the block region"});
    }
  }
  return issues;
}

std::vector<Issue> validate(const BuildingProgram& program) {
  std::vector<Issue> issues;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < program.components.size(); ++i) {
    const auto& c = program.components[i];
    const std::string path = at(std::string("$"), i);
    if (c.component_type.empty() || c.component_type != canonical_component_type(c.component_type)) {
      issues.push_back({Errc::WrongType, path, "component type is not canonical"});
    }
    if (trim(c.description).empty()) {
      issues.push_back({Errc::EmptyDescription, path, "empty description"});
    }
    if (!seen.insert(c.component_type).second) {
      issues.push_back({Errc::DuplicateId, path, "duplicate component type"});
    }
  }
  return issues;
}

std::uint64_t program_hash(const BlockProgram& program) { return fnv1a(serialize(program)); }
std::uint64_t program_hash(const BuildingProgram& program) { return fnv1a(serialize(program)); }

}  // namespace cityforge
