#include "cityforge/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cityforge/error.hpp"
#include "cityforge/geometry.hpp"
#include "json.hpp"

namespace cityforge::metrics {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kCoplanarDot = 1.0 - 1e-9;
constexpr int kBinsPerDegree = 10;
constexpr int kBins = 90 * kBinsPerDegree;

std::optional<Vec3> unit_normal(const Mesh& mesh, const std::array<std::uint32_t, 3>& t) {
  const Vec3 n = cross(mesh.vertices[t[1]] - mesh.vertices[t[0]], mesh.vertices[t[2]] - mesh.vertices[t[0]]);
  const double len = length(n);
  if (!(0.5 * len >= kDegenerateTriangleArea)) return std::nullopt;
  return n * (1.0 / len);
}

double angle_mod_90(double dx, double dy) {
  double a = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
  a = std::fmod(a, 90.0);
  if (a < 0.0) a += 90.0;
  if (a >= 90.0) a -= 90.0;
  return a;
}

double circular_distance_90(double a, double b) {
  const double d = std::fabs(a - b);
  return std::min(d, 90.0 - d);
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

using EdgeKey = std::pair<std::uint32_t, std::uint32_t>;

EdgeKey undirected(std::uint32_t a, std::uint32_t b) { return {std::min(a, b), std::max(a, b)}; }

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> mean_of(const std::vector<ReportItem>& items, std::optional<double> ReportItem::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& item : items) {
    if (const auto& v = item.*field) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

double collision_rate(const BlockProgram& program) {
  const double region = program.region.area();
  if (!(region > 0.0) || !std::isfinite(region)) throw Error(Errc::EmptyRegion, "block region has zero area");
  std::vector<geometry::AABB> boxes;
  boxes.reserve(program.elements.size());
  for (const auto& e : program.elements) boxes.push_back(e.polygon.bounds());
  double total = 0.0;
  for (std::size_t i = 0; i < program.elements.size(); ++i) {
    for (std::size_t j = i + 1; j < program.elements.size(); ++j) {
      if (geometry::aabb_intersection_area(boxes[i], boxes[j]) <= 0.0) continue;
      total += geometry::polygon_intersection_area(program.elements[i].polygon.vertices,
                                                   program.elements[j].polygon.vertices);
    }
  }
  return total / region;
}

FormatAccuracy format_accuracy(const std::vector<std::string>& corpus, ProgramKind kind) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "format accuracy needs at least one program");
  FormatAccuracy result;
  std::size_t ok = 0;
  for (const auto& text : corpus) {
    result.verdicts.push_back(check_format(text, kind));
    if (result.verdicts.back().overall) ++ok;
  }
  result.fraction = static_cast<double>(ok) / static_cast<double>(corpus.size());
  return result;
}

double ros(const Mesh& mesh, double tolerance_degrees) {
  // Edges are keyed by endpoint positions so split vertices (e.g. per-material
  // primitives) do not double-count an edge.
  using PosKey = std::tuple<double, double, double>;
  std::map<std::pair<PosKey, PosKey>, std::vector<std::optional<Vec3>>> edges;
  for (const auto& t : mesh.triangles) {
    const auto n = unit_normal(mesh, t);
    for (int k = 0; k < 3; ++k) {
      const Vec3 a = mesh.vertices[t[k]];
      const Vec3 b = mesh.vertices[t[(k + 1) % 3]];
      PosKey ka{a.x, a.y, a.z};
      PosKey kb{b.x, b.y, b.z};
      if (kb < ka) std::swap(ka, kb);
      if (ka == kb) continue;
      edges[{ka, kb}].push_back(n);
    }
  }

  struct Dir {
    double angle;
    double weight;
  };
  std::vector<Dir> dirs;
  double total = 0.0;
  for (const auto& [key, normals] : edges) {
    bool feature = normals.size() != 2 || !normals[0] || !normals[1];
    if (!feature) feature = dot(*normals[0], *normals[1]) < kCoplanarDot;
    if (!feature) continue;
    const double dx = std::get<0>(key.second) - std::get<0>(key.first);
    const double dy = std::get<1>(key.second) - std::get<1>(key.first);
    const double dz = std::get<2>(key.second) - std::get<2>(key.first);
    const double horizontal = std::hypot(dx, dy);
    if (horizontal <= 1e-9 * std::max(1.0, std::fabs(dz))) continue;
    dirs.push_back({angle_mod_90(dx, dy), horizontal});
    total += horizontal;
  }
  if (dirs.empty() || !(total > 0.0)) {
    throw Error(Errc::DegenerateMesh, "mesh has no edges with a horizontal direction");
  }

  std::array<double, kBins> hist{};
  for (const Dir& d : dirs) {
    const int bin = std::min(kBins - 1, static_cast<int>(d.angle * kBinsPerDegree));
    hist[bin] += d.weight;
  }
  // Windowed (circular mod 90) sum of the histogram; its argmax is the
  // dominant axis.
  const int half = static_cast<int>(std::lround(tolerance_degrees * kBinsPerDegree));
  std::array<double, kBins> window{};
  int best_bin = 0;
  for (int c = 0; c < kBins; ++c) {
    for (int k = -half; k <= half; ++k) window[c] += hist[((c + k) % kBins + kBins) % kBins];
    if (window[c] > window[best_bin]) best_bin = c;
  }
  // The maximum is usually a plateau as wide as the window; taking its first
  // bin would put phi right at the tolerance edge, so use the plateau middle.
  const double best = window[best_bin];
  auto on_plateau = [&](int c) { return window[(c % kBins + kBins) % kBins] >= best * (1.0 - 1e-12); };
  int lo = best_bin, hi = best_bin;
  while (hi - lo < kBins - 1 && on_plateau(hi + 1)) ++hi;
  while (hi - lo < kBins - 1 && on_plateau(lo - 1)) --lo;
  double phi = std::fmod((lo + hi) / 2.0 + 0.5, static_cast<double>(kBins)) / kBinsPerDegree;
  if (phi < 0.0) phi += 90.0;
  double aligned = 0.0;
  for (const Dir& d : dirs) {
    if (circular_distance_90(d.angle, phi) <= tolerance_degrees) aligned += d.weight;
  }
  return std::clamp(aligned / total, 0.0, 1.0);
}

std::size_t tessellation_demand(const Mesh& mesh) {
  const std::size_t nt = mesh.triangles.size();
  std::map<EdgeKey, std::vector<std::size_t>> edge_tris;
  for (std::size_t i = 0; i < nt; ++i) {
    const auto& t = mesh.triangles[i];
    for (int k = 0; k < 3; ++k) {
      auto& list = edge_tris[undirected(t[k], t[(k + 1) % 3])];
      list.push_back(i);
      if (list.size() > 2) {
        throw Error(Errc::NonManifold, "edge shared by more than two triangles");
      }
    }
  }

  std::vector<std::optional<Vec3>> normals(nt);
  for (std::size_t i = 0; i < nt; ++i) normals[i] = unit_normal(mesh, mesh.triangles[i]);

  UnionFind patches(nt);
  for (const auto& [edge, tris] : edge_tris) {
    if (tris.size() != 2) continue;
    const auto& a = normals[tris[0]];
    const auto& b = normals[tris[1]];
    if (a && b && dot(*a, *b) >= kCoplanarDot) patches.unite(tris[0], tris[1]);
  }

  // Directed boundary edges of every patch.
  std::map<std::size_t, std::multimap<std::uint32_t, std::uint32_t>> boundary;
  std::map<std::size_t, bool> degenerate_patch;
  for (std::size_t i = 0; i < nt; ++i) {
    const std::size_t p = patches.find(i);
    if (!normals[i]) degenerate_patch[p] = true;
    auto& out = boundary[p];
    const auto& t = mesh.triangles[i];
    for (int k = 0; k < 3; ++k) {
      const auto& tris = edge_tris[undirected(t[k], t[(k + 1) % 3])];
      const bool interior = tris.size() == 2 && patches.find(tris[0]) == patches.find(tris[1]);
      if (!interior) out.emplace(t[k], t[(k + 1) % 3]);
    }
  }

  std::size_t demand = 0;
  for (auto& [patch, edges] : boundary) {
    if (degenerate_patch.contains(patch)) {
      demand += 1;
      continue;
    }
    long corners = 0;
    long loops = 0;
    while (!edges.empty()) {
      std::vector<std::uint32_t> loop;
      const std::uint32_t start = edges.begin()->first;
      std::uint32_t cur = start;
      while (true) {
        auto next = edges.find(cur);
        if (next == edges.end()) break;
        loop.push_back(cur);
        cur = next->second;
        edges.erase(next);
        if (cur == start) break;
      }
      ++loops;
      const std::size_t m = loop.size();
      for (std::size_t k = 0; k < m; ++k) {
        const Vec3 prev = mesh.vertices[loop[(k + m - 1) % m]];
        const Vec3 here = mesh.vertices[loop[k]];
        const Vec3 next = mesh.vertices[loop[(k + 1) % m]];
        const Vec3 d0 = here - prev;
        const Vec3 d1 = next - here;
        if (length(cross(d0, d1)) > 1e-9 * length(d0) * length(d1)) ++corners;
      }
    }
    demand += static_cast<std::size_t>(std::max(1L, corners + 2 * loops - 4));
  }
  return demand;
}

double otr(const Mesh& mesh) {
  if (mesh.triangles.empty()) throw Error(Errc::DegenerateMesh, "mesh has no triangles");
  const std::size_t demand = tessellation_demand(mesh);
  return static_cast<double>(mesh.triangles.size()) / static_cast<double>(demand);
}

Mesh scene_mesh(const executor::ScenePackage& scene, EdgeScope scope) {
  Mesh out;
  for (const auto& b : scene.buildings) {
    out.append(b.shell);
    if (scope == EdgeScope::FullScene) out.append(b.components);
  }
  if (scope == EdgeScope::FullScene) {
    for (const auto& [id, mesh] : scene.greenspaces) out.append(mesh);
    out.append(scene.streets);
    for (const auto& p : scene.props) out.append(executor::prop_mesh(p));
  }
  return out;
}

QualityReport build_report(const std::vector<ReportInput>& inputs) {
  if (inputs.empty()) throw Error(Errc::EmptyCorpus, "report needs at least one input");
  QualityReport report;
  std::size_t programs = 0;
  std::size_t ok = 0;
  for (const auto& in : inputs) {
    ReportItem item;
    item.id = in.id;
    if (in.program_text) {
      ++programs;
      item.format = check_format(*in.program_text, ProgramKind::Block);
      if (item.format->overall) {
        ++ok;
        try {
          item.collision_rate = collision_rate(parse_block_program(*in.program_text).program);
        } catch (const Error& e) {
          item.errors.push_back(e.what());
        }
      }
    }
    if (in.mesh) {
      try {
        item.ros = ros(*in.mesh);
      } catch (const Error& e) {
        item.errors.push_back(std::string("ros: ") + e.what());
      }
      try {
        item.otr = otr(*in.mesh);
      } catch (const Error& e) {
        item.errors.push_back(std::string("otr: ") + e.what());
      }
    }
    report.items.push_back(std::move(item));
  }
  std::stable_sort(report.items.begin(), report.items.end(),
                   [](const ReportItem& a, const ReportItem& b) { return a.id < b.id; });
  if (programs > 0) report.format_accuracy = static_cast<double>(ok) / static_cast<double>(programs);
  report.collision_rate = mean_of(report.items, &ReportItem::collision_rate);
  report.ros = mean_of(report.items, &ReportItem::ros);
  report.otr = mean_of(report.items, &ReportItem::otr);
  return report;
}

std::string report_json(const QualityReport& report) {
  Json root;
  root["summary"] = {{"items", report.items.size()},
                     {"format_accuracy", optional_number(report.format_accuracy)},
                     {"collision_rate", optional_number(report.collision_rate)},
                     {"ros", optional_number(report.ros)},
                     {"otr", optional_number(report.otr)}};
  Json items = Json::array();
  for (const auto& item : report.items) {
    Json j;
    j["id"] = item.id;
    j["collision_rate"] = optional_number(item.collision_rate);
    if (item.format) {
      Json diags = Json::array();
      for (const auto& d : item.format->diagnostics) diags.push_back({{"path", d.path}, {"message", d.message}});
      j["format"] = {{"json_parsable", item.format->json_parsable},
                     {"geometry_valid", item.format->geometry_valid},
                     {"fields_complete", item.format->fields_complete},
                     {"overall", item.format->overall},
                     {"diagnostics", diags}};
    } else {
      j["format"] = nullptr;
    }
    j["ros"] = optional_number(item.ros);
    j["otr"] = optional_number(item.otr);
    if (!item.errors.empty()) j["errors"] = item.errors;
    items.push_back(std::move(j));
  }
  root["items"] = std::move(items);
  return root.dump(2) + "\n";
}

std::string report_csv(const QualityReport& report) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  auto num = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  auto flag = [](bool b) { return b ? "true" : "false"; };
  for (const auto& item : report.items) {
    std::string id = item.id;
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (const char c : id) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      id = quoted + "\"";
    }
    out << id << ',' << num(item.collision_rate) << ',';
    if (item.format) {
      out << flag(item.format->json_parsable) << ',' << flag(item.format->geometry_valid) << ','
          << flag(item.format->fields_complete);
    } else {
      out << ",,";
    }
    out << ',' << num(item.ros) << ',' << num(item.otr) << "\n";
  }
  return out.str();
}

void write_report(const QualityReport& report, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  const auto write = [&](const std::string& name, const std::string& body) {
    const auto path = std::filesystem::path(directory) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << body)) throw Error(Errc::IoFailure, "cannot write " + path.string());
  };
  write("report.json", report_json(report));
  write("report.csv", report_csv(report));
}

}  // namespace cityforge::metrics
