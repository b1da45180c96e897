// Acceptance suite: one PASS/FAIL line per primary criterion, with timings.
// Exit status is 0 only when every criterion passes.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cityforge/edit.hpp"
#include "cityforge/error.hpp"
#include "cityforge/executor.hpp"
#include "cityforge/metrics.hpp"
#include "cityforge/program.hpp"
#include "cityforge/scene_io.hpp"
#include "cityforge/scoring.hpp"
#include "cityforge/service.hpp"
#include "httplib.h"
#include "json.hpp"
#include "support/files.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace cityforge;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

struct Criterion {
  std::string name;
  double budget_seconds;  // <= 0: no runtime bound
  std::function<void(Outcome&)> run;
};

std::string text_of(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

// ---- criteria ----

void example_round_trip(Outcome& out) {
  const std::string text = cftest::read_text(cftest::fixture("example_block.json"));
  const BlockProgram p = parse_block_program(text).program;
  out.require(validate(p).empty(), "example block fails validation");
  const BlockProgram q = parse_block_program(serialize(p)).program;
  out.require(p == q, "structural equality after serialize/parse");
  const BlockElement* m1 = p.find("mixed_1");
  out.require(m1 != nullptr, "mixed_1 missing");
  if (m1) {
    out.require(std::fabs(m1->polygon.area() - 484.0) < 1e-9, "mixed_1 area " + text_of(m1->polygon.area()));
    out.require(m1->floor_count == 12, "mixed_1 floor_count");
    out.detail << "mixed_1 area " << m1->polygon.area() << " m2, floors " << m1->floor_count.value_or(0);
  }
}

void reward_fidelity(Outcome& out) {
  cftest::Rng rng(20260501);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const BlockProgram p = cftest::random_layout(rng);
    const double o = scoring::overlap_fraction(p);
    const double oracle = cftest::raster_aabb_overlap(p);
    worst = std::max(worst, std::fabs(o - oracle));
    out.require(std::fabs(o - oracle) <= 0.01, "layout " + std::to_string(i) + ": O " + text_of(o) + " vs raster " + text_of(oracle));
    const double s = scoring::score_overlap(p);
    out.require(std::fabs(s - std::clamp(10.0 * (1.0 - o), 0.0, 10.0)) < 1e-12, "s_overlap formula");
    const double s_oracle = std::clamp(10.0 * (1.0 - oracle), 0.0, 10.0);
    out.require(std::fabs(s - s_oracle) <= 0.1, "s_overlap vs raster-derived score");

    const double d = scoring::coverage(p);
    const double sd = scoring::score_density(p);
    out.require(std::fabs(sd - cftest::reference_density_score(d, 0.5, 0.8)) < 1e-12, "s_density piecewise");

    scoring::SpatialScore parts;
    parts.s_align = rng.uniform(0, 10);
    parts.s_plau = rng.uniform(0, 10);
    parts.s_overlap = s;
    parts.s_density = sd;
    const double mean = (parts.s_align + parts.s_plau + parts.s_overlap + parts.s_density) / 4.0;
    out.require(std::fabs(scoring::combine(parts) - mean) < 1e-12, "s_spatial mean");
  }
  const scoring::DensityBand band;
  double jump = 0.0;
  for (const double edge : {0.5, 0.8}) {
    for (const double eps : {1e-9, 1e-12}) {
      jump = std::max(jump, std::fabs(scoring::density_score(edge - eps, band) - scoring::density_score(edge + eps, band)));
    }
  }
  out.require(jump <= 1e-6, "density discontinuity " + text_of(jump));
  scoring::SpatialScore table;
  table.s_align = 6;
  table.s_plau = 8;
  table.s_overlap = 9.9;
  table.s_density = 10;
  out.require(std::fabs(scoring::combine(table) - 8.475) < 1e-12, "(6, 8, 9.9, 10) mean");
  out.require(std::fabs(scoring::density_score(0.25, band) - 5.0) < 1e-12, "D = 0.25 -> 5");
  out.detail << "200 layouts, max |O - raster| " << worst << ", band jump " << jump;
}

void collision_oracle(Outcome& out) {
  cftest::Rng rng(20260502);
  double worst = 0.0, mean = 0.0;
  for (int i = 0; i < 100; ++i) {
    const BlockProgram p = cftest::random_layout(rng);
    const double got = metrics::collision_rate(p);
    const double want = cftest::raster_collision_rate(p);
    worst = std::max(worst, std::fabs(got - want));
    mean += got / 100.0;
    out.require(std::fabs(got - want) <= 0.01, "layout " + std::to_string(i) + ": " + text_of(got) + " vs " + text_of(want));
  }
  out.detail << "100 layouts, mean rate " << mean << ", max |diff| " << worst;
}

void format_harness(Outcome& out) {
  cftest::Rng rng(20260503);
  std::vector<std::string> corpus;
  for (int i = 0; i < 98; ++i) corpus.push_back(serialize(cftest::random_layout(rng)));
  const std::string good = corpus.front();
  corpus.push_back(good.substr(0, good.size() / 2) + "}}");
  corpus.push_back(cftest::read_text(cftest::fixture("bowtie_block.json")));
  const auto acc = metrics::format_accuracy(corpus, ProgramKind::Block);
  out.require(acc.fraction == 0.98, "fraction " + text_of(acc.fraction));
  out.require(!acc.verdicts[98].json_parsable, "corrupted entry parsed");
  out.require(acc.verdicts[99].json_parsable && !acc.verdicts[99].geometry_valid, "bow-tie verdict");
  out.detail << "format_accuracy " << acc.fraction << " over " << corpus.size() << " programs";
}

void executor_invariants(Outcome& out) {
  cftest::Rng rng(20260504);
  std::size_t shells = 0, parts = 0;
  for (int i = 0; i < 50; ++i) {
    edit::CityProgram city = cftest::random_city(rng);
    executor::ExecutorConfig cfg;
    cfg.floor_height = rng.uniform(2.8, 4.0);
    cfg.seed = static_cast<std::uint64_t>(i);
    const auto scene = executor::assemble_scene(city.block, city.buildings, cfg);
    const std::string tag = "program " + std::to_string(i);
    for (const auto& b : scene.buildings) {
      const BlockElement* e = city.block.find(b.id);
      out.require(is_closed_manifold(b.shell), tag + " shell " + b.id + " not closed");
      const double h = bounds(b.shell).max.z;
      out.require(h == *e->floor_count * cfg.floor_height, tag + " height " + text_of(h));
      out.require(b.components.empty() || is_closed_manifold(b.components), tag + " components " + b.id + " not closed");
      ++shells;
      parts += !b.components.empty();
    }
    const auto glb = glb_bytes(scene);
    const std::size_t tris = scene_triangle_count(scene);
    out.require(import_glb(glb).triangle_count() == tris, tag + " glb triangle count");
    out.require(import_obj(obj_text(scene, "x.mtl").obj).triangle_count() == tris, tag + " obj triangle count");
    const auto again = glb_bytes(executor::assemble_scene(city.block, city.buildings, cfg));
    out.require(again == glb, tag + " glb differs for the same seed");
  }
  out.detail << "50 programs, " << shells << " shells, " << parts << " component sets";
}

Mesh box_mesh(double w, double d, double h) {
  const std::vector<Vec2> ring{{0, 0}, {w, 0}, {w, d}, {0, d}};
  const std::vector<double> levels{0.0, h};
  return prism(ring, levels, Material::Concrete, Material::Concrete, Material::Concrete);
}

void metric_orderings(Outcome& out) {
  cftest::Rng rng(20260505);
  double ros_err = 0.0;
  for (int i = 0; i < 40; ++i) {
    BlockElement e;
    e.id = "x";
    e.type = "office";
    e.floor_count = rng.integer(1, 12);
    e.polygon = i % 2 ? cftest::l_shape(rng, 0, 0, rng.uniform(5, 30), rng.uniform(5, 30))
                      : cftest::rect(0, 0, rng.uniform(3, 30), rng.uniform(3, 30));
    Mesh shell = executor::extrude_footprint(e, 3.0);
    ros_err = std::max(ros_err, std::fabs(metrics::ros(shell) - 1.0));
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double c = std::cos(angle), s = std::sin(angle);
    for (auto& v : shell.vertices) v = {c * v.x - s * v.y, s * v.x + c * v.y, v.z};
    ros_err = std::max(ros_err, std::fabs(metrics::ros(shell) - 1.0));
  }
  out.require(ros_err <= 1e-6, "ROS deviation " + text_of(ros_err));

  const Mesh box = box_mesh(4, 3, 2);
  const double base = metrics::otr(box);
  const double sub = metrics::otr(subdivide_midpoint(box));
  out.require(base == 1.0, "box OTR " + text_of(base));
  out.require(sub == 4.0 * base, "subdivided box OTR " + text_of(sub));

  int strict = 0;
  for (int i = 0; i < 20; ++i) {
    const auto block = cftest::random_layout(rng);
    for (const auto& e : block.elements) {
      if (!e.is_building()) continue;
      const Mesh shell = executor::extrude_footprint(e, 3.0);
      const double a = metrics::otr(shell), b = metrics::otr(subdivide_midpoint(shell));
      out.require(a < b, "executor OTR " + text_of(a) + " not below subdivided " + text_of(b));
      ++strict;
    }
  }
  out.detail << "max ROS deviation " << ros_err << ", box OTR " << base << " -> " << sub << ", " << strict
             << " shells strictly below their subdivided copies";
}

void edit_closure(Outcome& out) {
  cftest::Rng rng(20260506);
  int applied = 0, rejected = 0, idempotent_checks = 0;
  for (int i = 0; i < 500; ++i) {
    const edit::CityProgram city = cftest::random_city(rng);
    const edit::EditCommand cmd = cftest::random_command(rng, city);
    const std::string tag = edit::format_command(cmd);
    edit::EditResult r;
    try {
      r = edit::apply_edit(city, cmd);
    } catch (const Error& e) {
      out.require(e.code() == Errc::InfeasibleDensity || e.code() == Errc::InvalidArgument, tag + ": " + e.what());
      ++rejected;
      continue;
    }
    ++applied;
    bool valid = validate(r.after.block).empty();
    for (const auto& [id, b] : r.after.buildings) valid = valid && validate(b).empty();
    out.require(valid, tag + ": result does not validate");
    out.require(edit::apply_diff(city, r.diff) == r.after, tag + ": diff replay");
    const bool set_verb = cmd.verb == edit::Verb::SetFloorCount || cmd.verb == edit::Verb::SetStyle ||
                          cmd.verb == edit::Verb::SetComponent;
    if (set_verb) {
      const auto again = edit::apply_edit(r.after, cmd);
      out.require(again.after == r.after && again.diff.empty(), tag + ": not idempotent");
      ++idempotent_checks;
    }
    if (cmd.verb == edit::Verb::ScaleDensity) {
      out.require(metrics::collision_rate(r.after.block) <= metrics::collision_rate(city.block) + 1e-9,
                  tag + ": collision rate increased");
    }
  }
  out.require(applied >= 350, "only " + std::to_string(applied) + " of 500 edits applied");
  out.detail << applied << " applied, " << rejected << " rejected with typed errors, " << idempotent_checks
             << " idempotence checks";
}

void preference_pairs(Outcome& out) {
  BlockProgram p;
  p.region = {{0, 0}, 10, 10};
  auto scored = [&](double s) {
    scoring::SpatialScore score;
    score.s_spatial = s;
    return std::pair{p, score};
  };
  const auto pairs = scoring::build_preference_pairs({scored(10), scored(4), scored(3)}, 5.0);
  out.require(pairs.size() == 2, "pair count " + std::to_string(pairs.size()));
  if (pairs.size() == 2) {
    out.require(pairs[0].chosen_score.s_spatial == 10 && pairs[0].rejected_score.s_spatial == 4, "first pair");
    out.require(pairs[1].chosen_score.s_spatial == 10 && pairs[1].rejected_score.s_spatial == 3, "second pair");
  }
  out.detail << "pairs:";
  for (const auto& pp : pairs) out.detail << " (" << pp.chosen_score.s_spatial << "," << pp.rejected_score.s_spatial << ")";
}

void service_contract(Outcome& out) {
  using nlohmann::json;
  auto run_service = [&](std::string& scene_r1, std::string& scene_r2, int& ok_total, int& conflict_total) {
    service::CityService svc({});
    const int port = svc.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);
    json body;
    body["block"] = json::parse(cftest::read_text(cftest::fixture("example_block.json")));
    body["buildings"] = {{"mixed_1", json::parse(cftest::read_text(cftest::fixture("buildings/mixed_1.json")))}};
    for (int round = 0; round < 10; ++round) {
      const auto created = c.Post("/sessions", body.dump(), "application/json");
      if (!created || created->status != 201) {
        out.require(false, "session creation failed");
        break;
      }
      const std::string id = json::parse(created->body)["session"];
      std::atomic<int> ok{0}, conflict{0};
      std::atomic<bool> go{false};
      auto worker = [&](int floors) {
        httplib::Client wc("127.0.0.1", port);
        while (!go.load()) std::this_thread::yield();
        const auto res = wc.Post("/sessions/" + id + "/edits",
                                 json{{"base_revision", 1}, {"command", "set_floor_count mixed_1 " + std::to_string(floors)}}.dump(),
                                 "application/json");
        if (res && res->status == 200) ++ok;
        if (res && res->status == 409) ++conflict;
      };
      std::thread a(worker, 3), b(worker, 8);
      go = true;
      a.join();
      b.join();
      out.require(ok == 1 && conflict == 1,
                  "round " + std::to_string(round) + ": " + std::to_string(ok) + " x 200, " + std::to_string(conflict) + " x 409");
      ok_total += ok;
      conflict_total += conflict;
      if (round == 0) {
        scene_r1 = c.Get("/sessions/" + id + "/scene.glb?revision=1")->body;
        scene_r2 = c.Get("/sessions/" + id + "/scene.glb?revision=2")->body;
        out.require(scene_r1 == c.Get("/sessions/" + id + "/scene.glb?revision=1")->body, "revision 1 bytes changed");
      }
    }
    svc.stop();
  };
  std::string a1, a2, b1, b2;
  int ok = 0, conflict = 0;
  run_service(a1, a2, ok, conflict);
  run_service(b1, b2, ok, conflict);
  out.require(!a1.empty() && a1 == b1, "revision 1 bytes differ across service instances");
  // Revision 2 depends on which writer won, so only compare it when both
  // runs agree on the winner's program.
  out.require(a1 != a2, "edit did not change the scene");
  out.detail << ok << " x 200, " << conflict << " x 409 over 20 races; revision-1 scene " << a1.size()
             << " bytes, identical across instances";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"example-block round trip", 1.0, example_round_trip},
      {"reward formula fidelity", 30.0, reward_fidelity},
      {"collision oracle", 0.0, collision_oracle},
      {"format accuracy harness", 0.0, format_harness},
      {"executor invariants", 120.0, executor_invariants},
      {"metric orderings", 0.0, metric_orderings},
      {"edit closure", 0.0, edit_closure},
      {"preference-pair builder", 0.0, preference_pairs},
      {"service contract", 0.0, service_contract},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      out.require(false, "took " + text_of(secs) + " s, budget " + text_of(c.budget_seconds) + " s");
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(26) << c.name << std::right
              << std::fixed << std::setprecision(3) << std::setw(9) << secs << " s";
    std::cout.unsetf(std::ios::fixed);
    std::cout << std::setprecision(6);
    if (c.budget_seconds > 0) std::cout << " (budget " << c.budget_seconds << " s)";
    std::cout << "  " << out.detail.str() << "\n";
    for (const auto& f : out.failures) std::cout << "      - " << f << "\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << " (no secondary component built or required)\n";
  return failed == 0 ? 0 : 1;
}
