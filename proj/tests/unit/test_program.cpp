#include <string>

#include "cityforge/error.hpp"
#include "cityforge/program.hpp"
#include "doctest.h"
#include "support/files.hpp"
#include "support/generators.hpp"

using namespace cityforge;

namespace {

bool has_code(const std::vector<Issue>& issues, Errc code) {
  return std::any_of(issues.begin(), issues.end(), [&](const Issue& i) { return i.code == code; });
}

Errc parse_error_code(const std::string& text) {
  try {
    parse_block_program(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse error for: " << text);
  return Errc::MalformedJson;
}

}  // namespace

TEST_CASE("example block program round-trips") {
  const auto text = cftest::read_text(cftest::fixture("example_block.json"));
  const auto parsed = parse_block_program(text);
  const BlockProgram& p = parsed.program;
  REQUIRE(p.elements.size() == 4);
  CHECK(validate(p).empty());
  const BlockElement* m1 = p.find("mixed_1");
  REQUIRE(m1 != nullptr);
  CHECK(m1->polygon.area() == doctest::Approx(484.0));
  CHECK(m1->floor_count == 12);
  CHECK(m1->is_building());
  CHECK_FALSE(p.find("park_1")->is_building());

  const auto again = parse_block_program(serialize(p));
  CHECK(again.program == p);
  CHECK(serialize(again.program) == serialize(p));
  CHECK(program_hash(again.program) == program_hash(p));
}

TEST_CASE("random programs round-trip through the canonical form") {
  cftest::Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    BlockProgram p = cftest::random_layout(rng);
    if (rng.chance(0.3)) p.description = "block " + std::to_string(trial);
    REQUIRE_MESSAGE(validate(p).empty(), "trial " << trial);
    const auto parsed = parse_block_program(serialize(p));
    CHECK_MESSAGE(parsed.program == p, "trial " << trial);
    CHECK(parsed.notes.empty());
  }
}

TEST_CASE("building programs round-trip in every accepted form") {
  cftest::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const BuildingProgram b = cftest::random_building_program(rng);
    CHECK(validate(b).empty());
    CHECK(parse_building_program(serialize(b)).program == b);
  }
  const auto flat = parse_building_program(R"({"Window": "arched, wooden", "door": "red"})").program;
  REQUIRE(flat.components.size() == 2);
  CHECK(flat.find("window")->description == "arched, wooden");
  const auto wrapped =
      parse_building_program(R"([{"facade": "brick", "output": {"roof": "flat"}}])").program;
  CHECK(wrapped.source_facade == "brick");
  CHECK(wrapped.find("roof") != nullptr);
  CHECK(parse_building_program(serialize(wrapped)).program == wrapped);
}

TEST_CASE("layout wrapper form") {
  const std::string text = R"({"description": "two towers",
    "layout": {"buildings": [{"id": "a", "type": "office", "polygon": [[0,0],[10,0],[10,10],[0,10]], "floor_count": 4}],
               "greenspaces": [{"id": "g", "type": "greenspace", "polygon": [[20,0],[30,0],[30,10],[20,10]]}]}})";
  const auto p = parse_block_program(text).program;
  CHECK(p.description == "two towers");
  REQUIRE(p.elements.size() == 2);
  CHECK(p.find("g")->type == "greenspace");
  CHECK(p.region.width == doctest::Approx(30.0));
}

TEST_CASE("clockwise rings are reversed with a note") {
  const auto parsed = parse_block_program(
      R"([{"id": "a", "type": "office", "polygon": [[0,0],[0,10],[10,10],[10,0],[0,0]], "floor_count": 2}])");
  CHECK(parsed.program.elements[0].polygon.area() == doctest::Approx(100.0));
  CHECK(parsed.program.elements[0].polygon.vertices.size() == 4);
  CHECK_FALSE(parsed.notes.empty());
}

TEST_CASE("parse errors carry codes") {
  CHECK(parse_error_code("") == Errc::MalformedJson);
  CHECK(parse_error_code("{") == Errc::MalformedJson);
  CHECK(parse_error_code(cftest::read_text(cftest::fixture("bowtie_block.json"))) == Errc::BadPolygon);
  CHECK(parse_error_code(R"([{"id": "a", "polygon": [[0,0],[1,0],[1,1]]}])") == Errc::MissingField);
  CHECK(parse_error_code(R"([{"id": "a", "type": "office", "polygon": [[0,0],[1,0],[1,1]], "floor_count": 0}])") ==
        Errc::BadFloorCount);
  CHECK(parse_error_code(R"([{"id": "a", "type": "office", "polygon": [[0,0],[1,0],[1,1]]},
                            {"id": "a", "type": "office", "polygon": [[5,5],[6,5],[6,6]]}])") == Errc::DuplicateId);
  CHECK(parse_error_code(R"([{"id": "g", "type": "greenspace", "polygon": [[0,0],[1,0],[1,1]], "floor_count": 3}])") ==
        Errc::FieldNotAllowed);
  CHECK(parse_error_code(R"({"region": {"origin": [0,0], "width": 5, "height": 5},
      "elements": [{"id": "a", "type": "office", "polygon": [[0,0],[10,0],[10,10]]}]})") == Errc::OutOfRegion);
}

TEST_CASE("check_format verdicts") {
  const auto ok = check_format(cftest::read_text(cftest::fixture("example_block.json")), ProgramKind::Block);
  CHECK(ok.overall);

  const auto empty = check_format("", ProgramKind::Block);
  CHECK_FALSE(empty.json_parsable);
  CHECK_FALSE(empty.overall);

  const auto bowtie = check_format(cftest::read_text(cftest::fixture("bowtie_block.json")), ProgramKind::Block);
  CHECK(bowtie.json_parsable);
  CHECK_FALSE(bowtie.geometry_valid);
  CHECK(bowtie.fields_complete);
  CHECK_FALSE(bowtie.overall);

  const auto missing = check_format(R"([{"id": "a", "polygon": [[0,0],[1,0],[1,1]]}])", ProgramKind::Block);
  CHECK(missing.geometry_valid);
  CHECK_FALSE(missing.fields_complete);

  const auto building = check_format(R"({"window": ""})", ProgramKind::Building);
  CHECK_FALSE(building.fields_complete);
}

TEST_CASE("parser and format check are total over mutated input") {
  const std::string base = cftest::read_text(cftest::fixture("example_block.json"));
  const std::string alphabet = "{}[],:\"0123456789.-eE abtnul\\";
  cftest::Rng rng(77);
  int accepted = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text = base;
    const int edits = rng.integer(1, 4);
    for (int k = 0; k < edits; ++k) {
      const auto pos = static_cast<std::size_t>(rng.integer(0, static_cast<int>(text.size()) - 1));
      switch (rng.integer(0, 2)) {
        case 0: text.erase(pos, 1); break;
        case 1: text.insert(pos, 1, alphabet[static_cast<std::size_t>(rng.integer(0, static_cast<int>(alphabet.size()) - 1))]); break;
        default: text[pos] = alphabet[static_cast<std::size_t>(rng.integer(0, static_cast<int>(alphabet.size()) - 1))]; break;
      }
    }
    bool parsed_ok = false;
    try {
      const auto p = parse_block_program(text);
      parsed_ok = true;
      CHECK(validate(p.program).empty());
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL("non-library exception: " << e.what());
    }
    const auto verdict = check_format(text, ProgramKind::Block);
    CHECK(verdict.overall == parsed_ok);
    accepted += parsed_ok;
  }
  CHECK(accepted > 0);
}

TEST_CASE("default region snaps to 10 m") {
  BlockElement e;
  e.id = "a";
  e.type = "office";
  e.polygon = cftest::rect(2, 3, 47, 22);
  const Region r = default_region({e});
  CHECK(r.origin == Vec2{0, 0});
  CHECK(r.width == 50.0);
  CHECK(r.height == 30.0);
  const Region empty = default_region({});
  CHECK(empty.width == 100.0);
  CHECK(empty.height == 100.0);
}

TEST_CASE("validate reports typed issues") {
  BlockProgram p;
  p.region = {{0, 0}, 50, 50};
  BlockElement e;
  e.id = "a";
  e.type = "office";
  e.polygon = cftest::rect(0, 0, 10, 10);
  e.floor_count = 1001;
  p.elements.push_back(e);
  p.elements.push_back(e);
  const auto issues = validate(p);
  CHECK(has_code(issues, Errc::BadFloorCount));
  CHECK(has_code(issues, Errc::DuplicateId));
}

TEST_CASE("coordinates are quantized") {
  CHECK(quantize(1.23456789) == doctest::Approx(1.234568));
  CHECK(quantize(-0.0000004) == 0.0);
  const auto p = parse_block_program(
                     R"([{"id": "a", "type": "office", "polygon": [[0.1234567,0],[10,0],[10,10]]}])")
                     .program;
  CHECK(p.elements[0].polygon.vertices[0].x == quantize(0.1234567));
}
