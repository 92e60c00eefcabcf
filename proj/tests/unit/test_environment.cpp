#include <doctest.h>

#include <string>

#include "needlesteer/checker.hpp"
#include "needlesteer/environment.hpp"
#include "needlesteer/scenario_io.hpp"
#include "needlesteer/synthesis.hpp"

using namespace needlesteer;

namespace {

const char* kMinimal = R"({
  "name": "minimal",
  "scale": 100,
  "workspace": {"min": [-60, -60, 0], "max": [60, 60, 120]},
  "needle": {"start_pos": [0, 0, 0], "start_tangent": [0, 0, 1], "start_normal": [1, 0, 0],
             "radius_mm": 60, "speed_mm_s": 5, "dt_s": 0.5},
  "limits": {"max_rotations": 3, "min_push_mm": 5, "max_insertion_mm": 150},
  "regions": [{"kind": "TR", "center": [0, 0, 90], "radius_mm": 5}],
  "tr_order": [0]
})";

std::string with_regions(const std::string& regions) {
    std::string doc = kMinimal;
    const std::string from = R"([{"kind": "TR", "center": [0, 0, 90], "radius_mm": 5}])";
    doc.replace(doc.find(from), from.size(), regions);
    return doc;
}

}  // namespace

TEST_CASE("region membership is boundary inclusive") {
    Region r;
    r.kind = RegionKind::CR;
    r.center = {0, 0, 50000};
    r.radius_mm = 5;
    CHECK(contains(r, {0, 0, 50000}, 100));
    r.center = {0, 0, 500};
    CHECK(contains(r, {0, 0, 0}, 100));
    CHECK_FALSE(contains(r, {0, 0, -1}, 100));
}

TEST_CASE("minimal document loads with no CRs") {
    const Scenario s = load_scenario(kMinimal);
    CHECK(s.critical_regions().empty());
    CHECK(s.target_count() == 1);
    CHECK(s.needle.radius_mm == 60);
}

TEST_CASE("CRs get generated detection shells") {
    const Scenario s = load_scenario(with_regions(
        R"([{"kind": "TR", "center": [0, 0, 90], "radius_mm": 5}, {"kind": "CR", "center": [0, 0, 45], "radius_mm": 6}])"));
    const Region* dr = s.detection_region_of(1);
    REQUIRE(dr != nullptr);
    CHECK(dr->radius_mm == doctest::Approx(6 + s.dr_margin_mm));
}

TEST_CASE("DR not larger than its CR is rejected") {
    const std::string doc = with_regions(
        R"([{"kind": "TR", "center": [0, 0, 90], "radius_mm": 5}, {"kind": "CR", "center": [0, 0, 45], "radius_mm": 6},
            {"kind": "DR", "center": [0, 0, 45], "radius_mm": 6, "parent": 1}])");
    CHECK_THROWS_AS(load_scenario(doc), ConfigError);
}

TEST_CASE("malformed documents") {
    try {
        load_scenario("{\n  \"name\": \"x\",\n  oops\n}");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    try {
        load_scenario(with_regions(R"([{"kind": "TR", "center": [0, 0, 90], "radius_mm": "five"}])"));
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("regions[0].radius_mm") != std::string::npos);
    }
    std::string bad = kMinimal;
    bad.replace(bad.find("\"dt_s\": 0.5"), 11, "\"dt_s\": 20");
    CHECK_THROWS_AS(load_scenario(bad), ConfigError);
}

TEST_CASE("builtins round trip through the document format") {
    for (const Scenario& s : builtin_scenarios()) {
        CAPTURE(s.name);
        const Scenario back = load_scenario(save_scenario(s));
        CHECK(back == s);
        CHECK(save_scenario(back) == save_scenario(s));
    }
}

TEST_CASE("builtin layouts") {
    CHECK(builtin_scenario("no_cr").critical_regions().empty());
    CHECK(builtin_scenario("no_cr").target_count() == 1);
    CHECK(builtin_scenario("small_mid_cr").critical_regions().size() == 1);
    CHECK(builtin_scenario("surface_crs").critical_regions().size() == 6);
    CHECK(builtin_scenario("tunnel_crs").critical_regions().size() == 8);
    CHECK_THROWS_AS(builtin_scenario("nope"), ConfigError);

    const Scenario large = builtin_scenario("large_mid_cr");
    const auto r = synthesize(large, KnowledgeBase::known_only(large, CrKnowledge::All), large.start, CheckerState{});
    CHECK(r.status == SynthesisStatus::Infeasible);

    // Tunnel: every CR keeps clear of the straight approach axis.
    for (const Region& cr : builtin_scenario("tunnel_crs").critical_regions()) {
        const RealVec3 c = unquantize(cr.center, 100);
        CHECK(std::hypot(c.x, c.y) - cr.radius_mm >= 10.0 - 1e-6);
    }
}

TEST_CASE("known-only knowledge carries no ground truth") {
    const Scenario s = builtin_scenario("tunnel_crs");
    const KnowledgeBase all = KnowledgeBase::known_only(s, CrKnowledge::All);
    CHECK(all.known_crs().size() == 8);
    CHECK(all.actual_regions().empty());
    CHECK(KnowledgeBase::known_only(s, CrKnowledge::None).known_crs().empty());
    const KnowledgeBase full(s, CrKnowledge::None);
    CHECK(full.actual_reads() == 0);
    CHECK_FALSE(full.actual_regions().empty());
    CHECK(full.actual_reads() == 1);
}
