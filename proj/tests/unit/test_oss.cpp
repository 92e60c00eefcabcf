#include <doctest.h>

#include <cmath>
#include <sstream>

#include "needlesteer/oss.hpp"

using namespace needlesteer;

namespace {

MotionPlan pushes(int n) {
    MotionPlan p;
    p.actions.assign(static_cast<std::size_t>(n), Action::push());
    return p;
}

// Point on the start circle of the builtin needle (r = 60) after arc length s.
RealVec3 start_arc(double s) {
    const double th = s / 60.0;
    return {60.0 * (1 - std::cos(th)), 0, 60.0 * std::sin(th)};
}

Scenario hidden_cr_on_path() {
    Scenario s = base_scenario("hidden");
    Region cr;
    cr.kind = RegionKind::CR;
    cr.center = quantize(start_arc(40), s.scale);
    cr.radius_mm = 4;
    cr.known = false;
    s.regions.push_back(cr);
    s.attach_detection_regions();
    s.validate();
    return s;
}

// Plant wrapper that shifts every measurement sideways by a fixed amount.
class OffsetPlant : public Plant {
public:
    OffsetPlant(Plant& inner, RealVec3 offset) : inner_(inner), offset_(offset) {}
    Measurement measure() override {
        Measurement m = inner_.measure();
        if (inner_.insertion_depth_mm() > 10) m.pos += offset_;
        return m;
    }
    void push(double dt) override { inner_.push(dt); }
    void rotate(int deg) override { inner_.rotate(deg); }
    void pull(double d) override { inner_.pull(d); }
    double insertion_depth_mm() const override { return inner_.insertion_depth_mm(); }

private:
    Plant& inner_;
    RealVec3 offset_;
};

}  // namespace

TEST_CASE("learned CR rules") {
    const Scenario s = builtin_scenario("no_cr");
    KnowledgeBase kb = KnowledgeBase::known_only(s, CrKnowledge::None);
    const OssConfig cfg;
    CHECK(learn_cr(kb, {0, 0, 40}, {0, 0, 1}, cfg, 4.0));
    REQUIRE(kb.known_crs().size() == 1);
    const KnownCr first = kb.known_crs()[0];
    CHECK(max_abs_diff(first.center_mm, {0, 0, 43}) < 1e-12);
    CHECK(first.radius_mm == cfg.rho_learn_mm);
    CHECK(first.dr_radius_mm == cfg.rho_learn_mm + 4.0);
    CHECK(first.learned);

    CHECK(learn_cr(kb, {0, 0, 38}, {0, 0, 1}, cfg, 4.0));
    CHECK(kb.known_crs().size() == 1);
    CHECK(kb.known_crs()[0].radius_mm == cfg.rho_learn_mm + cfg.delta_rho_mm);

    CHECK(learn_cr(kb, {30, 0, 20}, {0, 0, 1}, cfg, 4.0));
    CHECK(kb.known_crs().size() == 2);
    CHECK(kb.learned_count() == 2);

    const Scenario small = builtin_scenario("small_mid_cr");
    KnowledgeBase known = KnowledgeBase::known_only(small, CrKnowledge::All);
    CHECK_FALSE(learn_cr(known, {0, 0, 37}, {0, 0, 1}, cfg, 4.0));
    CHECK(known.known_crs().size() == 1);
    CHECK(known.known_crs()[0].radius_mm == 6);
}

TEST_CASE("initial probe recovers the true radius without noise") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedleConfig pc;
    pc.true_radius_mm = 45;
    VirtualNeedle plant(s, pc);
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    const ProbeResult p = engine.initial_probe(3.0);
    CHECK(p.fitted);
    CHECK(std::abs(p.radius_mm - 45) / 45 < 1e-3);
    CHECK(engine.radius_estimate_mm() == p.radius_mm);
    CHECK(engine.belief_depth_mm() == doctest::Approx(3.0));
}

TEST_CASE("noisy probes either fit within 5% or fall back to the default radius") {
    const Scenario s = builtin_scenario("no_cr");
    int fitted = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        VirtualNeedleConfig pc;
        pc.noise_sigma_mm = 0.5;
        pc.seed = seed;
        VirtualNeedle plant(s, pc);
        OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
        const ProbeResult p = engine.initial_probe(3.0);
        if (p.fitted) {
            ++fitted;
            CHECK(std::abs(p.radius_mm - 60) / 60 <= 0.05);
        } else {
            CHECK(p.radius_mm == s.needle.radius_mm);
        }
    }
    MESSAGE("noisy probes accepted by the fit gate: " << fitted);
}

TEST_CASE("one-tick probe falls back to the default radius") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedleConfig pc;
    pc.true_radius_mm = 45;
    VirtualNeedle plant(s, pc);
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    const ProbeResult p = engine.initial_probe(0.05);
    CHECK_FALSE(p.fitted);
    CHECK(p.radius_mm == s.needle.radius_mm);
}

TEST_CASE("monitored execution on an ideal plant completes") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedle plant(s, VirtualNeedleConfig{});
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    const RunRecord r = engine.run();
    CHECK(r.tr_reached);
    CHECK(r.adjustments == 0);
    CHECK(r.motion_plans >= 1);
    CHECK(r.termination == Termination::FinalTR);
    CHECK_FALSE(r.cr_hit);
}

TEST_CASE("hidden CR on the path aborts on force and is learned") {
    const Scenario s = hidden_cr_on_path();
    VirtualNeedle plant(s, VirtualNeedleConfig{});
    OssEngine engine(s, CrKnowledge::None, OssConfig{}, plant);
    const auto res = engine.execute_plan_monitored(pushes(30));
    CHECK(res.status == OssEngine::ExecStatus::AbortedForce);
    CHECK(engine.knowledge().learned_count() == 1);
    CHECK_FALSE(plant.audit_cr_hit());
    // Aborted inside the detection shell, before the CR.
    CHECK(engine.belief_depth_mm() < 40 - 4 + 0.01);
    CHECK(engine.belief_depth_mm() >= 40 - 8 - 0.25 - 1e-9);
}

TEST_CASE("measurements drifting past eps_dev abort on deviation") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedle inner(s, VirtualNeedleConfig{});
    OffsetPlant plant(inner, {2.5, 0, 0});
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    const auto res = engine.execute_plan_monitored(pushes(20));
    CHECK(res.status == OssEngine::ExecStatus::AbortedDeviation);
    CHECK(res.action_index >= 4);
    CHECK(res.action_index <= 6);

    VirtualNeedle inner2(s, VirtualNeedleConfig{});
    OffsetPlant small(inner2, {1.5, 0, 0});
    OssEngine calm(s, CrKnowledge::All, OssConfig{}, small);
    // Only the final in-target check can fail: the plan stops short of the TR.
    CHECK(calm.execute_plan_monitored(pushes(20)).action_index == 20);
}

TEST_CASE("readjust pulls back along the path") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedle plant(s, VirtualNeedleConfig{});
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    engine.execute_plan_monitored(pushes(12));
    REQUIRE(engine.belief_depth_mm() == doctest::Approx(30));
    CHECK(engine.readjust());
    CHECK(engine.belief_depth_mm() == doctest::Approx(20));
    CHECK(plant.insertion_depth_mm() == doctest::Approx(20));
    CHECK(engine.checker_state().rotations_used == 0);
    CHECK(std::isinf(engine.checker_state().push_since_last_rotation_mm));
    const RealVec3 tip = unquantize(engine.belief().pos, 100);
    CHECK(distance(tip, start_arc(20)) < 0.02);
    CHECK(distance(tip, *plant.audit_true_pos()) < 0.02);

    VirtualNeedle shallow_plant(s, VirtualNeedleConfig{});
    OssEngine shallow(s, CrKnowledge::All, OssConfig{}, shallow_plant);
    shallow.initial_probe(4.0);
    CHECK(shallow.readjust());
    CHECK(shallow.belief_depth_mm() == 0);
    CHECK(shallow.belief().pos == s.start.pos);
    CHECK_FALSE(shallow.readjust());
}

TEST_CASE("bevel rotations survive a pull") {
    const Scenario s = builtin_scenario("no_cr");
    VirtualNeedle plant(s, VirtualNeedleConfig{});
    OssEngine engine(s, CrKnowledge::All, OssConfig{}, plant);
    MotionPlan plan = pushes(4);
    plan.actions.push_back(Action::rotate(90));
    for (int i = 0; i < 6; ++i) plan.actions.push_back(Action::push());
    engine.execute_plan_monitored(plan);
    engine.readjust();
    engine.execute_plan_monitored(pushes(4));
    CHECK(distance(unquantize(engine.belief().pos, 100), *plant.audit_true_pos()) < 0.05);
}

TEST_CASE("the engine never reads ground truth") {
    for (const std::string& name : {"small_mid_cr", "large_mid_cr", "tunnel_crs"}) {
        const Scenario s = builtin_scenario(name);
        VirtualNeedle plant(s, VirtualNeedleConfig{});
        OssEngine engine(s, CrKnowledge::None, OssConfig{}, plant);
        engine.run();
        CHECK(engine.knowledge().actual_reads() == 0);
    }
}

TEST_CASE("known large CR is infeasible before any motion") {
    const Scenario s = builtin_scenario("large_mid_cr");
    const RunRecord r = run_virtual(s, CrKnowledge::All, OssConfig{}, VirtualNeedleConfig{});
    CHECK(r.termination == Termination::InfeasibleAtStart);
    CHECK(r.motion_plans == 0);
    CHECK(r.final_depth_mm == 0);
    CHECK_FALSE(r.tr_reached);
}

TEST_CASE("unknown large CR is discovered, learned and never hit") {
    const Scenario s = builtin_scenario("large_mid_cr");
    const RunRecord r = run_virtual(s, CrKnowledge::None, OssConfig{}, VirtualNeedleConfig{});
    CHECK(r.adjustments >= 1);
    CHECK(r.learned_crs >= 1);
    CHECK_FALSE(r.tr_reached);
    CHECK_FALSE(r.cr_hit);
}

TEST_CASE("unsafe monitor settings are rejected") {
    const Scenario s = builtin_scenario("small_mid_cr");
    OssConfig cfg;
    cfg.monitors.stride = 50;
    VirtualNeedle plant(s, VirtualNeedleConfig{});
    CHECK_THROWS_AS(OssEngine(s, CrKnowledge::All, cfg, plant), ConfigError);
    cfg = OssConfig{};
    cfg.monitors.eps_dev_mm = 4;
    CHECK_THROWS_AS(OssEngine(s, CrKnowledge::All, cfg, plant), ConfigError);
    CHECK_THROWS_AS(deflection_from_string("lots"), ConfigError);
}

TEST_CASE("run log") {
    const Scenario s = builtin_scenario("no_cr");
    std::stringstream log;
    const RunRecord r = run_virtual(s, CrKnowledge::All, OssConfig{}, VirtualNeedleConfig{}, &log);
    std::string line, first, last;
    int lines = 0;
    while (std::getline(log, line)) {
        if (lines++ == 0) first = line;
        last = line;
    }
    CHECK(first.find("\"event\":\"scenario\"") != std::string::npos);
    CHECK(last.find("\"event\":\"end\"") != std::string::npos);
    CHECK(r.tr_reached);
}

TEST_CASE("timeouts bound the virtual clock") {
    const Scenario s = builtin_scenario("no_cr");
    OssConfig cfg;
    cfg.timeout_s = 5;
    const RunRecord r = run_virtual(s, CrKnowledge::All, cfg, VirtualNeedleConfig{});
    CHECK(r.termination == Termination::Timeout);
    CHECK(r.overall_time_s <= 5.0 + 0.01);
}
