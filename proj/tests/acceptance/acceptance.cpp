// One PASS/FAIL line per acceptance criterion. Usage: acceptance <path-to-cli> <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "../common/brute_force.hpp"
#include "needlesteer/experiment.hpp"
#include "needlesteer/scenario_io.hpp"

using namespace needlesteer;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1f s)", secs);
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << v.detail << buf << std::endl;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentConfig base_config(const std::vector<std::string>& scenarios, std::vector<CrKnowledge> modes, int runs) {
    ExperimentConfig cfg;
    cfg.scenarios = scenarios;
    cfg.modes = std::move(modes);
    cfg.runs = runs;
    cfg.jobs = worker_count();
    return cfg;
}

Verdict safety() {
    long runs = 0;
    double worst = 0;
    for (double noise : {0.0, 0.5}) {
        for (double level : {0.0, 1.0}) {
            ExperimentConfig cfg = base_config(builtin_names(), {CrKnowledge::All, CrKnowledge::None}, 50);
            cfg.noise_mm = noise;
            cfg.deflection = DeflectionModel{level};
            for (const ResultsRow& row : run_experiment(cfg).rows) {
                runs += row.runs;
                worst = std::max(worst, row.cr_hit_pct);
            }
        }
    }
    return {runs == 2000 && worst == 0.0, fmt("%.0f runs, worst cr_hit_pct %.2f", runs, worst)};
}

Verdict no_cr_ideal() {
    const ResultsRow row = run_experiment(base_config({"no_cr"}, {CrKnowledge::All, CrKnowledge::None}, 50)).rows[0];
    return {row.tr_reach_pct == 100.0 && row.adjustments.max == 0 && row.cr_hit_pct == 0,
            fmt("reach %.2f%%, adjustments max %.0f", row.tr_reach_pct, row.adjustments.max)};
}

Verdict large_known() {
    ExperimentConfig cfg = base_config({"large_mid_cr"}, {CrKnowledge::All}, 50);
    cfg.oss.clock = ClockMode::Wall;
    const ExperimentResult res = run_experiment(cfg);
    bool ok = true;
    double worst_synth = 0, deepest = 0;
    for (const RunRecord& r : res.records[0]) {
        ok = ok && r.termination == Termination::InfeasibleAtStart && r.motion_plans == 0 && !r.tr_reached &&
             r.synthesis_times_s.size() == 1;
        for (double t : r.synthesis_times_s) worst_synth = std::max(worst_synth, t);
        deepest = std::max(deepest, r.final_depth_mm);
    }
    ok = ok && deepest == 0 && worst_synth <= 1.0;
    return {ok, fmt("motion plans %.0f, max insertion %.2f mm, max synthesis %.4f s", res.rows[0].motion_plans,
                    deepest, worst_synth)};
}

Verdict large_unknown() {
    const ExperimentResult res = run_experiment(base_config({"large_mid_cr"}, {CrKnowledge::None}, 50));
    bool ok = true;
    for (const RunRecord& r : res.records[0]) {
        ok = ok && r.adjustments >= 1 && r.learned_crs >= 1 && !r.tr_reached && !r.cr_hit;
    }
    const ResultsRow& row = res.rows[0];
    return {ok, fmt("adjustments (%.0f,%.2f,%.0f)", row.adjustments.min, row.adjustments.avg, row.adjustments.max) +
                    fmt(", reach %.2f%%, cr_hit %.2f%%", row.tr_reach_pct, row.cr_hit_pct)};
}

Verdict known_obstacles() {
    const ExperimentResult res =
        run_experiment(base_config({"small_mid_cr", "surface_crs", "tunnel_crs"}, {CrKnowledge::All}, 50));
    bool ok = true;
    std::string detail;
    for (const ResultsRow& row : res.rows) {
        ok = ok && row.tr_reach_pct >= 95.0 && row.adjustments.max <= 1;
        detail += row.scenario + fmt(" %.2f%%/%.0f ", row.tr_reach_pct, row.adjustments.max);
    }
    return {ok, detail + "(reach/max adjustments)"};
}

Verdict tunnel_unknown() {
    const ResultsRow row = run_experiment(base_config({"tunnel_crs"}, {CrKnowledge::None}, 50)).rows[0];
    return {row.tr_reach_pct >= 85.0 && row.adjustments.max <= 5,
            fmt("reach %.2f%%, adjustments (%.0f,%.2f,", row.tr_reach_pct, row.adjustments.min, row.adjustments.avg) +
                fmt("%.0f)", row.adjustments.max)};
}

Verdict self_matching() {
    const Scenario s = builtin_scenario("no_cr");
    auto pushes = [](std::vector<Action>& plan, int n) {
        for (int i = 0; i < n; ++i) plan.push_back(Action::push());
    };
    std::vector<std::vector<Action>> plans(3);
    pushes(plans[0], 36);
    pushes(plans[1], 16);
    plans[1].push_back(Action::rotate(180));
    pushes(plans[1], 20);
    pushes(plans[2], 12);
    plans[2].push_back(Action::rotate(90));
    pushes(plans[2], 12);
    plans[2].push_back(Action::rotate(270));
    pushes(plans[2], 12);

    bool ok = true;
    double worst_exact = 0, worst_perturbed = 0;
    for (const auto& plan : plans) {
        worst_exact = std::max(worst_exact, match_reference(model_trace(s.start, s.needle, plan)).deviation.avg);
        for (double f : {0.9, 1.1}) {
            NeedleParams p = s.needle;
            p.radius_mm *= f;
            worst_perturbed = std::max(worst_perturbed, match_reference(model_trace(s.start, p, plan)).deviation.avg);
        }
    }
    ok = worst_exact <= 1.0 && worst_perturbed <= 3.0;
    return {ok, fmt("worst avg deviation %.3f mm on model references, %.3f mm with radius +-10%%", worst_exact,
                    worst_perturbed)};
}

Verdict kinematics_oracle() {
    NeedleParams quarter;
    quarter.radius_mm = 50;
    quarter.dt_s = 1;
    quarter.speed_mm_s = 50 * std::numbers::pi / 2;
    const NeedlePose canonical = make_pose({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, 100);
    const NeedlePose q = step(canonical, quarter);
    const double tol = 1.0 / 100 + 1e-6;
    const double pos_err = max_abs_diff(unquantize(q.pos, 100), {50, 0, 50});
    bool ok = pos_err <= tol && max_abs_diff(q.tangent, {1, 0, 0}) <= 1e-9 && max_abs_diff(q.normal, {0, 0, -1}) <= 1e-9;

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> len(1, 60);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const RealVec3 t = normalize({u(rng), u(rng), u(rng)});
        const NeedlePose start = make_pose({u(rng) * 30, u(rng) * 30, u(rng) * 30}, t, cross(t, {u(rng), u(rng), u(rng)}), 100);
        NeedleParams p;
        p.radius_mm = 20 + 60 * (u(rng) + 1);
        p.dt_s = 0.1 + 0.9 * (u(rng) + 1) / 2;
        const MotionCircle c = motion_circle(start, p.radius_mm, 100);
        const std::vector<Action> plan(static_cast<std::size_t>(len(rng)), Action::push());
        for (const NeedlePose& pose : apply_plan(start, p, plan)) {
            worst = std::max(worst, std::abs(distance(unquantize(pose.pos, 100), c.center) - p.radius_mm));
        }
    }
    ok = ok && worst <= tol;
    return {ok, fmt("quarter arc error %.4f mm, worst circle deviation %.4f mm over 1000 plans (bound %.6f)", pos_err,
                    worst, tol)};
}

Verdict brute_force() {
    std::mt19937_64 rng(99);
    int agree = 0, feasible = 0, unsafe = 0;
    for (int i = 0; i < 200; ++i) {
        const oracle::SmallInstance inst = oracle::random_small_instance(rng);
        SearchConfig cfg;
        cfg.max_depth = 12;
        const SynthesisResult r = synthesize(inst.ctx, inst.start, CheckerState{}, cfg);
        const bool expected = oracle::brute_force_feasible(inst.ctx, inst.start, 12);
        agree += r.has_plan() == expected ? 1 : 0;
        if (r.has_plan()) {
            ++feasible;
            unsafe += verify_plan_safe(r.plan->actions, inst.start, inst.ctx).safe ? 0 : 1;
        }
    }
    return {agree == 200 && unsafe == 0,
            fmt("%.0f/200 agree, %.0f feasible, %.0f unsafe plans", agree, feasible, unsafe)};
}

Verdict fitting_recovery() {
    auto arc = [](double r, int n, double sigma, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0, 1);
        std::vector<TraceSample> out;
        for (int i = 0; i < n; ++i) {
            const double th = (std::numbers::pi / 2) * i / (n - 1);
            RealVec3 p{r * (1 - std::cos(th)), 0, r * std::sin(th)};
            if (sigma > 0) p += RealVec3{g(rng), g(rng), g(rng)} * sigma;
            out.push_back({0.1 * i, p});
        }
        return out;
    };
    double worst_clean = 0, worst_noisy = 0;
    for (double r : {20.0, 50.0, 60.0, 150.0}) {
        worst_clean = std::max(worst_clean, std::abs(fit_motion_circle(arc(r, 40, 0, 0)).radius - r) / r);
    }
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        worst_noisy = std::max(worst_noisy, std::abs(fit_motion_circle(arc(50, 80, 0.5, seed)).radius - 50) / 50);
    }
    return {worst_clean <= 1e-3 && worst_noisy <= 0.05,
            fmt("worst relative error %.2e noiseless, %.4f at sigma 0.5 over 100 seeds", worst_clean, worst_noisy)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs every command in a fresh directory and returns stdout plus every produced file.
std::string run_all(const std::string& cli, const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::vector<std::string> cmds{
        "run --scenario all --known-crs both --runs 3 --seed 7 --noise 0.5 --deflect moderate --out results.csv "
        "--log-dir logs",
        "verify --scenario small_mid_cr --out witness.csv",
        "verify --scenario large_mid_cr",
        "synth --scenario tunnel_crs --out plan.txt --trace plan_trace.csv",
        "trace --plan plan.txt --radius-scale 1.1 --out ref.csv",
        "match --reference ref.csv -k 8 --out matched.csv",
        "plot --log logs/tunnel_crs_none_7.ndjson --out plot.svg",
    };
    std::string all;
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        const fs::path out = dir / ("stdout_" + std::to_string(i) + ".txt");
        const std::string line = "cd '" + dir.string() + "' && '" + cli + "' " + cmds[i] + " > '" + out.string() + "' 2>&1";
        const int rc = std::system(line.c_str());
        all += "## " + cmds[i] + " rc=" + std::to_string(rc) + "\n";
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) all += "## " + f.string() + "\n" + slurp(dir / f);
    return all;
}

Verdict determinism(const std::string& cli, const fs::path& scratch) {
    const std::string a = run_all(cli, scratch / "det_a");
    const std::string b = run_all(cli, scratch / "det_b");
    const bool ok = a == b && a.find("rc=0") != std::string::npos;
    return {ok, fmt("%.0f bytes compared across two invocations of 7 commands", static_cast<double>(a.size()))};
}

Verdict performance() {
    double worst_synth = 0, worst_run = 0;
    int runs = 0;
    for (const std::string& name : builtin_names()) {
        const Scenario s = builtin_scenario(name);
        for (CrKnowledge mode : {CrKnowledge::All, CrKnowledge::None}) {
            for (double noise : {0.0, 0.5}) {
                for (double level : {0.0, 1.0}) {
                    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                        OssConfig cfg;
                        cfg.clock = ClockMode::Wall;
                        VirtualNeedleConfig pc;
                        pc.noise_sigma_mm = noise;
                        pc.deflection = DeflectionModel{level};
                        pc.seed = seed;
                        const auto t0 = std::chrono::steady_clock::now();
                        const RunRecord r = run_virtual(s, mode, cfg, pc);
                        worst_run = std::max(worst_run,
                                             std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                        for (double t : r.synthesis_times_s) worst_synth = std::max(worst_synth, t);
                        ++runs;
                    }
                }
            }
        }
    }
    return {worst_synth <= 30.0 && worst_run <= 120.0,
            fmt("%.0f runs, slowest synthesis %.3f s, slowest run %.3f s wall", runs, worst_synth, worst_run)};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <cli> <scratch-dir>\n";
        return 2;
    }
    const std::string cli = fs::absolute(argv[1]).string();
    const fs::path scratch = fs::absolute(argv[2]);
    fs::create_directories(scratch);

    report(1, "safety over 2000 seeded runs", safety);
    report(2, "no_cr ideal run", no_cr_ideal);
    report(3, "large_mid_cr known is infeasible before motion", large_known);
    report(4, "large_mid_cr unknown is discovered and learned", large_unknown);
    report(5, "known obstacles are avoided", known_obstacles);
    report(6, "tunnel_crs unknown", tunnel_unknown);
    report(7, "self-matching of model references", self_matching);
    report(8, "kinematics oracle and circle confinement", kinematics_oracle);
    report(9, "synthesis equals exhaustive enumeration", brute_force);
    report(10, "fitting recovery", fitting_recovery);
    report(11, "CLI determinism", [&] { return determinism(cli, scratch); });
    report(12, "desk-scale performance envelope", performance);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
