#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "needlesteer/experiment.hpp"
#include "needlesteer/scenario_io.hpp"

using namespace needlesteer;

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<CrKnowledge> modes_from(const std::string& text) {
    if (text == "both") return {CrKnowledge::All, CrKnowledge::None};
    return {cr_knowledge_from_string(text)};
}

void write_witness(const std::filesystem::path& path, const Scenario& s, std::span<const Action> actions) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    write_trace(out, model_trace(s.start, s.needle, actions));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Needle-steering planning and verification engine"};
    app.require_subcommand(1);

    std::string scenario = "no_cr";
    std::string known = "all";
    std::string out;
    std::uint64_t seed = 1;

    // run
    auto* run = app.add_subcommand("run", "Seeded OSS runs against the virtual needle");
    int runs = 50;
    double noise = 0.0, timeout = 120.0;
    std::string deflect = "none", log_dir, clock = "virtual";
    int jobs = 1;
    run->add_option("--scenario", scenario, "Builtin name, scenario file, comma list or 'all'");
    run->add_option("--runs", runs, "Runs per scenario and knowledge mode")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "Base seed; run i uses seed+i");
    run->add_option("--noise", noise, "Measurement noise sigma (mm)")->check(CLI::NonNegativeNumber);
    run->add_option("--deflect", deflect, "Deflection level: none, moderate, strong or a number");
    run->add_option("--known-crs", known, "all, none or both")->check(CLI::IsMember({"all", "none", "both"}));
    run->add_option("--timeout", timeout, "Per-run timeout (s)")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Results CSV path");
    run->add_option("--log-dir", log_dir, "Directory for per-run NDJSON logs");
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--clock", clock, "Synthesis time source")->check(CLI::IsMember({"virtual", "wall"}));

    // verify
    auto* verify = app.add_subcommand("verify", "Existence of a path to the final TR");
    std::size_t budget = 400'000;
    verify->add_option("--scenario", scenario, "Builtin name or scenario file");
    verify->add_option("--known-crs", known, "all or none")->check(CLI::IsMember({"all", "none"}));
    verify->add_option("--out", out, "Witness trace CSV");
    verify->add_option("--budget", budget, "Expanded-state budget");

    // synth
    auto* synth = app.add_subcommand("synth", "Synthesize a motion plan file");
    std::string trace_out;
    synth->add_option("--scenario", scenario, "Builtin name or scenario file");
    synth->add_option("--known-crs", known, "all or none")->check(CLI::IsMember({"all", "none"}));
    synth->add_option("--out", out, "Plan file (stdout when absent)");
    synth->add_option("--trace", trace_out, "Model trace CSV of the plan");
    synth->add_option("--budget", budget, "Expanded-state budget");

    // trace
    auto* trace = app.add_subcommand("trace", "Replay a plan file on the model and write a trace CSV");
    std::string plan_path;
    double radius_scale = 1.0;
    trace->add_option("--plan", plan_path, "Plan file")->required();
    trace->add_option("--scenario", scenario, "Start pose source");
    trace->add_option("--radius-scale", radius_scale, "Multiplier on the plan radius")->check(CLI::PositiveNumber);
    trace->add_option("--out", out, "Trace CSV (stdout when absent)");

    // match
    auto* match = app.add_subcommand("match", "Match a reference trace through waypoint TRs");
    std::string reference;
    MatchConfig mc;
    double match_radius = 0.0;
    match->add_option("--reference", reference, "Reference trace CSV")->required();
    match->add_option("--waypoints,-k", mc.waypoints, "Waypoint count")->check(CLI::PositiveNumber);
    match->add_option("--waypoint-radius", mc.waypoint_radius_mm, "Waypoint TR radius (mm)")->check(CLI::PositiveNumber);
    match->add_option("--radius", match_radius, "Motion-circle radius (fitted when absent)")->check(CLI::PositiveNumber);
    match->add_option("--out", out, "Matched trace CSV");

    // plot
    auto* plot = app.add_subcommand("plot", "Render a run log as SVG");
    std::string log_path;
    plot->add_option("--log", log_path, "Run log (NDJSON)")->required();
    plot->add_option("--out", out, "SVG path (stdout when absent)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ExperimentConfig cfg;
            cfg.scenarios = scenario == "all" ? builtin_names() : split_list(scenario);
            cfg.modes = modes_from(known);
            cfg.runs = runs;
            cfg.base_seed = seed;
            cfg.noise_mm = noise;
            cfg.deflection = deflection_from_string(deflect);
            cfg.timeout_s = timeout;
            cfg.jobs = jobs;
            if (!log_dir.empty()) cfg.log_dir = log_dir;
            cfg.oss.clock = clock == "wall" ? ClockMode::Wall : ClockMode::Virtual;
            const ExperimentResult res = run_experiment(cfg);
            print_results_table(std::cout, res.rows);
            if (!out.empty()) {
                std::ofstream f = open_out(out);
                write_results_csv(f, res.rows);
            }
            if (res.any_cr_hit()) {
                std::cerr << "safety violation: a CR was hit\n";
                return 1;
            }
            return 0;
        }
        if (*verify) {
            const Scenario s = resolve_scenario(scenario);
            const KnowledgeBase kb = KnowledgeBase::known_only(s, cr_knowledge_from_string(known));
            SearchConfig sc;
            sc.node_budget = budget;
            const ExistenceResult r = exists_path(s, kb, sc);
            std::cout << to_string(r.verdict) << " expanded=" << r.stats.states_expanded
                      << " actions=" << r.actions.size() << "\n";
            if (r.verdict == Existence::Exists && !out.empty()) write_witness(out, s, r.actions);
            return r.verdict == Existence::Unknown ? 3 : 0;
        }
        if (*synth) {
            const Scenario s = resolve_scenario(scenario);
            const KnowledgeBase kb = KnowledgeBase::known_only(s, cr_knowledge_from_string(known));
            SearchConfig sc;
            sc.node_budget = budget;
            const SynthesisResult r = synthesize(s, kb, s.start, CheckerState{}, sc);
            if (!r.has_plan()) {
                std::cerr << to_string(r.status) << " expanded=" << r.stats.states_expanded << "\n";
                return r.status == SynthesisStatus::BudgetExceeded ? 3 : 1;
            }
            if (out.empty()) {
                write_plan(std::cout, r.plan->actions, s.needle);
            } else {
                std::ofstream f = open_out(out);
                write_plan(f, r.plan->actions, s.needle);
            }
            if (!trace_out.empty()) write_witness(trace_out, s, r.plan->actions);
            return 0;
        }
        if (*trace) {
            std::ifstream in(plan_path);
            if (!in) throw ConfigError("cannot open plan file '" + plan_path + "'");
            const PlanFile pf = read_plan(in);
            const Scenario s = resolve_scenario(scenario);
            NeedleParams params = pf.params.value_or(s.needle);
            params.scale = s.scale;
            params.radius_mm *= radius_scale;
            params.validate();
            const auto samples = model_trace(s.start, params, pf.actions);
            if (out.empty()) {
                write_trace(std::cout, samples);
            } else {
                std::ofstream f = open_out(out);
                write_trace(f, samples);
            }
            return 0;
        }
        if (*match) {
            std::ifstream in(reference);
            if (!in) throw ConfigError("cannot open reference '" + reference + "'");
            const auto ref = read_trace(in);
            if (match_radius > 0.0) mc.radius_mm = match_radius;
            const MatchResult r = match_reference(ref, mc);
            char buf[160];
            std::snprintf(buf, sizeof buf, "deviation_mm min=%.3f avg=%.3f max=%.3f radius_mm=%.3f\n", r.deviation.min,
                          r.deviation.avg, r.deviation.max, r.radius_mm);
            std::cout << buf;
            for (std::size_t i = 0; i < r.waypoints.size(); ++i) {
                const RealVec3& c = r.waypoints[i].center;
                std::snprintf(buf, sizeof buf, "waypoint %zu (%.2f,%.2f,%.2f) %s\n", i + 1, c.x, c.y, c.z,
                              r.waypoints[i].reached ? "reached" : "unreachable");
                std::cout << buf;
            }
            if (!out.empty()) {
                std::ofstream f = open_out(out);
                write_trace(f, r.candidate);
            }
            return std::all_of(r.waypoints.begin(), r.waypoints.end(), [](const WaypointReport& w) { return w.reached; })
                       ? 0
                       : 1;
        }
        if (*plot) {
            std::ifstream in(log_path);
            if (!in) throw ConfigError("cannot open log '" + log_path + "'");
            const std::string svg = render_svg(in);
            if (out.empty()) {
                std::cout << svg;
            } else {
                std::ofstream f = open_out(out);
                f << svg;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
