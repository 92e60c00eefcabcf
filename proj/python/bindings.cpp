#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "needlesteer/experiment.hpp"
#include "needlesteer/scenario_io.hpp"

namespace py = pybind11;
using namespace needlesteer;

namespace {

py::tuple vec(const RealVec3& v) { return py::make_tuple(v.x, v.y, v.z); }

RealVec3 to_vec(const py::sequence& s) {
    if (py::len(s) != 3) throw py::value_error("expected a 3-sequence");
    return {s[0].cast<double>(), s[1].cast<double>(), s[2].cast<double>()};
}

std::vector<TraceSample> to_trace(const py::sequence& points, double dt) {
    std::vector<TraceSample> out;
    for (std::size_t i = 0; i < py::len(points); ++i) {
        out.push_back({dt * static_cast<double>(i), to_vec(points[i].cast<py::sequence>())});
    }
    return out;
}

py::list trace_points(const std::vector<TraceSample>& trace) {
    py::list out;
    for (const TraceSample& s : trace) out.append(vec(s.pos));
    return out;
}

std::vector<Action> parse_plan(const std::vector<std::string>& plan) {
    std::stringstream ss;
    for (const std::string& a : plan) ss << a << "\n";
    return read_plan(ss).actions;
}

std::vector<std::string> plan_strings(const std::vector<Action>& actions) {
    std::vector<std::string> out;
    for (const Action& a : actions) out.push_back(a.to_string());
    return out;
}

py::dict record_dict(const RunRecord& r) {
    py::dict d;
    d["scenario"] = r.scenario;
    d["crs_known"] = std::string(to_string(r.crs_known));
    d["seed"] = r.seed;
    d["tr_reached"] = r.tr_reached;
    d["cr_hit"] = r.cr_hit;
    d["adjustments"] = r.adjustments;
    d["retreats"] = r.retreats;
    d["motion_plans"] = r.motion_plans;
    d["synthesis_times_s"] = r.synthesis_times_s;
    d["overall_time_s"] = r.overall_time_s;
    d["termination"] = std::string(to_string(r.termination));
    d["learned_crs"] = r.learned_crs;
    d["final_depth_mm"] = r.final_depth_mm;
    return d;
}

py::dict synth_dict(const Scenario& s, const SynthesisResult& r) {
    py::dict d;
    d["status"] = std::string(to_string(r.status));
    d["expanded"] = r.stats.states_expanded;
    d["plan"] = r.plan ? plan_strings(r.plan->actions) : std::vector<std::string>{};
    py::list poses;
    if (r.plan) {
        for (const NeedlePose& p : r.plan->poses) poses.append(vec(unquantize(p.pos, s.scale)));
    }
    d["positions"] = poses;
    return d;
}

Scenario resolve(const std::string& name_or_json) {
    if (!name_or_json.empty() && name_or_json.front() == '{') return load_scenario(name_or_json);
    return resolve_scenario(name_or_json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Needle-steering planning and verification engine";

    // Later registrations are tried first, so the base class goes first.
    auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DegenerateGeometry>(m, "DegenerateGeometry", base.ptr());
    py::register_exception<InsufficientData>(m, "InsufficientData", base.ptr());

    m.def("builtin_names", &builtin_names);
    m.def(
        "scenario_json", [](const std::string& name) { return save_scenario(resolve(name)); },
        "Canonical JSON document of a builtin name, file path or JSON text", py::arg("scenario"));

    m.def(
        "verify",
        [](const std::string& scenario, const std::string& known, std::size_t budget) {
            const Scenario s = resolve(scenario);
            SearchConfig cfg;
            cfg.node_budget = budget;
            const ExistenceResult r = exists_path(s, KnowledgeBase::known_only(s, cr_knowledge_from_string(known)), cfg);
            py::dict d;
            d["verdict"] = std::string(to_string(r.verdict));
            d["expanded"] = r.stats.states_expanded;
            d["plan"] = plan_strings(r.actions);
            return d;
        },
        py::arg("scenario"), py::arg("known_crs") = "all", py::arg("budget") = 400'000);

    m.def(
        "synthesize",
        [](const std::string& scenario, const std::string& known, std::size_t budget) {
            const Scenario s = resolve(scenario);
            SearchConfig cfg;
            cfg.node_budget = budget;
            const KnowledgeBase kb = KnowledgeBase::known_only(s, cr_knowledge_from_string(known));
            return synth_dict(s, synthesize(s, kb, s.start, CheckerState{}, cfg));
        },
        py::arg("scenario"), py::arg("known_crs") = "all", py::arg("budget") = 400'000);

    m.def(
        "model_trace",
        [](const std::string& scenario, const std::vector<std::string>& plan, double radius_scale) {
            const Scenario s = resolve(scenario);
            NeedleParams p = s.needle;
            p.radius_mm *= radius_scale;
            p.validate();
            return trace_points(model_trace(s.start, p, parse_plan(plan)));
        },
        py::arg("scenario"), py::arg("plan"), py::arg("radius_scale") = 1.0);

    m.def(
        "run",
        [](const std::string& scenario, const std::string& known, std::uint64_t seed, double noise,
           const std::string& deflect, double timeout) {
            const Scenario s = resolve(scenario);
            OssConfig cfg;
            cfg.timeout_s = timeout;
            VirtualNeedleConfig pc;
            pc.noise_sigma_mm = noise;
            pc.deflection = deflection_from_string(deflect);
            pc.seed = seed;
            py::gil_scoped_release release;
            const RunRecord r = run_virtual(s, cr_knowledge_from_string(known), cfg, pc);
            py::gil_scoped_acquire acquire;
            return record_dict(r);
        },
        py::arg("scenario"), py::arg("known_crs") = "all", py::arg("seed") = 1, py::arg("noise") = 0.0,
        py::arg("deflect") = "none", py::arg("timeout") = 120.0);

    m.def(
        "run_log",
        [](const std::string& scenario, const std::string& known, std::uint64_t seed, double noise,
           const std::string& deflect) {
            const Scenario s = resolve(scenario);
            VirtualNeedleConfig pc;
            pc.noise_sigma_mm = noise;
            pc.deflection = deflection_from_string(deflect);
            pc.seed = seed;
            std::stringstream log;
            run_virtual(s, cr_knowledge_from_string(known), OssConfig{}, pc, &log);
            return log.str();
        },
        "NDJSON event log of one run", py::arg("scenario"), py::arg("known_crs") = "all", py::arg("seed") = 1,
        py::arg("noise") = 0.0, py::arg("deflect") = "none");

    m.def(
        "experiment_csv",
        [](const std::vector<std::string>& scenarios, const std::string& known, int runs, std::uint64_t seed,
           double noise, const std::string& deflect, int jobs) {
            ExperimentConfig cfg;
            cfg.scenarios = scenarios;
            cfg.modes = known == "both" ? std::vector<CrKnowledge>{CrKnowledge::All, CrKnowledge::None}
                                        : std::vector<CrKnowledge>{cr_knowledge_from_string(known)};
            cfg.runs = runs;
            cfg.base_seed = seed;
            cfg.noise_mm = noise;
            cfg.deflection = deflection_from_string(deflect);
            cfg.jobs = jobs;
            std::stringstream out;
            {
                py::gil_scoped_release release;
                write_results_csv(out, run_experiment(cfg).rows);
            }
            return out.str();
        },
        py::arg("scenarios"), py::arg("known_crs") = "both", py::arg("runs") = 50, py::arg("seed") = 1,
        py::arg("noise") = 0.0, py::arg("deflect") = "none", py::arg("jobs") = 1);

    m.def(
        "fit_circle",
        [](const py::sequence& points) {
            const FittedCircle f = fit_motion_circle(to_trace(points, 0.1));
            py::dict d;
            d["center"] = vec(f.center);
            d["radius"] = f.radius;
            d["normal"] = vec(f.plane_normal);
            d["tangent"] = vec(f.tangent_at_end);
            d["rms"] = f.rms_residual;
            d["clamped"] = f.clamped;
            return d;
        },
        "Motion-circle fit of consecutive tip positions", py::arg("points"));

    m.def(
        "trace_deviation",
        [](const py::sequence& reference, const py::sequence& candidate) {
            const Deviation d = trace_deviation(to_trace(reference, 1), to_trace(candidate, 1));
            return py::make_tuple(d.min, d.avg, d.max);
        },
        py::arg("reference"), py::arg("candidate"));

    m.def(
        "match",
        [](const py::sequence& reference, int waypoints, double waypoint_radius, double dt) {
            MatchConfig cfg;
            cfg.waypoints = waypoints;
            cfg.waypoint_radius_mm = waypoint_radius;
            const MatchResult r = match_reference(to_trace(reference, dt), cfg);
            py::dict d;
            d["deviation"] = py::make_tuple(r.deviation.min, r.deviation.avg, r.deviation.max);
            d["radius_mm"] = r.radius_mm;
            d["plan"] = plan_strings(r.actions);
            std::vector<bool> reached;
            for (const WaypointReport& w : r.waypoints) reached.push_back(w.reached);
            d["reached"] = reached;
            d["candidate"] = trace_points(r.candidate);
            return d;
        },
        py::arg("reference"), py::arg("waypoints") = 8, py::arg("waypoint_radius") = 2.0, py::arg("dt") = 0.1);

    m.def(
        "render_svg",
        [](const std::string& log) {
            std::istringstream in(log);
            return render_svg(in);
        },
        py::arg("log"));
}
