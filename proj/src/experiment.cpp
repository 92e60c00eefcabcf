#include "needlesteer/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "needlesteer/scenario_io.hpp"

namespace needlesteer {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

MinAvgMax summarize(const std::vector<double>& values) {
    if (values.empty()) return {};
    MinAvgMax m{values.front(), 0.0, values.front()};
    double sum = 0.0;
    for (double v : values) {
        m.min = std::min(m.min, v);
        m.max = std::max(m.max, v);
        sum += v;
    }
    m.avg = sum / static_cast<double>(values.size());
    return m;
}

std::string file_stem(const std::string& name) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
    return out;
}

RealVec3 vec_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

RealVec3 any_perpendicular(const RealVec3& t) {
    const RealVec3 ref = std::abs(t.x) < 0.9 ? RealVec3{1, 0, 0} : RealVec3{0, 1, 0};
    return normalize(ref - t * dot(ref, t));
}

}  // namespace

void ExperimentConfig::validate() const {
    if (scenarios.empty()) throw ConfigError("scenario: at least one is required");
    if (modes.empty()) throw ConfigError("known-crs: at least one mode is required");
    if (runs < 1) throw ConfigError("runs: must be >= 1");
    if (!(timeout_s > 0.0)) throw ConfigError("timeout: must be > 0");
    if (!(noise_mm >= 0.0)) throw ConfigError("noise: must be >= 0");
    if (!(deflection.level >= 0.0)) throw ConfigError("deflect: must be >= 0");
    if (jobs < 1) throw ConfigError("jobs: must be >= 1");
}

ResultsRow aggregate(const std::string& scenario, CrKnowledge mode, const std::vector<RunRecord>& records) {
    ResultsRow row;
    row.scenario = scenario;
    row.crs_known = mode;
    row.runs = static_cast<int>(records.size());
    if (records.empty()) return row;
    int reached = 0, hits = 0;
    std::vector<double> adj, synth, overall;
    for (const RunRecord& r : records) {
        reached += r.tr_reached ? 1 : 0;
        hits += r.cr_hit ? 1 : 0;
        adj.push_back(r.adjustments);
        row.motion_plans += r.motion_plans;
        synth.insert(synth.end(), r.synthesis_times_s.begin(), r.synthesis_times_s.end());
        overall.push_back(r.overall_time_s);
    }
    const double n = static_cast<double>(records.size());
    row.tr_reach_pct = 100.0 * reached / n;
    row.cr_hit_pct = 100.0 * hits / n;
    row.adjustments = summarize(adj);
    row.synthesis_s = summarize(synth);
    row.overall_s = summarize(overall);
    return row;
}

bool ExperimentResult::any_cr_hit() const {
    return std::any_of(rows.begin(), rows.end(), [](const ResultsRow& r) { return r.cr_hit_pct > 0.0; });
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    struct Cell {
        Scenario scenario;
        CrKnowledge mode;
    };
    std::vector<Cell> cells;
    for (const std::string& name : config.scenarios) {
        const Scenario s = resolve_scenario(name);
        for (CrKnowledge mode : config.modes) cells.push_back({s, mode});
    }
    OssConfig oss = config.oss;
    oss.timeout_s = config.timeout_s;
    for (const Cell& c : cells) oss.validate(c.scenario);
    if (config.log_dir) std::filesystem::create_directories(*config.log_dir);

    ExperimentResult result;
    result.records.assign(cells.size(), std::vector<RunRecord>(static_cast<std::size_t>(config.runs)));
    const std::size_t total = cells.size() * static_cast<std::size_t>(config.runs);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t task = next.fetch_add(1);
            if (task >= total) return;
            const std::size_t cell = task / static_cast<std::size_t>(config.runs);
            const std::size_t run = task % static_cast<std::size_t>(config.runs);
            try {
                VirtualNeedleConfig plant;
                plant.noise_sigma_mm = config.noise_mm;
                plant.deflection = config.deflection;
                plant.seed = config.base_seed + run;
                const Cell& c = cells[cell];
                if (config.log_dir) {
                    const auto path = *config.log_dir / (file_stem(c.scenario.name) + "_" +
                                                         std::string(to_string(c.mode)) + "_" +
                                                         std::to_string(plant.seed) + ".ndjson");
                    std::ofstream log(path);
                    if (!log) throw ConfigError("cannot write run log '" + path.string() + "'");
                    result.records[cell][run] = run_virtual(c.scenario, c.mode, oss, plant, &log);
                } else {
                    result.records[cell][run] = run_virtual(c.scenario, c.mode, oss, plant);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(total)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.rows.push_back(aggregate(cells[i].scenario.name, cells[i].mode, result.records[i]));
    }
    return result;
}

void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows) {
    out << "scenario,crs_known,tr_reach_pct,cr_hit_pct,adj_min,adj_avg,adj_max,motion_plans,synth_min_s,synth_avg_s,"
           "synth_max_s,overall_min_s,overall_avg_s,overall_max_s\n";
    for (const ResultsRow& r : rows) {
        out << r.scenario << ',' << to_string(r.crs_known) << ',' << fmt("%.2f", r.tr_reach_pct) << ','
            << fmt("%.2f", r.cr_hit_pct) << ',' << fmt("%.0f", r.adjustments.min) << ','
            << fmt("%.2f", r.adjustments.avg) << ',' << fmt("%.0f", r.adjustments.max) << ',' << r.motion_plans << ','
            << fmt("%.6f", r.synthesis_s.min) << ',' << fmt("%.6f", r.synthesis_s.avg) << ','
            << fmt("%.6f", r.synthesis_s.max) << ',' << fmt("%.2f", r.overall_s.min) << ','
            << fmt("%.2f", r.overall_s.avg) << ',' << fmt("%.2f", r.overall_s.max) << '\n';
    }
}

void print_results_table(std::ostream& out, const std::vector<ResultsRow>& rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-14s %-5s %8s %8s %-16s %7s %-26s %-24s\n", "Scenario", "CRs", "TR", "CR",
                  "Adjustments", "Plans", "Synthesis (s)", "Overall (s)");
    out << buf;
    for (const ResultsRow& r : rows) {
        const std::string adj = "(" + fmt("%.0f", r.adjustments.min) + "," + fmt("%.2f", r.adjustments.avg) + "," +
                                fmt("%.0f", r.adjustments.max) + ")";
        const std::string syn = "(" + fmt("%.4f", r.synthesis_s.min) + "," + fmt("%.4f", r.synthesis_s.avg) + "," +
                                fmt("%.4f", r.synthesis_s.max) + ")";
        const std::string all = "(" + fmt("%.2f", r.overall_s.min) + "," + fmt("%.2f", r.overall_s.avg) + "," +
                                fmt("%.2f", r.overall_s.max) + ")";
        std::snprintf(buf, sizeof buf, "%-14s %-5s %7.2f%% %7.2f%% %-16s %7ld %-26s %-24s\n", r.scenario.c_str(),
                      std::string(to_string(r.crs_known)).c_str(), r.tr_reach_pct, r.cr_hit_pct, adj.c_str(),
                      r.motion_plans, syn.c_str(), all.c_str());
        out << buf;
    }
}

RunRecord record_from_log(std::istream& log) {
    std::string line;
    int line_no = 0;
    std::optional<Json> end;
    while (std::getline(log, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(e.what(), line_no);
        }
        if (j.value("event", "") == "end") end = std::move(j);
    }
    if (!end) throw ParseError("run log has no end event");
    try {
        const Json& e = *end;
        RunRecord r;
        r.scenario = e.at("scenario").get<std::string>();
        r.crs_known = cr_knowledge_from_string(e.at("crs_known").get<std::string>());
        r.seed = e.at("seed").get<std::uint64_t>();
        r.tr_reached = e.at("tr_reached").get<bool>();
        r.cr_hit = e.at("cr_hit").get<bool>();
        r.adjustments = e.at("adjustments").get<int>();
        r.retreats = e.at("retreats").get<int>();
        r.motion_plans = e.at("motion_plans").get<int>();
        r.synthesis_times_s = e.at("synthesis_times_s").get<std::vector<double>>();
        r.overall_time_s = e.at("overall_time_s").get<double>();
        const std::string term = e.at("termination").get<std::string>();
        for (Termination t : {Termination::FinalTR, Termination::InfeasibleAtStart, Termination::Timeout,
                              Termination::Exhausted}) {
            if (to_string(t) == term) r.termination = t;
        }
        r.learned_crs = e.at("learned_crs").get<int>();
        r.final_depth_mm = e.at("final_depth_mm").get<double>();
        return r;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("malformed end event: ") + e.what());
    }
}

std::vector<TraceSample> model_trace(const NeedlePose& start, const NeedleParams& params, std::span<const Action> plan,
                                     int samples_per_step) {
    if (samples_per_step < 1) throw ContractError("samples_per_step must be >= 1");
    std::vector<TraceSample> out;
    double t = 0.0;
    out.push_back({t, unquantize(start.pos, params.scale)});
    NeedlePose pose = start;
    const double len = params.step_length_mm();
    for (const Action& a : plan) {
        if (!a.is_push()) {
            pose = rotate_bevel(pose, a.degrees);
            continue;
        }
        for (int j = 1; j <= samples_per_step; ++j) {
            const NeedlePose p = advance_arc(pose, len * j / samples_per_step, params.radius_mm, params.scale);
            t += params.dt_s / samples_per_step;
            out.push_back({t, unquantize(p.pos, params.scale)});
        }
        pose = step(pose, params);
    }
    return out;
}

MatchResult match_reference(std::span<const TraceSample> reference, const MatchConfig& config) {
    if (config.waypoints < 1) throw ConfigError("waypoints: must be >= 1");
    if (!(config.waypoint_radius_mm > 0.0)) throw ConfigError("waypoint radius: must be > 0");
    if (reference.size() < static_cast<std::size_t>(config.waypoints) + 1) {
        throw InsufficientData("reference needs at least " + std::to_string(config.waypoints + 1) + " samples");
    }

    std::vector<double> arc(reference.size(), 0.0);
    for (std::size_t i = 1; i < reference.size(); ++i) arc[i] = arc[i - 1] + distance(reference[i].pos, reference[i - 1].pos);
    const double total = arc.back();
    if (!(total > 0.0)) throw DegenerateGeometry("reference does not move");

    MatchResult result;
    for (int w = 1; w <= config.waypoints; ++w) {
        const double s = total * w / config.waypoints;
        std::size_t i = static_cast<std::size_t>(std::lower_bound(arc.begin(), arc.end(), s) - arc.begin());
        i = std::clamp<std::size_t>(i, 1, reference.size() - 1);
        const double seg = arc[i] - arc[i - 1];
        const double u = seg > 0.0 ? std::clamp((s - arc[i - 1]) / seg, 0.0, 1.0) : 1.0;
        result.waypoints.push_back({reference[i - 1].pos + (reference[i].pos - reference[i - 1].pos) * u, false});
    }

    // Start frame and radius from the leading part of the reference, fitted backwards.
    std::vector<TraceSample> lead;
    for (std::size_t i = 0; i < reference.size() && (arc[i] <= config.fit_span_mm || lead.size() < 8); ++i) {
        lead.push_back(reference[i]);
    }
    std::reverse(lead.begin(), lead.end());
    const RealVec3 p0 = reference.front().pos;
    RealVec3 tangent, normal;
    double radius = NeedleParams{}.radius_mm;
    try {
        FitOptions opts;
        opts.min_samples = 3;
        opts.min_arc_mm = 0.0;
        const FittedCircle fit = fit_motion_circle(lead, opts);
        if (fit.clamped) throw DegenerateGeometry("clamped");
        const RealVec3 in_plane = p0 - fit.plane_normal * dot(p0 - fit.center, fit.plane_normal);
        tangent = normalize(cross(fit.plane_normal, in_plane - fit.center));
        if (dot(tangent, reference[1].pos - p0) < 0.0) tangent = -tangent;
        normal = fit.center - in_plane;
        radius = fit.radius;
    } catch (const Error&) {
        std::vector<RealVec3> pts;
        for (auto it = lead.rbegin(); it != lead.rend(); ++it) pts.push_back(it->pos);
        tangent = fit_line_direction(pts);
        normal = any_perpendicular(tangent);
    }
    if (config.radius_mm) radius = *config.radius_mm;
    result.radius_mm = radius;

    Scenario sc;
    sc.name = "match";
    RealVec3 lo = p0, hi = p0;
    for (const TraceSample& s : reference) {
        lo = {std::min(lo.x, s.pos.x), std::min(lo.y, s.pos.y), std::min(lo.z, s.pos.z)};
        hi = {std::max(hi.x, s.pos.x), std::max(hi.y, s.pos.y), std::max(hi.z, s.pos.z)};
    }
    sc.workspace = {lo - RealVec3{30, 30, 30}, hi + RealVec3{30, 30, 30}};
    sc.needle.radius_mm = radius;
    sc.needle.speed_mm_s = config.speed_mm_s;
    sc.needle.dt_s = config.dt_s;
    sc.needle.validate();
    sc.start = make_pose(p0, tangent, normal, sc.scale);
    sc.limits.max_rotations = config.max_rotations;
    sc.limits.max_insertion_mm = 1.5 * total + 30.0;
    for (std::size_t w = 0; w < result.waypoints.size(); ++w) {
        Region r;
        r.kind = RegionKind::TR;
        r.center = quantize(result.waypoints[w].center, sc.scale);
        r.radius_mm = config.waypoint_radius_mm;
        sc.regions.push_back(r);
        sc.tr_order.push_back(static_cast<int>(w));
    }

    const KnowledgeBase none = KnowledgeBase::known_only(sc, CrKnowledge::None);
    SearchConfig search;
    search.node_budget = config.node_budget;
    const SynthesisResult joint = synthesize(planning_context(sc, none), sc.start, CheckerState{}, search);
    if (joint.has_plan()) {
        result.joint = true;
        result.actions = joint.plan->actions;
        for (WaypointReport& w : result.waypoints) w.reached = true;
    } else {
        // Waypoint by waypoint, skipping the ones that cannot be reached.
        NeedlePose pose = sc.start;
        CheckerState state;
        for (std::size_t w = 0; w < result.waypoints.size(); ++w) {
            Scenario one = sc;
            one.regions = {sc.regions[w]};
            one.tr_order = {0};
            CheckerState fresh;
            fresh.insertion_depth_mm = state.insertion_depth_mm;
            const SynthesisResult seg = synthesize(planning_context(one, none), pose, fresh, search);
            if (!seg.has_plan()) continue;
            result.waypoints[w].reached = true;
            result.actions.insert(result.actions.end(), seg.plan->actions.begin(), seg.plan->actions.end());
            pose = seg.plan->terminal_pose;
            state.insertion_depth_mm = fresh.insertion_depth_mm + seg.plan->arc_length_mm;
        }
    }
    result.candidate = model_trace(sc.start, sc.needle, result.actions);
    result.deviation = trace_deviation(reference, std::span<const TraceSample>(result.candidate));
    return result;
}

std::string render_svg(std::istream& log) {
    std::string line;
    int line_no = 0;
    std::optional<Scenario> scenario;
    std::vector<RealVec3> path;
    std::vector<std::pair<RealVec3, double>> learned;
    while (std::getline(log, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw ParseError(e.what(), line_no);
        }
        try {
            const std::string ev = j.at("event").get<std::string>();
            if (ev == "scenario") {
                scenario = load_scenario(j.at("scenario").dump());
                path.push_back(unquantize(scenario->start.pos, scenario->scale));
            } else if (ev == "sample" || ev == "probe" || ev == "pull") {
                const char* key = j.contains("true") ? "true" : (ev == "sample" ? "measured" : "pos");
                if (ev == "pull" && !j.contains("true")) continue;
                path.push_back(vec_from(j.at(key)));
            } else if (ev == "learn") {
                learned.clear();
                for (const Json& k : j.at("learned")) learned.emplace_back(vec_from(k.at("center")), k.at("radius_mm").get<double>());
            }
        } catch (const Json::exception& e) {
            throw ParseError(std::string("malformed event: ") + e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!scenario) throw ParseError("run log has no scenario event");

    constexpr double panel = 320.0, margin = 24.0;
    const Workspace& ws = scenario->workspace;
    struct View {
        int u, v;
        const char* label;
    };
    const View views[3] = {{0, 2, "XZ"}, {1, 2, "YZ"}, {0, 1, "XY"}};
    std::ostringstream svg;
    const double width = 3 * panel + 4 * margin, height = panel + 2 * margin + 16;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", width) << "\" height=\""
        << fmt("%.0f", height) << "\" viewBox=\"0 0 " << fmt("%.0f", width) << ' ' << fmt("%.0f", height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int p = 0; p < 3; ++p) {
        const View& vw = views[p];
        const double ox = margin + p * (panel + margin), oy = margin + 16;
        const double su = ws.max[vw.u] - ws.min[vw.u], sv = ws.max[vw.v] - ws.min[vw.v];
        const double scale = panel / std::max(su, sv);
        auto px = [&](const RealVec3& q) { return ox + (q[vw.u] - ws.min[vw.u]) * scale; };
        auto py = [&](const RealVec3& q) { return oy + (q[vw.v] - ws.min[vw.v]) * scale; };
        svg << "<g id=\"" << vw.label << "\">\n";
        svg << "<text x=\"" << fmt("%.2f", ox) << "\" y=\"" << fmt("%.2f", oy - 6) << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << vw.label << "</text>\n";
        svg << "<rect x=\"" << fmt("%.2f", ox) << "\" y=\"" << fmt("%.2f", oy) << "\" width=\"" << fmt("%.2f", su * scale)
            << "\" height=\"" << fmt("%.2f", sv * scale) << "\" fill=\"none\" stroke=\"#888\"/>\n";
        for (const Region& r : scenario->regions) {
            const RealVec3 c = unquantize(r.center, scenario->scale);
            std::string style;
            if (r.kind == RegionKind::TR) style = "fill=\"#2ca02c\" fill-opacity=\"0.5\" stroke=\"#1a6b1a\"";
            if (r.kind == RegionKind::CR) style = "fill=\"#d62728\" fill-opacity=\"0.5\" stroke=\"#8b1a1a\"";
            if (r.kind == RegionKind::DR) style = "fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"3,3\" stroke-opacity=\"0.6\"";
            svg << "<circle cx=\"" << fmt("%.2f", px(c)) << "\" cy=\"" << fmt("%.2f", py(c)) << "\" r=\""
                << fmt("%.2f", r.radius_mm * scale) << "\" " << style << "/>\n";
        }
        for (const auto& [c, rad] : learned) {
            svg << "<circle cx=\"" << fmt("%.2f", px(c)) << "\" cy=\"" << fmt("%.2f", py(c)) << "\" r=\""
                << fmt("%.2f", rad * scale) << "\" fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"1.5\"/>\n";
        }
        if (path.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\" points=\"";
            for (std::size_t i = 0; i < path.size(); ++i) {
                svg << (i ? " " : "") << fmt("%.2f", px(path[i])) << ',' << fmt("%.2f", py(path[i]));
            }
            svg << "\"/>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace needlesteer
