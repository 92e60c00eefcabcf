#include "needlesteer/synthesis.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace needlesteer {

EnvironmentReaction static_tissue() {
    return [](const ModelState& s) { return s; };
}

void SearchConfig::validate() const {
    if (max_rotations && *max_rotations < 0) throw ConfigError("search: max_rotations must be >= 0");
    if (min_push_mm && !(*min_push_mm >= 0.0)) throw ConfigError("search: min_push_mm must be >= 0");
    if (dt_s && !(*dt_s > 0.0)) throw ConfigError("search: dt must be > 0");
    if (max_depth <= 0) throw ConfigError("search: max_depth must be positive");
    if (node_budget == 0) throw ConfigError("search: node budget must be positive");
}

std::string_view to_string(SynthesisStatus status) {
    switch (status) {
        case SynthesisStatus::Plan:
            return "plan";
        case SynthesisStatus::Infeasible:
            return "infeasible";
        case SynthesisStatus::BudgetExceeded:
            return "budget_exceeded";
    }
    return "?";
}

std::string_view to_string(Existence e) {
    switch (e) {
        case Existence::Exists:
            return "feasible";
        case Existence::DoesNotExist:
            return "infeasible";
        case Existence::Unknown:
            return "unknown_budget";
    }
    return "?";
}

namespace {

constexpr std::array<Action, 4> kExpansionOrder{Action{Action::Kind::Push, 0}, Action{Action::Kind::Rotate, 90},
                                                Action{Action::Kind::Rotate, 180},
                                                Action{Action::Kind::Rotate, 270}};

struct StateKey {
    ScaledVec3 pos;
    std::array<std::int16_t, 6> frame;
    std::int16_t rotations;
    std::int16_t tr_index;
    std::int32_t pushes;
    std::int64_t spacing;  // push since last rotation, capped at min_push, in 1e-6 mm

    bool operator==(const StateKey&) const = default;
};

struct StateKeyHash {
    std::size_t operator()(const StateKey& k) const noexcept {
        std::uint64_t h = std::hash<ScaledVec3>{}(k.pos);
        auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001B3ULL + (h >> 31); };
        for (std::int16_t f : k.frame) mix(static_cast<std::uint16_t>(f));
        mix(static_cast<std::uint16_t>(k.rotations));
        mix(static_cast<std::uint16_t>(k.tr_index));
        mix(static_cast<std::uint32_t>(k.pushes));
        mix(static_cast<std::uint64_t>(k.spacing));
        return static_cast<std::size_t>(h);
    }
};

std::int16_t q3(double v) { return static_cast<std::int16_t>(std::lround(v * 1000.0)); }

StateKey make_key(const ModelState& s, int pushes, double min_push_mm) {
    const double spacing = std::min(s.checker.push_since_last_rotation_mm, min_push_mm);
    return {s.pose.pos,
            {q3(s.pose.tangent.x), q3(s.pose.tangent.y), q3(s.pose.tangent.z), q3(s.pose.normal.x),
             q3(s.pose.normal.y), q3(s.pose.normal.z)},
            static_cast<std::int16_t>(s.checker.rotations_used),
            static_cast<std::int16_t>(s.checker.curr_tr_index),
            pushes,
            std::llround(spacing * 1e6)};
}

// Distance still to cover: to the current TR surface, then between the remaining TR centers.
double heuristic(const ModelState& s, const CheckContext& ctx) {
    const auto& t = ctx.targets;
    std::size_t i = static_cast<std::size_t>(s.checker.curr_tr_index);
    if (i >= t.size()) return 0.0;
    double h = std::max(0.0, distance(unquantize(s.pose.pos, ctx.scale), t[i].center) - t[i].radius);
    for (std::size_t j = i + 1; j < t.size(); ++j) {
        h += std::max(0.0, distance(t[j - 1].center, t[j].center) - t[j].radius);
    }
    return h;
}

struct Node {
    ModelState state;
    int parent = -1;
    Action action;
    int depth = 0;
    int pushes = 0;
};

struct QueueEntry {
    double h;
    std::uint64_t seq;
    int node;
    bool operator>(const QueueEntry& o) const { return h != o.h ? h > o.h : seq > o.seq; }
};

MotionPlan build_plan(const std::vector<Node>& nodes, int leaf, const NeedleParams& params) {
    MotionPlan plan;
    std::vector<int> chain;
    for (int i = leaf; i >= 0; i = nodes[static_cast<std::size_t>(i)].parent) chain.push_back(i);
    std::reverse(chain.begin(), chain.end());
    for (std::size_t c = 0; c < chain.size(); ++c) {
        const Node& n = nodes[static_cast<std::size_t>(chain[c])];
        plan.poses.push_back(n.state.pose);
        if (c == 0) continue;
        plan.actions.push_back(n.action);
        if (n.action.is_push()) {
            plan.arc_length_mm += params.step_length_mm();
        } else {
            ++plan.rotation_count;
        }
    }
    plan.terminal_pose = plan.poses.back();
    return plan;
}

}  // namespace

SynthesisResult synthesize(const CheckContext& ctx_in, const NeedlePose& pose, const CheckerState& state,
                           const SearchConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    CheckContext ctx = ctx_in;
    if (config.max_rotations) ctx.limits.max_rotations = *config.max_rotations;
    if (config.min_push_mm) ctx.limits.min_push_mm = *config.min_push_mm;
    if (config.dt_s) ctx.needle.dt_s = *config.dt_s;
    ctx.needle.validate();
    const EnvironmentReaction reaction = config.reaction ? config.reaction : static_tissue();
    const double step_len = ctx.needle.step_length_mm();

    SynthesisResult result;
    auto finish = [&](SynthesisStatus status) {
        result.status = status;
        result.stats.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return result;
    };

    const auto [start_outcome, start_checker] = run_checker(pose, state, ctx);
    if (start_outcome == CheckOutcome::FinalTRReached) {
        MotionPlan plan;
        plan.poses = {pose};
        plan.terminal_pose = pose;
        result.plan = plan;
        return finish(SynthesisStatus::Plan);
    }
    if (start_outcome != CheckOutcome::Continue) return finish(SynthesisStatus::Infeasible);

    std::vector<Node> nodes;
    std::unordered_set<StateKey, StateKeyHash> visited;
    for (int bound = 0; bound <= ctx.limits.max_rotations; ++bound) {
        nodes.clear();
        visited.clear();
        std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
        std::uint64_t seq = 0;
        bool bound_was_binding = false;

        nodes.push_back({{pose, start_checker}, -1, Action::push(), 0, 0});
        visited.insert(make_key(nodes[0].state, 0, ctx.limits.min_push_mm));
        open.push({heuristic(nodes[0].state, ctx), seq++, 0});

        while (!open.empty()) {
            const int current = open.top().node;
            open.pop();
            if (result.stats.states_expanded >= config.node_budget) return finish(SynthesisStatus::BudgetExceeded);
            ++result.stats.states_expanded;
            const Node parent = nodes[static_cast<std::size_t>(current)];
            if (parent.depth >= config.max_depth) continue;

            for (const Action& action : kExpansionOrder) {
                if (!action.is_push() && parent.state.checker.rotations_used >= bound) {
                    bound_was_binding = true;
                    continue;
                }
                ModelState child;
                child.pose = apply_action(parent.state.pose, ctx.needle, action);
                child.checker = parent.state.checker;
                child.checker.record(action, step_len);
                child = reaction(child);
                const auto [outcome, checked] = run_checker(child.pose, child.checker, ctx);
                child.checker = checked;
                ++result.stats.states_generated;
                if (outcome == CheckOutcome::FinalTRReached) {
                    nodes.push_back({child, current, action, parent.depth + 1, parent.pushes + (action.is_push() ? 1 : 0)});
                    result.plan = build_plan(nodes, static_cast<int>(nodes.size()) - 1, ctx.needle);
                    return finish(SynthesisStatus::Plan);
                }
                if (outcome != CheckOutcome::Continue) continue;
                const int pushes = parent.pushes + (action.is_push() ? 1 : 0);
                if (!visited.insert(make_key(child, pushes, ctx.limits.min_push_mm)).second) continue;
                nodes.push_back({child, current, action, parent.depth + 1, pushes});
                open.push({heuristic(child, ctx), seq++, static_cast<int>(nodes.size()) - 1});
            }
        }
        // A larger rotation bound only helps if this round actually cut off a rotation.
        if (!bound_was_binding) break;
    }
    return finish(SynthesisStatus::Infeasible);
}

SynthesisResult synthesize(const Scenario& scenario, const KnowledgeBase& known_kb, const NeedlePose& pose,
                           const CheckerState& state, const SearchConfig& config) {
    return synthesize(planning_context(scenario, known_kb), pose, state, config);
}

ExistenceResult exists_path(const Scenario& scenario, const KnowledgeBase& known_kb, const SearchConfig& config) {
    const SynthesisResult r = synthesize(scenario, known_kb, scenario.start, CheckerState{}, config);
    ExistenceResult out;
    out.stats = r.stats;
    switch (r.status) {
        case SynthesisStatus::Plan:
            out.verdict = Existence::Exists;
            out.witness = r.plan->poses;
            out.actions = r.plan->actions;
            break;
        case SynthesisStatus::Infeasible:
            out.verdict = Existence::DoesNotExist;
            break;
        case SynthesisStatus::BudgetExceeded:
            out.verdict = Existence::Unknown;
            break;
    }
    return out;
}

PlanVerification verify_plan_safe(std::span<const Action> plan, const NeedlePose& pose, const CheckContext& ctx,
                                  const CheckerState& state, const EnvironmentReaction& reaction_in) {
    const EnvironmentReaction reaction = reaction_in ? reaction_in : static_tissue();
    PlanVerification v;
    ModelState s{pose, state};
    auto [outcome, checked] = run_checker(s.pose, s.checker, ctx);
    s.checker = checked;
    for (std::size_t i = 0;; ++i) {
        v.outcome = outcome;
        if (outcome == CheckOutcome::FinalTRReached) {
            v.safe = true;
            return v;
        }
        if (outcome != CheckOutcome::Continue || i == plan.size()) {
            v.first_violation = static_cast<int>(i);
            return v;
        }
        s.pose = apply_action(s.pose, ctx.needle, plan[i]);
        s.checker.record(plan[i], ctx.needle.step_length_mm());
        s = reaction(s);
        std::tie(outcome, s.checker) = run_checker(s.pose, s.checker, ctx);
    }
}

void write_plan(std::ostream& out, std::span<const Action> plan, const NeedleParams& params) {
    out << "# r_mm=" << params.radius_mm << " v=" << params.speed_mm_s << " dt=" << params.dt_s << "\n";
    for (const Action& a : plan) out << a.to_string() << "\n";
}

PlanFile read_plan(std::istream& in) {
    PlanFile file;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            NeedleParams p;
            bool r = false, v = false, dt = false;
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                double value = 0.0;
                try {
                    value = std::stod(tok.substr(eq + 1));
                } catch (const std::exception&) {
                    throw ParseError("bad header value '" + tok + "'", line_no);
                }
                if (key == "r_mm") p.radius_mm = value, r = true;
                if (key == "v") p.speed_mm_s = value, v = true;
                if (key == "dt") p.dt_s = value, dt = true;
            }
            if (r && v && dt) file.params = p;
            continue;
        }
        if (line == "PUSH") {
            file.actions.push_back(Action::push());
        } else if (line.rfind("ROT ", 0) == 0) {
            int deg = 0;
            try {
                std::size_t used = 0;
                deg = std::stoi(line.substr(4), &used);
                if (used != line.size() - 4) throw std::invalid_argument("trailing");
                file.actions.push_back(Action::rotate(deg));
            } catch (const ContractError& e) {
                throw ParseError(e.what(), line_no);
            } catch (const std::exception&) {
                throw ParseError("bad rotation '" + line + "'", line_no);
            }
        } else {
            throw ParseError("expected PUSH or ROT <deg>, got '" + line + "'", line_no);
        }
    }
    return file;
}

}  // namespace needlesteer
