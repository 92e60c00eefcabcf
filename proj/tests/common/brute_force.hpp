#pragma once

// Exhaustive enumeration of action strings, used as an oracle for the search.

#include <array>
#include <random>

#include "needlesteer/checker.hpp"
#include "needlesteer/synthesis.hpp"

namespace needlesteer::oracle {

// True when some action string of at most max_depth actions reaches the final TR with every
// intermediate check returning Continue.
inline bool any_string_reaches(const CheckContext& ctx, const NeedlePose& pose, const CheckerState& state,
                               int max_depth) {
    static constexpr std::array<Action, 4> kActions{Action{Action::Kind::Push, 0}, Action{Action::Kind::Rotate, 90},
                                                    Action{Action::Kind::Rotate, 180},
                                                    Action{Action::Kind::Rotate, 270}};
    for (const Action& a : kActions) {
        if (max_depth == 0) break;
        const NeedlePose next = apply_action(pose, ctx.needle, a);
        CheckerState s = state;
        s.record(a, ctx.needle.step_length_mm());
        const auto [outcome, checked] = run_checker(next, s, ctx);
        if (outcome == CheckOutcome::FinalTRReached) return true;
        if (outcome != CheckOutcome::Continue) continue;
        if (any_string_reaches(ctx, next, checked, max_depth - 1)) return true;
    }
    return false;
}

inline bool brute_force_feasible(const CheckContext& ctx, const NeedlePose& pose, int max_depth) {
    const auto [outcome, checked] = run_checker(pose, CheckerState{}, ctx);
    if (outcome == CheckOutcome::FinalTRReached) return true;
    if (outcome != CheckOutcome::Continue) return false;
    return any_string_reaches(ctx, pose, checked, max_depth);
}

struct SmallInstance {
    CheckContext ctx;
    NeedlePose start;
};

// Coarse steps (5 mm), at most two rotations, targets and obstacles within a dozen steps.
inline SmallInstance random_small_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SmallInstance inst;
    CheckContext& ctx = inst.ctx;
    ctx.scale = 100;
    ctx.needle.radius_mm = 25.0 + 20.0 * u(rng);
    ctx.needle.speed_mm_s = 5.0;
    ctx.needle.dt_s = 1.0;
    ctx.workspace = Workspace{{-80, -80, -10}, {80, 80, 80}};
    ctx.limits.max_rotations = static_cast<int>(u(rng) * 3.0);
    ctx.limits.min_push_mm = u(rng) < 0.5 ? 5.0 : 10.0;
    ctx.limits.max_insertion_mm = 60.0;
    const RealVec3 tr{(u(rng) - 0.5) * 50.0, (u(rng) - 0.5) * 50.0, 10.0 + 45.0 * u(rng)};
    ctx.targets = {{tr, 2.5 + 3.0 * u(rng)}};
    const int crs = static_cast<int>(u(rng) * 4.0);
    for (int i = 0; i < crs; ++i) {
        const double f = 0.2 + 0.6 * u(rng);
        const RealVec3 c = tr * f + RealVec3{(u(rng) - 0.5) * 16.0, (u(rng) - 0.5) * 16.0, (u(rng) - 0.5) * 8.0};
        ctx.critical.push_back({c, 2.0 + 5.0 * u(rng)});
    }
    inst.start = make_pose({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, 100);
    return inst;
}

}  // namespace needlesteer::oracle
