#include "needlesteer/checker.hpp"

#include <cmath>
#include <numbers>

namespace needlesteer {

namespace {

Sphere to_sphere(const Region& r, int scale) { return {unquantize(r.center, scale), r.radius_mm}; }

CheckContext base_context(const Scenario& scenario) {
    CheckContext ctx;
    ctx.scale = scenario.scale;
    ctx.workspace = scenario.workspace;
    ctx.limits = scenario.limits;
    ctx.needle = scenario.needle;
    for (int idx : scenario.tr_order) {
        ctx.targets.push_back(to_sphere(scenario.regions.at(static_cast<std::size_t>(idx)), scenario.scale));
    }
    return ctx;
}

}  // namespace

CheckContext planning_context(const Scenario& scenario, const KnowledgeBase& kb, double extra_clearance_mm,
                              bool use_dr_radius) {
    CheckContext ctx = base_context(scenario);
    const double inflate = scenario.clearance_mm + extra_clearance_mm;
    for (const KnownCr& k : kb.known_crs()) {
        ctx.critical.push_back({k.center_mm, (use_dr_radius ? k.dr_radius_mm : k.radius_mm) + inflate});
    }
    return ctx;
}

CheckContext actual_context(const Scenario& scenario) {
    CheckContext ctx = base_context(scenario);
    for (const Region& r : scenario.regions) {
        if (r.kind == RegionKind::CR) ctx.critical.push_back(to_sphere(r, scenario.scale));
    }
    return ctx;
}

void CheckerState::record(const Action& action, double step_length_mm) {
    if (action.is_push()) {
        insertion_depth_mm += step_length_mm;
        push_since_last_rotation_mm += step_length_mm;
    } else {
        ++rotations_used;
        push_before_last_rotation_mm = push_since_last_rotation_mm;
        push_since_last_rotation_mm = 0.0;
    }
}

CheckerState CheckerState::next_phase() const {
    CheckerState s = *this;
    s.rotations_used = 0;
    return s;
}

std::string_view to_string(CheckOutcome outcome) {
    switch (outcome) {
        case CheckOutcome::Continue:
            return "Continue";
        case CheckOutcome::PathInvalid:
            return "PathInvalid";
        case CheckOutcome::FinalTRReached:
            return "FinalTRReached";
        case CheckOutcome::TRUnreachable:
            return "TRUnreachable";
        case CheckOutcome::CRReached:
            return "CRReached";
    }
    return "?";
}

bool check_path_valid(const NeedlePose& pose, const CheckerState& state, const Limits& limits,
                      const Workspace& workspace, int scale) {
    constexpr double eps = 1e-9;
    if (!workspace.contains(unquantize(pose.pos, scale))) return false;
    if (state.insertion_depth_mm > limits.max_insertion_mm + eps) return false;
    if (state.rotations_used > limits.max_rotations) return false;
    // Earlier spacing violations were already terminal, so only the latest rotation needs checking.
    if (state.rotations_used > 0 && state.push_before_last_rotation_mm + eps < limits.min_push_mm) return false;
    return true;
}

bool check_tr_reached(const NeedlePose& pose, const CheckContext& ctx, int tr_index) {
    const Sphere& tr = ctx.targets.at(static_cast<std::size_t>(tr_index));
    return contains(tr.center, tr.radius, unquantize(pose.pos, ctx.scale));
}

bool check_tr_reachable(const NeedlePose& pose, const CheckContext& ctx, const CheckerState& state) {
    const Sphere& tr = ctx.targets.at(static_cast<std::size_t>(state.curr_tr_index));
    const double r = ctx.needle.radius_mm;
    // Slack for grid rounding of stored positions.
    const double slack = 2.0 / ctx.scale;
    const RealVec3 p = unquantize(pose.pos, ctx.scale);
    const RealVec3 d = tr.center - p;
    const double remaining = ctx.limits.max_insertion_mm - state.insertion_depth_mm;

    // (c) not even a straight line to the nearest TR point fits the insertion budget.
    if (remaining < norm(d) - tr.radius - slack) return false;

    // (a) and (b) rely on the tangent turning at most s/r over arc length s, which rules out
    // U-turns and loops while the remaining budget stays below half a circumference.
    if (remaining >= std::numbers::pi * r) return true;

    const double axial = dot(d, pose.tangent);
    if (axial <= -tr.radius - slack) return false;  // (a) whole TR behind the tip

    // (b) whole TR inside the minimum-turn torus: in (axial, distance-from-axis) coordinates the torus is
    // the open disk of radius r centered at (0, r); the TR maps into a disk of radius tr.radius.
    const RealVec3 lateral = d - pose.tangent * axial;
    const double b = norm(lateral);
    const double to_tube_center = std::hypot(axial, b - r);
    if (to_tube_center < r - tr.radius - slack) return false;
    return true;
}

bool check_cr_reached(const NeedlePose& pose, std::span<const Sphere> critical, int scale) {
    const RealVec3 p = unquantize(pose.pos, scale);
    for (const Sphere& s : critical) {
        if (contains(s.center, s.radius, p)) return true;
    }
    return false;
}

std::pair<CheckOutcome, CheckerState> run_checker(const NeedlePose& pose, const CheckerState& state,
                                                  const CheckContext& ctx) {
    CheckerState next = state;
    if (!check_path_valid(pose, next, ctx.limits, ctx.workspace, ctx.scale)) {
        return {CheckOutcome::PathInvalid, next};
    }
    const int tr_count = static_cast<int>(ctx.targets.size());
    while (next.curr_tr_index < tr_count && check_tr_reached(pose, ctx, next.curr_tr_index)) {
        ++next.curr_tr_index;
        if (next.curr_tr_index == tr_count) {
            return {CheckOutcome::FinalTRReached, next};
        }
    }
    if (!check_tr_reachable(pose, ctx, next)) {
        return {CheckOutcome::TRUnreachable, next};
    }
    if (check_cr_reached(pose, ctx.critical, ctx.scale)) {
        return {CheckOutcome::CRReached, next};
    }
    return {CheckOutcome::Continue, next};
}

}  // namespace needlesteer
