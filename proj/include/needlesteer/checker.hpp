#pragma once

#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "needlesteer/environment.hpp"
#include "needlesteer/kinematics.hpp"

namespace needlesteer {

struct Sphere {
    RealVec3 center;
    double radius = 0.0;
};

// Everything the ordered checks need: geometry limits, ordered targets and the keep-out set.
// Built either from known knowledge (planning) or from ground truth (replay against actual CRs).
struct CheckContext {
    int scale = kDefaultScale;
    Workspace workspace;
    Limits limits;
    NeedleParams needle;
    std::vector<Sphere> targets;   // in TR order, last one is final
    std::vector<Sphere> critical;  // spheres the tip must never enter
};

// Planning view: TRs from the scenario, keep-out spheres from the known knowledge only.
// Each known CR is inflated by scenario.clearance_mm + extra_clearance_mm; with use_dr_radius the
// CR's detection shell is used as the base radius instead.
CheckContext planning_context(const Scenario& scenario, const KnowledgeBase& kb, double extra_clearance_mm = 0.0,
                              bool use_dr_radius = false);

// Ground-truth view over every CR in the scenario.
CheckContext actual_context(const Scenario& scenario);

struct CheckerState {
    int curr_tr_index = 0;
    int rotations_used = 0;
    // Infinity until the first rotation: an initial rotation is always spaced correctly.
    double push_since_last_rotation_mm = std::numeric_limits<double>::infinity();
    double push_before_last_rotation_mm = std::numeric_limits<double>::infinity();
    double insertion_depth_mm = 0.0;

    // Bookkeeping for an executed action (does not judge validity).
    void record(const Action& action, double step_length_mm);
    // Start of a new synthesis phase: fresh rotation budget, spacing and depth carried over.
    CheckerState next_phase() const;

    bool operator==(const CheckerState&) const = default;
};

enum class CheckOutcome { Continue, PathInvalid, FinalTRReached, TRUnreachable, CRReached };
std::string_view to_string(CheckOutcome outcome);

bool check_path_valid(const NeedlePose& pose, const CheckerState& state, const Limits& limits,
                      const Workspace& workspace, int scale);
bool check_tr_reached(const NeedlePose& pose, const CheckContext& ctx, int tr_index);
bool check_tr_reachable(const NeedlePose& pose, const CheckContext& ctx, const CheckerState& state);
bool check_cr_reached(const NeedlePose& pose, std::span<const Sphere> critical, int scale);

// Path valid -> TR reached (advancing through the order) -> TR reachable -> CR reached.
std::pair<CheckOutcome, CheckerState> run_checker(const NeedlePose& pose, const CheckerState& state,
                                                  const CheckContext& ctx);

}  // namespace needlesteer
