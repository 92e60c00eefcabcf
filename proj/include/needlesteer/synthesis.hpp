#pragma once

// Native replacement for the two model-checking queries: existence of a path to the final TR and
// synthesis of a concrete motion plan. With a static tissue model the game against the
// environment degenerates to single-player reachability; the environment still gets a turn after
// every controllable action through EnvironmentReaction.

#include <cstddef>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "needlesteer/checker.hpp"
#include "needlesteer/environment.hpp"
#include "needlesteer/kinematics.hpp"

namespace needlesteer {

struct ModelState {
    NeedlePose pose;
    CheckerState checker;
};

// Tissue turn after each needle action. The shipped model is static (identity).
using EnvironmentReaction = std::function<ModelState(const ModelState&)>;
EnvironmentReaction static_tissue();

struct SearchConfig {
    std::optional<int> max_rotations;     // defaults to the context limits
    std::optional<double> min_push_mm;    // defaults to the context limits
    std::optional<double> dt_s;           // defaults to the context needle
    int max_depth = 1000;                 // actions per plan
    std::size_t node_budget = 400'000;    // expanded states over all deepening rounds
    EnvironmentReaction reaction;         // empty means static tissue

    void validate() const;
};

struct MotionPlan {
    std::vector<Action> actions;
    std::vector<NeedlePose> poses;  // predicted pose after each action, poses[0] = start
    NeedlePose terminal_pose;
    double arc_length_mm = 0.0;
    int rotation_count = 0;
};

struct SynthesisStats {
    std::size_t states_expanded = 0;
    std::size_t states_generated = 0;
    double elapsed_s = 0.0;
};

enum class SynthesisStatus { Plan, Infeasible, BudgetExceeded };
std::string_view to_string(SynthesisStatus status);

struct SynthesisResult {
    SynthesisStatus status = SynthesisStatus::Infeasible;
    std::optional<MotionPlan> plan;
    SynthesisStats stats;

    bool has_plan() const { return status == SynthesisStatus::Plan; }
};

// Deterministic search: iterative deepening on rotation count, greedy best-first on the distance
// to the current TR surface, expansion order Push < Rot90 < Rot180 < Rot270, FIFO among ties.
SynthesisResult synthesize(const CheckContext& ctx, const NeedlePose& pose, const CheckerState& state,
                           const SearchConfig& config = {});

// Planner entry point over a scenario and the known part of a knowledge base.
SynthesisResult synthesize(const Scenario& scenario, const KnowledgeBase& known_kb, const NeedlePose& pose,
                           const CheckerState& state, const SearchConfig& config = {});

enum class Existence { Exists, DoesNotExist, Unknown };
std::string_view to_string(Existence e);

struct ExistenceResult {
    Existence verdict = Existence::DoesNotExist;
    std::vector<NeedlePose> witness;  // replayable pose trace; just the start pose if already in the TR
    std::vector<Action> actions;
    SynthesisStats stats;
};

ExistenceResult exists_path(const Scenario& scenario, const KnowledgeBase& known_kb, const SearchConfig& config = {});

struct PlanVerification {
    bool safe = false;  // replay ends in FinalTRReached without any earlier terminal outcome
    CheckOutcome outcome = CheckOutcome::Continue;
    int first_violation = -1;  // index into the pose sequence (0 = start), -1 when safe
};

PlanVerification verify_plan_safe(std::span<const Action> plan, const NeedlePose& pose, const CheckContext& ctx,
                                  const CheckerState& state = {}, const EnvironmentReaction& reaction = {});

// Plan file: "# r_mm=<r> v=<v> dt=<dt>" header then one PUSH or "ROT <deg>" per line.
void write_plan(std::ostream& out, std::span<const Action> plan, const NeedleParams& params);
struct PlanFile {
    std::vector<Action> actions;
    std::optional<NeedleParams> params;
};
PlanFile read_plan(std::istream& in);

}  // namespace needlesteer
