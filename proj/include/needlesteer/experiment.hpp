#pragma once

// Batch experiments over the virtual needle, results tables, reference matching and plots.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "needlesteer/fitting.hpp"
#include "needlesteer/oss.hpp"
#include "needlesteer/synthesis.hpp"

namespace needlesteer {

struct ExperimentConfig {
    std::vector<std::string> scenarios{"no_cr"};  // builtin names or scenario files
    std::vector<CrKnowledge> modes{CrKnowledge::All};
    int runs = 50;
    std::uint64_t base_seed = 1;
    double noise_mm = 0.0;
    DeflectionModel deflection;
    double timeout_s = 120.0;
    int jobs = 1;
    std::optional<std::filesystem::path> log_dir;
    OssConfig oss;

    void validate() const;
};

struct MinAvgMax {
    double min = 0.0;
    double avg = 0.0;
    double max = 0.0;
};

struct ResultsRow {
    std::string scenario;
    CrKnowledge crs_known = CrKnowledge::All;
    int runs = 0;
    double tr_reach_pct = 0.0;
    double cr_hit_pct = 0.0;
    MinAvgMax adjustments;
    long motion_plans = 0;
    MinAvgMax synthesis_s;
    MinAvgMax overall_s;
};

ResultsRow aggregate(const std::string& scenario, CrKnowledge mode, const std::vector<RunRecord>& records);

struct ExperimentResult {
    std::vector<ResultsRow> rows;
    std::vector<std::vector<RunRecord>> records;  // per row, in run-index order
    bool any_cr_hit() const;
};

// Runs every (scenario, mode) pair with seeds base_seed + i; rows in configuration order.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_results_csv(std::ostream& out, const std::vector<ResultsRow>& rows);
void print_results_table(std::ostream& out, const std::vector<ResultsRow>& rows);

// Run record from the final event of a run log.
RunRecord record_from_log(std::istream& log);

// Model trace of a plan, sampled every `samples_per_step` sub-steps of each push.
std::vector<TraceSample> model_trace(const NeedlePose& start, const NeedleParams& params, std::span<const Action> plan,
                                     int samples_per_step = 5);

struct MatchConfig {
    int waypoints = 8;
    double waypoint_radius_mm = 2.0;
    std::optional<double> radius_mm;  // fitted from the start of the reference when absent
    double speed_mm_s = 5.0;
    double dt_s = 0.5;
    int max_rotations = 4;
    double fit_span_mm = 15.0;
    std::size_t node_budget = 400'000;
};

struct WaypointReport {
    RealVec3 center;
    bool reached = false;
};

struct MatchResult {
    std::vector<WaypointReport> waypoints;
    std::vector<Action> actions;
    std::vector<TraceSample> candidate;
    Deviation deviation;
    double radius_mm = 0.0;
    bool joint = false;  // one multi-TR synthesis covered every waypoint
};

// Places waypoint TRs by arc length along the reference and synthesizes through them in order.
MatchResult match_reference(std::span<const TraceSample> reference, const MatchConfig& config = {});

// Deterministic SVG with XZ, YZ and XY projections of a run log.
std::string render_svg(std::istream& log);

}  // namespace needlesteer
