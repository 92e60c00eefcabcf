#pragma once

// Online strategy synthesis: probe and fit, synthesize, execute under monitoring, and on
// deviation or force pull back, learn, refit and resynthesize.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "needlesteer/environment.hpp"
#include "needlesteer/fitting.hpp"
#include "needlesteer/kinematics.hpp"
#include "needlesteer/synthesis.hpp"

namespace needlesteer {

struct Measurement {
    RealVec3 pos;
    bool force = false;
};

class Plant {
public:
    virtual ~Plant() = default;
    virtual Measurement measure() = 0;
    virtual void push(double dt_s) = 0;
    virtual void rotate(int degrees) = 0;
    // Retraces the cut path backwards; clamps at the insertion point.
    virtual void pull(double distance_mm) = 0;
    virtual double insertion_depth_mm() const = 0;

    // Ground-truth audit for run records. Never consulted by the engine's decisions.
    virtual bool audit_cr_hit() const { return false; }
    virtual bool audit_in_final_tr() const { return false; }
    virtual std::optional<RealVec3> audit_true_pos() const { return std::nullopt; }
};

struct DeflectionModel {
    double level = 0.0;  // 0 reproduces the ideal model, 1 is "moderate"

    // Per push of length L the tangent turns by an angle drawn from [0, max_angle(L)].
    double max_angle_rad(double length_mm) const;
    // Blend fraction toward a previously cut channel closer than 1 mm.
    double attraction(double length_mm) const;
};

DeflectionModel deflection_from_string(const std::string& text);

struct VirtualNeedleConfig {
    double noise_sigma_mm = 0.0;
    DeflectionModel deflection;
    std::optional<double> true_radius_mm;  // defaults to the scenario needle radius
    std::uint64_t seed = 0;
};

class VirtualNeedle : public Plant {
public:
    VirtualNeedle(const Scenario& scenario, const VirtualNeedleConfig& config);

    Measurement measure() override;
    void push(double dt_s) override;
    void rotate(int degrees) override;
    void pull(double distance_mm) override;
    double insertion_depth_mm() const override { return history_.back().depth; }

    bool audit_cr_hit() const override { return cr_hit_; }
    bool audit_in_final_tr() const override;
    std::optional<RealVec3> audit_true_pos() const override { return history_.back().pos; }

    const VirtualNeedleConfig& config() const { return config_; }

private:
    struct TruePose {
        RealVec3 pos;
        RealVec3 tangent;
        RealVec3 normal;
        double depth = 0.0;
        double roll_rad = 0.0;  // cumulative shaft roll when this pose was cut
    };

    bool inside_any(RegionKind kind, const RealVec3& p) const;
    void deflect(TruePose& pose, double length_mm);

    VirtualNeedleConfig config_;
    double radius_mm_;
    double speed_mm_s_;
    int scale_;
    std::vector<Region> actual_;
    Sphere final_tr_;
    std::vector<TruePose> history_;
    std::vector<TruePose> abandoned_;  // channel cut beyond the current tip
    double roll_rad_ = 0.0;
    bool cr_hit_ = false;
    std::mt19937_64 rng_;
};

struct Monitors {
    double eps_dev_mm = 2.0;
    int stride = 5;  // plant ticks between samples
    int window = 4;  // residual samples averaged before comparing against eps_dev

    void validate() const;
};

enum class ClockMode { Virtual, Wall };

struct OssConfig {
    Monitors monitors;
    int ticks_per_step = 50;  // plant ticks per planning step
    double pull_mm = 10.0;
    double probe_mm = 3.0;
    double rho_learn_mm = 5.0;
    double d_est_mm = 3.0;
    double delta_rho_mm = 2.0;
    double planning_margin_mm = 0.5;  // added to known detection shells while planning
    double target_margin_mm = 1.0;    // TRs are shrunk by this much while planning
    double rotation_time_s = 0.5;
    double timeout_s = 120.0;
    int max_adjustments = 25;
    ClockMode clock = ClockMode::Virtual;
    double node_time_s = 1e-6;  // virtual cost of one expanded state
    FitOptions fit;
    SearchConfig search;

    double tick_dt(const NeedleParams& params) const { return params.dt_s / ticks_per_step; }
    // Throws ConfigError when a detection shell is not wider than per-sample travel plus eps_dev.
    void validate(const Scenario& scenario) const;
};

enum class Termination { FinalTR, InfeasibleAtStart, Timeout, Exhausted };
std::string_view to_string(Termination t);

struct RunRecord {
    std::string scenario;
    CrKnowledge crs_known = CrKnowledge::All;
    std::uint64_t seed = 0;
    bool tr_reached = false;
    bool cr_hit = false;
    int adjustments = 0;  // readjustments triggered by deviation or force
    int retreats = 0;     // further pull-backs while no plan exists
    int motion_plans = 0;
    std::vector<double> synthesis_times_s;
    double overall_time_s = 0.0;
    Termination termination = Termination::InfeasibleAtStart;
    int learned_crs = 0;
    double final_depth_mm = 0.0;
};

// Newline-delimited JSON event sink. Null sink when no stream is attached.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(std::ostream* out) : out_(out) {}
    bool enabled() const { return out_ != nullptr; }
    void write(const std::string& json_line);

private:
    std::ostream* out_ = nullptr;
};

struct ProbeResult {
    std::vector<TraceSample> samples;
    std::vector<NeedlePose> predicted;  // model pose at each sample
    bool force = false;
    double radius_mm = 0.0;            // fitted or fallback
    bool fitted = false;
    std::optional<FittedCircle> circle;
    NeedlePose pose;                    // estimated tip pose after the probe
};

// Learned-CR update rule. Returns true when the knowledge base changed.
bool learn_cr(KnowledgeBase& kb, const RealVec3& tip_mm, const RealVec3& tangent, const OssConfig& config,
              double dr_margin_mm);

class OssEngine {
public:
    OssEngine(const Scenario& scenario, CrKnowledge mode, const OssConfig& config, Plant& plant,
              RunLog log = RunLog{});

    RunRecord run();
    // Recorded in the run record only.
    void set_run_seed(std::uint64_t seed) { record_.seed = seed; }

    // Individual steps, exposed for testing.
    ProbeResult initial_probe(double probe_depth_mm);
    enum class ExecStatus { Completed, AbortedDeviation, AbortedForce, AbortedTimeout };
    struct ExecResult {
        ExecStatus status = ExecStatus::Completed;
        int action_index = -1;
    };
    ExecResult execute_plan_monitored(const MotionPlan& plan);
    // Pull back along the recorded path; returns false when already at the start.
    bool readjust();

    const KnowledgeBase& knowledge() const { return kb_; }
    const NeedlePose& belief() const { return belief_.back().pose; }
    double belief_depth_mm() const { return belief_.back().depth; }
    double radius_estimate_mm() const { return radius_mm_; }
    const CheckerState& checker_state() const { return state_; }
    double now_s() const { return clock_s_; }

private:
    struct BeliefTick {
        NeedlePose pose;
        double depth = 0.0;
        int roll_deg = 0;  // cumulative bevel rotation when this pose was reached
    };

    void tick_push(const NeedlePose& from, double arc_mm);
    RealVec3 mean_residual() const;
    NeedlePose estimate_from_probe(ProbeResult& probe);
    Measurement sample();
    bool deviation_exceeded(const RealVec3& residual);
    void on_force(const RealVec3& tip, const RealVec3& tangent);
    SynthesisResult plan_from_belief();
    double synthesis_time(const SynthesisStats& stats) const;
    void log_event(const std::string& json_line);

    Scenario scenario_;
    CrKnowledge mode_;
    OssConfig config_;
    Plant& plant_;
    RunLog log_;
    KnowledgeBase kb_;
    std::vector<BeliefTick> belief_;
    std::vector<RealVec3> residuals_;
    CheckerState state_;
    double radius_mm_;
    int roll_deg_ = 0;
    bool at_start_after_pull_ = false;
    double clock_s_ = 0.0;
    RunRecord record_;
};

// One seeded run against a virtual needle; the run log is optional.
RunRecord run_virtual(const Scenario& scenario, CrKnowledge mode, const OssConfig& config,
                      const VirtualNeedleConfig& plant_config, std::ostream* log = nullptr);

}  // namespace needlesteer
