#include "needlesteer/oss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "needlesteer/scenario_io.hpp"

namespace needlesteer {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kDepthTol = 1e-6;

Json vec_json(const RealVec3& v) { return Json::array({v.x, v.y, v.z}); }

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

RealVec3 reorthogonalize(const RealVec3& normal, const RealVec3& tangent) {
    return normalize(normal - tangent * dot(normal, tangent));
}

// Planning copy of a scenario with every CR and DR removed; the engine never holds ground truth.
Scenario strip_ground_truth(const Scenario& s) {
    Scenario out = s;
    out.regions.clear();
    out.tr_order.clear();
    std::vector<int> remap(s.regions.size(), -1);
    for (std::size_t i = 0; i < s.regions.size(); ++i) {
        if (s.regions[i].kind != RegionKind::TR) continue;
        remap[i] = static_cast<int>(out.regions.size());
        out.regions.push_back(s.regions[i]);
    }
    for (int idx : s.tr_order) out.tr_order.push_back(remap.at(static_cast<std::size_t>(idx)));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Virtual needle

double DeflectionModel::max_angle_rad(double length_mm) const {
    return level * deg2rad(0.35) * std::sqrt(std::max(length_mm, 0.0));
}

double DeflectionModel::attraction(double length_mm) const { return std::min(1.0, level * 0.3 * length_mm); }

DeflectionModel deflection_from_string(const std::string& text) {
    if (text == "none" || text == "0") return {0.0};
    if (text == "moderate") return {1.0};
    if (text == "strong") return {2.0};
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && v >= 0.0 && std::isfinite(v)) return {v};
    } catch (const std::exception&) {
    }
    throw ConfigError("deflect: expected none, moderate, strong or a non-negative level, got '" + text + "'");
}

VirtualNeedle::VirtualNeedle(const Scenario& scenario, const VirtualNeedleConfig& config)
    : config_(config),
      radius_mm_(config.true_radius_mm.value_or(scenario.needle.radius_mm)),
      speed_mm_s_(scenario.needle.speed_mm_s),
      scale_(scenario.scale),
      actual_(scenario.regions),
      rng_(config.seed) {
    if (!(config.noise_sigma_mm >= 0.0)) throw ConfigError("noise: sigma must be >= 0");
    if (!(config.deflection.level >= 0.0)) throw ConfigError("deflect: level must be >= 0");
    if (!(radius_mm_ > 0.0)) throw ConfigError("plant radius must be > 0");
    const Region& tr = scenario.target(scenario.target_count() - 1);
    final_tr_ = {unquantize(tr.center, scale_), tr.radius_mm};
    TruePose start;
    start.pos = unquantize(scenario.start.pos, scale_);
    start.tangent = scenario.start.tangent;
    start.normal = scenario.start.normal;
    history_.push_back(start);
    cr_hit_ = inside_any(RegionKind::CR, start.pos);
}

bool VirtualNeedle::inside_any(RegionKind kind, const RealVec3& p) const {
    for (const Region& r : actual_) {
        if (r.kind == kind && contains(unquantize(r.center, scale_), r.radius_mm, p)) return true;
    }
    return false;
}

bool VirtualNeedle::audit_in_final_tr() const { return contains(final_tr_.center, final_tr_.radius, history_.back().pos); }

Measurement VirtualNeedle::measure() {
    Measurement m;
    m.pos = history_.back().pos;
    if (config_.noise_sigma_mm > 0.0) {
        std::normal_distribution<double> noise(0.0, config_.noise_sigma_mm);
        m.pos.x += noise(rng_);
        m.pos.y += noise(rng_);
        m.pos.z += noise(rng_);
    }
    m.force = inside_any(RegionKind::DR, history_.back().pos);
    return m;
}

void VirtualNeedle::deflect(TruePose& pose, double length_mm) {
    const DeflectionModel& model = config_.deflection;
    if (model.level <= 0.0) return;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double angle = unit(rng_) * model.max_angle_rad(length_mm);
    const double phi = unit(rng_) * 2.0 * std::numbers::pi;
    const RealVec3 binormal = cross(pose.tangent, pose.normal);
    const RealVec3 axis = normalize(pose.normal * std::cos(phi) + binormal * std::sin(phi));
    pose.tangent = normalize(rotate_about_axis(pose.tangent, axis, angle));
    pose.normal = reorthogonalize(rotate_about_axis(pose.normal, axis, angle), pose.tangent);

    // Old channels pull the tip back in.
    const TruePose* nearest = nullptr;
    double best = 1.0;
    for (const TruePose& old : abandoned_) {
        const double d = distance(old.pos, pose.pos);
        if (d < best && dot(old.tangent, pose.tangent) > 0.8) {
            best = d;
            nearest = &old;
        }
    }
    if (nearest == nullptr) return;
    const RealVec3 desired = normalize(nearest->tangent + (nearest->pos - pose.pos));
    const double f = model.attraction(length_mm);
    pose.tangent = normalize(pose.tangent + (desired - pose.tangent) * f);
    pose.normal = reorthogonalize(pose.normal, pose.tangent);
}

void VirtualNeedle::push(double dt_s) {
    if (!(dt_s > 0.0)) throw ContractError("push: dt must be > 0");
    const TruePose& cut = history_.back();
    TruePose cur = cut;
    cur.normal = reorthogonalize(rotate_about_axis(cut.normal, cut.tangent, roll_rad_ - cut.roll_rad), cut.tangent);
    const double len = speed_mm_s_ * dt_s;
    const RealVec3 center = cur.pos + cur.normal * radius_mm_;
    const RealVec3 axis = normalize(cross(cur.tangent, cur.normal));
    const double theta = len / radius_mm_;
    TruePose next;
    next.pos = center + rotate_about_axis(cur.pos - center, axis, theta);
    next.tangent = normalize(rotate_about_axis(cur.tangent, axis, theta));
    next.normal = reorthogonalize(rotate_about_axis(cur.normal, axis, theta), next.tangent);
    deflect(next, len);
    next.depth = cut.depth + len;
    next.roll_rad = roll_rad_;
    history_.push_back(next);
    if (inside_any(RegionKind::CR, next.pos)) cr_hit_ = true;
}

void VirtualNeedle::rotate(int degrees) {
    if (degrees != 90 && degrees != 180 && degrees != 270) {
        throw ContractError("rotate: bevel rotation must be 90, 180 or 270 degrees");
    }
    roll_rad_ += deg2rad(degrees);
}

void VirtualNeedle::pull(double distance_mm) {
    if (!(distance_mm >= 0.0)) throw ContractError("pull: distance must be >= 0");
    const double target = std::max(0.0, history_.back().depth - distance_mm);
    while (history_.size() > 1 && history_.back().depth > target + kDepthTol) {
        abandoned_.push_back(history_.back());
        history_.pop_back();
    }
}

// ---------------------------------------------------------------------------
// Configuration

void Monitors::validate() const {
    if (!(eps_dev_mm > 0.0)) throw ConfigError("monitors: eps_dev must be > 0");
    if (stride < 1) throw ConfigError("monitors: sampling stride must be >= 1");
    if (window < 1) throw ConfigError("monitors: window must be >= 1");
}

void OssConfig::validate(const Scenario& scenario) const {
    monitors.validate();
    if (ticks_per_step < 1) throw ConfigError("ticks_per_step must be >= 1");
    if (!(pull_mm > 0.0)) throw ConfigError("pull distance must be > 0");
    if (!(probe_mm > 0.0)) throw ConfigError("probe distance must be > 0");
    if (!(rho_learn_mm > 0.0) || !(d_est_mm >= 0.0) || !(delta_rho_mm >= 0.0)) {
        throw ConfigError("learned-CR sizing must be positive");
    }
    if (!(timeout_s > 0.0)) throw ConfigError("timeout must be > 0");
    if (max_adjustments < 0) throw ConfigError("max_adjustments must be >= 0");
    const double per_sample = scenario.needle.speed_mm_s * tick_dt(scenario.needle) * monitors.stride;
    for (std::size_t i = 0; i < scenario.regions.size(); ++i) {
        const Region& cr = scenario.regions[i];
        if (cr.kind != RegionKind::CR) continue;
        const Region* dr = scenario.detection_region_of(static_cast<int>(i));
        const double shell = dr ? dr->radius_mm - cr.radius_mm -
                                      distance(unquantize(dr->center, scenario.scale), unquantize(cr.center, scenario.scale))
                                : 0.0;
        if (!(shell > per_sample + monitors.eps_dev_mm)) {
            throw ConfigError("unsafe monitor settings: detection shell of regions[" + std::to_string(i) + "] is " +
                              std::to_string(shell) + " mm, must exceed per-sample travel " +
                              std::to_string(per_sample) + " mm plus eps_dev " + std::to_string(monitors.eps_dev_mm) +
                              " mm");
        }
    }
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::FinalTR:
            return "FinalTR";
        case Termination::InfeasibleAtStart:
            return "InfeasibleAtStart";
        case Termination::Timeout:
            return "Timeout";
        case Termination::Exhausted:
            return "Exhausted";
    }
    return "?";
}

void RunLog::write(const std::string& json_line) {
    if (out_ != nullptr) *out_ << json_line << '\n';
}

bool learn_cr(KnowledgeBase& kb, const RealVec3& tip_mm, const RealVec3& tangent, const OssConfig& config,
              double dr_margin_mm) {
    for (std::size_t i = 0; i < kb.known_crs().size(); ++i) {
        KnownCr& k = kb.known_at(i);
        if (k.learned && contains(k.center_mm, k.dr_radius_mm, tip_mm)) {
            k.radius_mm += config.delta_rho_mm;
            k.dr_radius_mm += config.delta_rho_mm;
            return true;
        }
    }
    for (const KnownCr& k : kb.known_crs()) {
        if (contains(k.center_mm, k.dr_radius_mm, tip_mm)) return false;
    }
    KnownCr cr;
    cr.center_mm = tip_mm + tangent * config.d_est_mm;
    cr.radius_mm = config.rho_learn_mm;
    cr.dr_radius_mm = config.rho_learn_mm + dr_margin_mm;
    kb.add_learned(cr);
    return true;
}

// ---------------------------------------------------------------------------
// Engine

OssEngine::OssEngine(const Scenario& scenario, CrKnowledge mode, const OssConfig& config, Plant& plant, RunLog log)
    : scenario_(strip_ground_truth(scenario)),
      mode_(mode),
      config_(config),
      plant_(plant),
      log_(log),
      kb_(KnowledgeBase::known_only(scenario, mode)),
      radius_mm_(scenario.needle.radius_mm) {
    scenario.validate();
    config_.validate(scenario);
    config_.search.validate();
    belief_.push_back({scenario.start, 0.0, 0});
    record_.scenario = scenario.name;
    record_.crs_known = mode;
}

void OssEngine::log_event(const std::string& json_line) { log_.write(json_line); }

double OssEngine::synthesis_time(const SynthesisStats& stats) const {
    return config_.clock == ClockMode::Wall ? stats.elapsed_s
                                            : static_cast<double>(stats.states_expanded) * config_.node_time_s;
}

Measurement OssEngine::sample() { return plant_.measure(); }

void OssEngine::tick_push(const NeedlePose& from, double arc_mm) {
    const double dt = config_.tick_dt(scenario_.needle);
    plant_.push(dt);
    clock_s_ += dt;
    const double tick_len = scenario_.needle.speed_mm_s * dt;
    belief_.push_back({advance_arc(from, arc_mm, radius_mm_, scenario_.scale), belief_.back().depth + tick_len, roll_deg_});
}

RealVec3 OssEngine::mean_residual() const {
    RealVec3 m;
    if (residuals_.empty()) return m;
    const std::size_t n = std::min<std::size_t>(residuals_.size(), static_cast<std::size_t>(config_.monitors.window));
    for (std::size_t i = residuals_.size() - n; i < residuals_.size(); ++i) m += residuals_[i];
    return m / static_cast<double>(n);
}

bool OssEngine::deviation_exceeded(const RealVec3& residual) {
    residuals_.push_back(residual);
    if (residuals_.size() < static_cast<std::size_t>(config_.monitors.window)) return false;
    return norm(mean_residual()) > config_.monitors.eps_dev_mm;
}

void OssEngine::on_force(const RealVec3& tip, const RealVec3& tangent) {
    const std::size_t before = kb_.known_crs().size();
    const bool changed = learn_cr(kb_, tip, tangent, config_, scenario_.dr_margin_mm);
    if (log_.enabled()) {
        Json j{{"event", "learn"}, {"t", clock_s_}, {"tip", vec_json(tip)}, {"changed", changed}};
        if (changed) {
            const bool grown = kb_.known_crs().size() == before;
            j["grown"] = grown;
            if (!grown) {
                j["center"] = vec_json(kb_.known_crs().back().center_mm);
                j["radius_mm"] = kb_.known_crs().back().radius_mm;
            }
        }
        Json crs = Json::array();
        for (const KnownCr& k : kb_.known_crs()) {
            if (k.learned) crs.push_back({{"center", vec_json(k.center_mm)}, {"radius_mm", k.radius_mm}});
        }
        j["learned"] = std::move(crs);
        log_event(j.dump());
    }
}

NeedlePose OssEngine::estimate_from_probe(ProbeResult& probe) {
    const NeedlePose predicted = belief_.back().pose;
    probe.radius_mm = scenario_.needle.radius_mm;
    probe.fitted = false;
    try {
        const FittedCircle fit = fit_motion_circle(probe.samples, config_.fit);
        probe.circle = fit;
        const double chord = distance(probe.samples.front().pos, probe.samples.back().pos);
        const double sagitta = chord * chord / (8.0 * fit.radius);
        // Accept only when the curvature stands out of the residual scatter.
        if (!fit.clamped && sagitta >= 4.0 * fit.rms_residual + 1e-3) {
            const RealVec3 last = probe.samples.back().pos;
            const RealVec3 in_plane = last - fit.plane_normal * dot(last - fit.center, fit.plane_normal);
            const RealVec3 end = fit.center + normalize(in_plane - fit.center) * fit.radius;
            probe.radius_mm = fit.radius;
            probe.fitted = true;
            return make_pose(end, fit.tangent_at_end, fit.center - end, scenario_.scale);
        }
    } catch (const InsufficientData&) {
    } catch (const DegenerateGeometry&) {
    }
    // Model-propagated frame, position corrected by the mean probe residual.
    RealVec3 offset;
    for (std::size_t i = 0; i < probe.samples.size(); ++i) {
        offset += probe.samples[i].pos - unquantize(probe.predicted[i].pos, scenario_.scale);
    }
    offset = offset / static_cast<double>(std::max<std::size_t>(probe.samples.size(), 1));
    return make_pose(unquantize(predicted.pos, scenario_.scale) + offset, predicted.tangent, predicted.normal,
                     scenario_.scale);
}

ProbeResult OssEngine::initial_probe(double probe_depth_mm) {
    ProbeResult probe;
    const double dt = config_.tick_dt(scenario_.needle);
    const double tick_len = scenario_.needle.speed_mm_s * dt;
    const int ticks = std::max(1, static_cast<int>(std::lround(probe_depth_mm / tick_len)));
    const NeedlePose from = belief_.back().pose;

    Measurement m = sample();
    probe.samples.push_back({clock_s_, m.pos});
    probe.predicted.push_back(from);
    for (int k = 1; k <= ticks; ++k) {
        tick_push(from, k * tick_len);
        if (k % config_.monitors.stride != 0 && k != ticks) continue;
        m = sample();
        probe.samples.push_back({clock_s_, m.pos});
        probe.predicted.push_back(belief_.back().pose);
        if (m.force) {
            probe.force = true;
            on_force(m.pos, belief_.back().pose.tangent);
            break;
        }
    }
    state_.insertion_depth_mm = belief_.back().depth;
    state_.push_since_last_rotation_mm += ticks * tick_len;
    if (!probe.force) {
        const NeedlePose est = estimate_from_probe(probe);
        radius_mm_ = probe.radius_mm;
        belief_.back().pose = est;
    } else {
        probe.radius_mm = radius_mm_;
    }
    probe.pose = belief_.back().pose;
    if (log_.enabled()) {
        Json j{{"event", "probe"},
               {"t", clock_s_},
               {"force", probe.force},
               {"fitted", probe.fitted},
               {"radius_mm", probe.radius_mm},
               {"pos", vec_json(unquantize(probe.pose.pos, scenario_.scale))}};
        if (auto p = plant_.audit_true_pos()) j["true"] = vec_json(*p);
        log_event(j.dump());
    }
    return probe;
}

OssEngine::ExecResult OssEngine::execute_plan_monitored(const MotionPlan& plan) {
    residuals_.clear();
    const double dt = config_.tick_dt(scenario_.needle);
    const double tick_len = scenario_.needle.speed_mm_s * dt;
    const double step_len = scenario_.needle.step_length_mm();
    int tick_counter = 0;
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
        const Action& a = plan.actions[i];
        if (clock_s_ > config_.timeout_s) return {ExecStatus::AbortedTimeout, static_cast<int>(i)};
        if (!a.is_push()) {
            plant_.rotate(a.degrees);
            roll_deg_ = (roll_deg_ + a.degrees) % 360;
            belief_.back().pose = rotate_bevel(belief_.back().pose, a.degrees);
            belief_.back().roll_deg = roll_deg_;
            state_.record(a, step_len);
            clock_s_ += config_.rotation_time_s;
            if (log_.enabled()) log_event(Json{{"event", "rotate"}, {"t", clock_s_}, {"deg", a.degrees}}.dump());
            continue;
        }
        const NeedlePose from = belief_.back().pose;
        for (int k = 1; k <= config_.ticks_per_step; ++k) {
            tick_push(from, k * tick_len);
            if (clock_s_ > config_.timeout_s) return {ExecStatus::AbortedTimeout, static_cast<int>(i)};
            if (++tick_counter % config_.monitors.stride != 0) continue;
            const Measurement m = sample();
            const RealVec3 predicted = unquantize(belief_.back().pose.pos, scenario_.scale);
            if (log_.enabled()) {
                Json j{{"event", "sample"}, {"t", clock_s_}, {"measured", vec_json(m.pos)}, {"predicted", vec_json(predicted)}};
                if (auto p = plant_.audit_true_pos()) j["true"] = vec_json(*p);
                log_event(j.dump());
            }
            if (m.force) {
                // Force inside the final TR ends the insertion: the target is reached.
                const Region& tr = scenario_.target(scenario_.target_count() - 1);
                if (contains(unquantize(tr.center, scenario_.scale), tr.radius_mm, predicted + mean_residual())) {
                    state_.insertion_depth_mm = belief_.back().depth;
                    return {ExecStatus::Completed, -1};
                }
                on_force(predicted + mean_residual(), belief_.back().pose.tangent);
                state_.insertion_depth_mm = belief_.back().depth;
                return {ExecStatus::AbortedForce, static_cast<int>(i)};
            }
            if (deviation_exceeded(m.pos - predicted)) {
                state_.insertion_depth_mm = belief_.back().depth;
                return {ExecStatus::AbortedDeviation, static_cast<int>(i)};
            }
        }
        state_.record(a, step_len);
        state_.insertion_depth_mm = belief_.back().depth;
    }
    // Final check: the filtered position must lie in the final TR.
    const Sphere tr{unquantize(scenario_.target(scenario_.target_count() - 1).center, scenario_.scale),
                    scenario_.target(scenario_.target_count() - 1).radius_mm};
    const RealVec3 est = unquantize(belief_.back().pose.pos, scenario_.scale) + mean_residual();
    if (!contains(tr.center, tr.radius, est)) {
        return {ExecStatus::AbortedDeviation, static_cast<int>(plan.actions.size())};
    }
    return {ExecStatus::Completed, -1};
}

bool OssEngine::readjust() {
    const double depth = belief_.back().depth;
    if (depth <= kDepthTol) return false;
    const double d = std::min(config_.pull_mm, depth);
    plant_.pull(d);
    const double target = depth - d;
    while (belief_.size() > 1 && belief_.back().depth > target + kDepthTol) belief_.pop_back();
    BeliefTick& cur = belief_.back();
    const int delta = ((roll_deg_ - cur.roll_deg) % 360 + 360) % 360;
    if (delta != 0) cur.pose = rotate_bevel(cur.pose, delta);
    cur.roll_deg = roll_deg_;
    at_start_after_pull_ = cur.depth <= kDepthTol;
    clock_s_ += d / scenario_.needle.speed_mm_s;

    state_.insertion_depth_mm = cur.depth;
    state_.rotations_used = 0;
    state_.push_since_last_rotation_mm = std::numeric_limits<double>::infinity();
    state_.push_before_last_rotation_mm = std::numeric_limits<double>::infinity();
    residuals_.clear();
    if (log_.enabled()) {
        Json j{{"event", "pull"}, {"t", clock_s_}, {"distance_mm", d}, {"depth_mm", cur.depth}};
        if (auto p = plant_.audit_true_pos()) j["true"] = vec_json(*p);
        log_event(j.dump());
    }
    return true;
}

SynthesisResult OssEngine::plan_from_belief() {
    CheckContext ctx = planning_context(scenario_, kb_, config_.planning_margin_mm, true);
    ctx.needle.radius_mm = radius_mm_;
    for (Sphere& t : ctx.targets) t.radius = std::max(t.radius * 0.5, t.radius - config_.target_margin_mm);
    SynthesisResult res = synthesize(ctx, belief_.back().pose, state_, config_.search);
    const double cost = synthesis_time(res.stats);
    clock_s_ += cost;
    record_.synthesis_times_s.push_back(cost);
    if (log_.enabled()) {
        Json j{{"event", "synth"},
               {"t", clock_s_},
               {"status", std::string(to_string(res.status))},
               {"expanded", res.stats.states_expanded},
               {"time_s", cost},
               {"radius_mm", radius_mm_}};
        Json actions = Json::array();
        if (res.plan) {
            for (const Action& a : res.plan->actions) actions.push_back(a.to_string());
        }
        j["plan"] = std::move(actions);
        log_event(j.dump());
    }
    return res;
}

RunRecord OssEngine::run() {
    // Feasibility on the a-priori model before touching the tissue.
    const SynthesisResult first = plan_from_belief();
    if (!first.has_plan()) {
        record_.termination = Termination::InfeasibleAtStart;
    } else {
        while (true) {
            if (clock_s_ + config_.probe_mm / scenario_.needle.speed_mm_s > config_.timeout_s) {
                record_.termination = Termination::Timeout;
                break;
            }
            bool need_readjust = false;
            bool retreat = false;
            const ProbeResult probe = initial_probe(config_.probe_mm);
            if (probe.force) {
                need_readjust = true;
            } else {
                const SynthesisResult res = plan_from_belief();
                if (!res.has_plan()) {
                    if (at_start_after_pull_) {
                        record_.termination = Termination::InfeasibleAtStart;
                        break;
                    }
                    need_readjust = true;
                    retreat = true;
                } else {
                    ++record_.motion_plans;
                    const ExecResult exec = execute_plan_monitored(*res.plan);
                    if (exec.status == ExecStatus::Completed) {
                        record_.termination = Termination::FinalTR;
                        break;
                    }
                    if (exec.status == ExecStatus::AbortedTimeout) {
                        record_.termination = Termination::Timeout;
                        break;
                    }
                    if (log_.enabled()) {
                        log_event(Json{{"event", "abort"},
                                       {"t", clock_s_},
                                       {"reason", exec.status == ExecStatus::AbortedForce ? "force" : "deviation"},
                                       {"action_index", exec.action_index}}
                                      .dump());
                    }
                    need_readjust = true;
                }
            }
            if (need_readjust) {
                if (clock_s_ + std::min(config_.pull_mm, belief_.back().depth) / scenario_.needle.speed_mm_s >
                    config_.timeout_s) {
                    record_.termination = Termination::Timeout;
                    break;
                }
                if (!retreat && record_.adjustments >= config_.max_adjustments) {
                    record_.termination = Termination::Exhausted;
                    break;
                }
                if (!readjust()) {
                    record_.termination = Termination::InfeasibleAtStart;
                    break;
                }
                ++(retreat ? record_.retreats : record_.adjustments);
            }
        }
    }
    record_.tr_reached = plant_.audit_in_final_tr();
    record_.cr_hit = plant_.audit_cr_hit();
    record_.overall_time_s = clock_s_;
    record_.learned_crs = static_cast<int>(kb_.learned_count());
    record_.final_depth_mm = belief_.back().depth;
    if (log_.enabled()) {
        Json times = Json::array();
        for (double t : record_.synthesis_times_s) times.push_back(t);
        log_event(Json{{"event", "end"},
                       {"t", clock_s_},
                       {"scenario", record_.scenario},
                       {"crs_known", std::string(to_string(record_.crs_known))},
                       {"seed", record_.seed},
                       {"tr_reached", record_.tr_reached},
                       {"cr_hit", record_.cr_hit},
                       {"adjustments", record_.adjustments},
                       {"retreats", record_.retreats},
                       {"motion_plans", record_.motion_plans},
                       {"synthesis_times_s", times},
                       {"overall_time_s", record_.overall_time_s},
                       {"termination", std::string(to_string(record_.termination))},
                       {"learned_crs", record_.learned_crs},
                       {"final_depth_mm", record_.final_depth_mm}}
                      .dump());
    }
    return record_;
}

RunRecord run_virtual(const Scenario& scenario, CrKnowledge mode, const OssConfig& config,
                      const VirtualNeedleConfig& plant_config, std::ostream* log) {
    RunLog sink(log);
    if (sink.enabled()) {
        Json j{{"event", "scenario"},
               {"crs_known", std::string(to_string(mode))},
               {"seed", plant_config.seed},
               {"noise_mm", plant_config.noise_sigma_mm},
               {"deflect", plant_config.deflection.level},
               {"scenario", Json::parse(save_scenario(scenario))}};
        sink.write(j.dump());
    }
    VirtualNeedle plant(scenario, plant_config);
    OssEngine engine(scenario, mode, config, plant, sink);
    engine.set_run_seed(plant_config.seed);
    return engine.run();
}

}  // namespace needlesteer
