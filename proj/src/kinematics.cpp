#include "needlesteer/kinematics.hpp"

#include <cmath>
#include <numbers>

namespace needlesteer {

namespace {

// Pick the grid point of the enclosing cell whose distance to the circle center is closest to r.
// Keeps pushes confined to their motion circle instead of letting rounding walk the center away.
ScaledVec3 snap_to_circle(const RealVec3& exact_mm, const RealVec3& center_mm, double radius_mm, int scale) {
    const double s = static_cast<double>(scale);
    const RealVec3 g = exact_mm * s;
    double lo[3], hi[3];
    for (int i = 0; i < 3; ++i) {
        const double nearest = std::round(g[i]);
        if (std::abs(g[i] - nearest) < 1e-9) {
            lo[i] = hi[i] = nearest;
        } else {
            lo[i] = std::floor(g[i]);
            hi[i] = std::ceil(g[i]);
        }
    }
    // Range check goes through the regular quantizer.
    ScaledVec3 best = quantize(exact_mm, scale);
    double best_radial = std::abs(distance(unquantize(best, scale), center_mm) - radius_mm);
    double best_offset = max_abs_diff(unquantize(best, scale), exact_mm);
    for (int mask = 0; mask < 8; ++mask) {
        const RealVec3 cand{(mask & 1) ? hi[0] : lo[0], (mask & 2) ? hi[1] : lo[1], (mask & 4) ? hi[2] : lo[2]};
        const RealVec3 cand_mm = cand / s;
        const double radial = std::abs(distance(cand_mm, center_mm) - radius_mm);
        const double offset = max_abs_diff(cand_mm, exact_mm);
        if (radial < best_radial - 1e-12 || (std::abs(radial - best_radial) <= 1e-12 && offset < best_offset)) {
            best = {static_cast<std::int32_t>(cand.x), static_cast<std::int32_t>(cand.y),
                    static_cast<std::int32_t>(cand.z)};
            best_radial = radial;
            best_offset = offset;
        }
    }
    return best;
}

RealVec3 orthogonalize(const RealVec3& v, const RealVec3& unit_ref) {
    return normalize(v - unit_ref * dot(v, unit_ref));
}

}  // namespace

void NeedleParams::validate() const {
    if (!(radius_mm > 0.0) || !(speed_mm_s > 0.0) || !(dt_s > 0.0)) {
        throw ConfigError("needle radius, speed and dt must be positive");
    }
    if (scale <= 0) {
        throw ConfigError("scale factor must be positive");
    }
    const double theta = step_angle_rad();
    if (!(theta > 0.0) || theta > std::numbers::pi / 2 + 1e-12) {
        throw ConfigError("arc angle per step v*dt/r = " + std::to_string(theta) + " rad outside (0, pi/2]");
    }
}

Action Action::rotate(int degrees) {
    if (degrees != 90 && degrees != 180 && degrees != 270) {
        throw ContractError("bevel rotation must be 90, 180 or 270 degrees, got " + std::to_string(degrees));
    }
    return {Kind::Rotate, degrees};
}

std::string Action::to_string() const {
    return is_push() ? "PUSH" : "ROT " + std::to_string(degrees);
}

bool frame_is_orthonormal(const NeedlePose& pose, double tol) {
    return std::abs(norm(pose.tangent) - 1.0) <= tol && std::abs(norm(pose.normal) - 1.0) <= tol &&
           std::abs(dot(pose.tangent, pose.normal)) <= tol;
}

NeedlePose make_pose(const RealVec3& pos_mm, const RealVec3& tangent, const RealVec3& normal, int scale) {
    NeedlePose pose;
    pose.pos = quantize(pos_mm, scale);
    pose.tangent = normalize(tangent);
    pose.normal = orthogonalize(normal, pose.tangent);
    return pose;
}

MotionCircle motion_circle(const NeedlePose& pose, double radius_mm, int scale) {
    if (!frame_is_orthonormal(pose)) {
        throw ContractError("needle frame is not orthonormal");
    }
    const double r = radius_mm + pose.radial_offset_mm;
    return {unquantize(pose.pos, scale) + pose.normal * r, cross(pose.tangent, pose.normal), r};
}

NeedlePose advance_arc(const NeedlePose& pose, double arc_length_mm, double radius_mm, int scale) {
    const MotionCircle circle = motion_circle(pose, radius_mm, scale);
    const double theta = arc_length_mm / radius_mm;
    const RealVec3 rel = unquantize(pose.pos, scale) - circle.center;
    const RealVec3 moved =
        circle.center + rel * std::cos(theta) + cross(circle.axis, rel) * std::sin(theta);

    NeedlePose next;
    next.pos = snap_to_circle(moved, circle.center, radius_mm, scale);
    const RealVec3 to_center = circle.center - unquantize(next.pos, scale);
    next.normal = normalize(to_center);
    next.radial_offset_mm = norm(to_center) - radius_mm;
    next.tangent = orthogonalize(rotate_about_axis(pose.tangent, circle.axis, theta), next.normal);
    return next;
}

NeedlePose step(const NeedlePose& pose, const NeedleParams& params) {
    params.validate();
    return advance_arc(pose, params.step_length_mm(), params.radius_mm, params.scale);
}

NeedlePose rotate_bevel(const NeedlePose& pose, int degrees) {
    const Action a = Action::rotate(degrees);
    NeedlePose next = pose;
    const double angle = a.degrees * std::numbers::pi / 180.0;
    next.normal = orthogonalize(rotate_about_axis(pose.normal, pose.tangent, angle), pose.tangent);
    return next;
}

NeedlePose apply_action(const NeedlePose& pose, const NeedleParams& params, const Action& action) {
    return action.is_push() ? step(pose, params) : rotate_bevel(pose, action.degrees);
}

std::vector<NeedlePose> apply_plan(const NeedlePose& pose, const NeedleParams& params, std::span<const Action> plan) {
    std::vector<NeedlePose> out;
    out.reserve(plan.size() + 1);
    out.push_back(pose);
    for (const Action& a : plan) {
        out.push_back(apply_action(out.back(), params, a));
    }
    return out;
}

}  // namespace needlesteer
