#pragma once

// Geometric bevel-tip needle model: the tip travels on a circle of radius r whose plane is
// spanned by the current tangent and curvature normal; a bevel rotation turns the normal
// about the tangent without moving the tip.

#include <span>
#include <string>
#include <vector>

#include "needlesteer/geometry.hpp"

namespace needlesteer {

struct NeedlePose {
    ScaledVec3 pos;             // tip position, grid units (mm * S)
    RealVec3 tangent{0, 0, 1};  // unit direction of travel
    RealVec3 normal{1, 0, 0};   // unit direction from tip toward the motion-circle center
    // |pos - center| - r left over from snapping to the grid; keeps the center fixed across pushes.
    double radial_offset_mm = 0.0;

    bool operator==(const NeedlePose&) const = default;
};

struct NeedleParams {
    double radius_mm = 60.0;  // motion-circle radius
    double speed_mm_s = 5.0;
    double dt_s = 0.5;
    int scale = kDefaultScale;

    double step_length_mm() const { return speed_mm_s * dt_s; }
    double step_angle_rad() const { return speed_mm_s * dt_s / radius_mm; }
    // Throws ConfigError unless the per-step arc angle lies in (0, pi/2].
    void validate() const;
    bool operator==(const NeedleParams&) const = default;
};

struct MotionCircle {
    RealVec3 center;
    RealVec3 axis;  // binormal; travel is a right-handed rotation about it
    double radius = 0.0;
};

struct Action {
    enum class Kind { Push, Rotate };
    Kind kind = Kind::Push;
    int degrees = 0;  // 90, 180 or 270 for Rotate

    static Action push() { return {Kind::Push, 0}; }
    // Throws ContractError for any other angle.
    static Action rotate(int degrees);

    bool is_push() const { return kind == Kind::Push; }
    bool operator==(const Action&) const = default;
    std::string to_string() const;
};

// Frame tolerance checks; a frame is accepted when unit and orthogonal within tol.
bool frame_is_orthonormal(const NeedlePose& pose, double tol = 1e-6);

// Builds a pose from real-valued data, re-orthonormalizing the normal against the tangent.
NeedlePose make_pose(const RealVec3& pos_mm, const RealVec3& tangent, const RealVec3& normal, int scale);

MotionCircle motion_circle(const NeedlePose& pose, double radius_mm, int scale);

// Advance the tip by one arc segment of length v*dt.
NeedlePose step(const NeedlePose& pose, const NeedleParams& params);

// Advance by an arbitrary arc length (used by the plant and by probes with finer resolution).
NeedlePose advance_arc(const NeedlePose& pose, double arc_length_mm, double radius_mm, int scale);

NeedlePose rotate_bevel(const NeedlePose& pose, int degrees);

NeedlePose apply_action(const NeedlePose& pose, const NeedleParams& params, const Action& action);

// Poses after each action, starting with the initial pose.
std::vector<NeedlePose> apply_plan(const NeedlePose& pose, const NeedleParams& params, std::span<const Action> plan);

}  // namespace needlesteer
