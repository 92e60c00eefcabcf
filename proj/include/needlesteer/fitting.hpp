#pragma once

// Motion-circle estimation from sampled tip positions, and trace comparison metrics.

#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "needlesteer/geometry.hpp"

namespace needlesteer {

struct TraceSample {
    double t = 0.0;  // s
    RealVec3 pos;    // mm

    bool operator==(const TraceSample&) const = default;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Plane {
    RealVec3 point;   // centroid
    RealVec3 normal;  // unit
};

struct Circle2 {
    Point2 center;
    double radius = 0.0;
};

struct FittedCircle {
    RealVec3 center;
    double radius = 0.0;
    RealVec3 plane_normal;
    RealVec3 tangent_at_end;
    double rms_residual = 0.0;
    bool clamped = false;  // radius hit r_min or r_max
};

struct FitOptions {
    std::size_t min_samples = 8;
    double min_arc_mm = 3.0;
    double r_min_mm = 10.0;
    double r_max_mm = 500.0;
};

// Least-squares plane through the centroid. Throws DegenerateGeometry for collinear input.
Plane fit_plane(std::span<const RealVec3> points);

// Algebraic (Kasa) circle fit. Throws DegenerateGeometry for collinear input.
Circle2 fit_circle(std::span<const Point2> points);

// Plane fit, in-plane circle fit and radius clamp. The tangent points along the direction of
// travel at the last sample. Throws InsufficientData or DegenerateGeometry.
FittedCircle fit_motion_circle(std::span<const TraceSample> trace, const FitOptions& options = {});

// Unit direction of the dominant axis of the samples, oriented from first to last sample.
RealVec3 fit_line_direction(std::span<const RealVec3> points);

struct Deviation {
    double min = 0.0;
    double avg = 0.0;
    double max = 0.0;
};

// For each reference point the distance to the candidate polyline; aggregated.
Deviation trace_deviation(std::span<const TraceSample> reference, std::span<const TraceSample> candidate);
Deviation trace_deviation(std::span<const RealVec3> reference, std::span<const RealVec3> candidate);

// CSV with header t_s,x_mm,y_mm,z_mm.
void write_trace(std::ostream& out, std::span<const TraceSample> trace);
std::vector<TraceSample> read_trace(std::istream& in);

}  // namespace needlesteer
