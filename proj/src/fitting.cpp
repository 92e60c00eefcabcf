#include "needlesteer/fitting.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace needlesteer {

namespace {

constexpr double kCollinearRatio = 1e-9;

struct Scatter {
    RealVec3 centroid;
    Eigen::Vector3d values;  // ascending
    Eigen::Matrix3d vectors;
};

Scatter scatter_of(std::span<const RealVec3> points) {
    RealVec3 c;
    for (const RealVec3& p : points) c += p;
    c = c / static_cast<double>(points.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const RealVec3& p : points) {
        const Eigen::Vector3d d(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    return {c, eig.eigenvalues(), eig.eigenvectors()};
}

RealVec3 column(const Eigen::Matrix3d& m, int i) { return {m(0, i), m(1, i), m(2, i)}; }

double point_segment_distance(const RealVec3& p, const RealVec3& a, const RealVec3& b) {
    const RealVec3 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 <= 0.0) return distance(p, a);
    const double u = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + ab * u);
}

double parse_number(const std::string& cell, int line) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError("not a number: '" + cell + "'", line);
    return v;
}

}  // namespace

Plane fit_plane(std::span<const RealVec3> points) {
    if (points.size() < 3) throw DegenerateGeometry("plane fit needs at least 3 points");
    const Scatter s = scatter_of(points);
    if (!(s.values(2) > 0.0) || s.values(1) < kCollinearRatio * s.values(2)) {
        throw DegenerateGeometry("points are collinear");
    }
    return {s.centroid, normalize(column(s.vectors, 0))};
}

RealVec3 fit_line_direction(std::span<const RealVec3> points) {
    if (points.size() < 2) throw InsufficientData("line fit needs at least 2 points");
    const Scatter s = scatter_of(points);
    if (!(s.values(2) > 0.0)) throw DegenerateGeometry("points coincide");
    RealVec3 d = normalize(column(s.vectors, 2));
    if (dot(d, points.back() - points.front()) < 0.0) d = -d;
    return d;
}

Circle2 fit_circle(std::span<const Point2> points) {
    if (points.size() < 3) throw DegenerateGeometry("circle fit needs at least 3 points");
    double cx = 0.0, cy = 0.0;
    for (const Point2& p : points) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(points.size());
    cy /= static_cast<double>(points.size());

    // Centered coordinates keep the normal equations well conditioned.
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const Point2& p : points) {
        const Eigen::Vector2d d(p.x - cx, p.y - cy);
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    if (!(eig.eigenvalues()(1) > 0.0) || eig.eigenvalues()(0) < kCollinearRatio * eig.eigenvalues()(1)) {
        throw DegenerateGeometry("points are collinear");
    }

    // x^2 + y^2 + D x + E y + F = 0
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = points[static_cast<std::size_t>(i)].x - cx;
        const double y = points[static_cast<std::size_t>(i)].y - cy;
        a(i, 0) = x;
        a(i, 1) = y;
        a(i, 2) = 1.0;
        b(i) = -(x * x + y * y);
    }
    const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
    const double ux = -sol(0) / 2.0;
    const double uy = -sol(1) / 2.0;
    const double r2 = ux * ux + uy * uy - sol(2);
    if (!(r2 > 0.0) || !std::isfinite(r2)) throw DegenerateGeometry("circle fit is degenerate");
    return {{ux + cx, uy + cy}, std::sqrt(r2)};
}

FittedCircle fit_motion_circle(std::span<const TraceSample> trace, const FitOptions& options) {
    if (trace.size() < std::max<std::size_t>(options.min_samples, 3)) {
        throw InsufficientData("motion-circle fit needs " + std::to_string(options.min_samples) + " samples, got " +
                               std::to_string(trace.size()));
    }
    double arc = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) arc += distance(trace[i].pos, trace[i - 1].pos);
    // Polyline chords run slightly short of the true arc.
    if (arc < options.min_arc_mm * (1.0 - 1e-3)) {
        throw InsufficientData("samples span " + std::to_string(arc) + " mm, need " + std::to_string(options.min_arc_mm));
    }

    std::vector<RealVec3> pts;
    pts.reserve(trace.size());
    for (const TraceSample& s : trace) pts.push_back(s.pos);
    const Plane plane = fit_plane(pts);

    // In-plane basis: u along the overall travel, v completing the frame.
    const RealVec3 travel = pts.back() - pts.front();
    RealVec3 u = travel - plane.normal * dot(travel, plane.normal);
    u = normalize(norm(u) > 1e-12 ? u : column(scatter_of(pts).vectors, 2));
    const RealVec3 v = cross(plane.normal, u);

    std::vector<Point2> flat;
    flat.reserve(pts.size());
    for (const RealVec3& p : pts) flat.push_back({dot(p - plane.point, u), dot(p - plane.point, v)});
    const Circle2 c2 = fit_circle(flat);

    FittedCircle fit;
    fit.plane_normal = plane.normal;
    fit.center = plane.point + u * c2.center.x + v * c2.center.y;
    fit.radius = c2.radius;

    const RealVec3 end = plane.point + u * flat.back().x + v * flat.back().y;
    if (fit.radius < options.r_min_mm || fit.radius > options.r_max_mm) {
        // Keep the circle through the last sample, along the fitted direction toward the center.
        const double r = std::clamp(fit.radius, options.r_min_mm, options.r_max_mm);
        fit.center = end + normalize(fit.center - end) * r;
        fit.radius = r;
        fit.clamped = true;
    }

    const RealVec3 step = trace.back().pos - trace[trace.size() - 2].pos;
    if (norm(step) <= 1e-12) throw DegenerateGeometry("zero displacement at the last sample");
    RealVec3 tangent = normalize(cross(plane.normal, end - fit.center));
    if (dot(tangent, step) < 0.0) tangent = -tangent;
    fit.tangent_at_end = tangent;

    double ss = 0.0;
    for (const RealVec3& p : pts) {
        const double off = dot(p - plane.point, plane.normal);
        const RealVec3 in_plane = p - plane.normal * off;
        const double radial = distance(in_plane, fit.center) - fit.radius;
        ss += off * off + radial * radial;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));
    return fit;
}

Deviation trace_deviation(std::span<const RealVec3> reference, std::span<const RealVec3> candidate) {
    if (reference.empty() || candidate.empty()) throw InsufficientData("trace deviation needs non-empty traces");
    Deviation d{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    for (const RealVec3& p : reference) {
        double best = distance(p, candidate.front());
        for (std::size_t i = 1; i < candidate.size(); ++i) {
            best = std::min(best, point_segment_distance(p, candidate[i - 1], candidate[i]));
        }
        d.min = std::min(d.min, best);
        d.max = std::max(d.max, best);
        d.avg += best;
    }
    d.avg /= static_cast<double>(reference.size());
    return d;
}

Deviation trace_deviation(std::span<const TraceSample> reference, std::span<const TraceSample> candidate) {
    std::vector<RealVec3> a, b;
    for (const TraceSample& s : reference) a.push_back(s.pos);
    for (const TraceSample& s : candidate) b.push_back(s.pos);
    return trace_deviation(std::span<const RealVec3>(a), std::span<const RealVec3>(b));
}

void write_trace(std::ostream& out, std::span<const TraceSample> trace) {
    out << "t_s,x_mm,y_mm,z_mm\n";
    char buf[160];
    for (const TraceSample& s : trace) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f,%.6f,%.6f\n", s.t, s.pos.x, s.pos.y, s.pos.z);
        out << buf;
    }
}

std::vector<TraceSample> read_trace(std::istream& in) {
    std::string line;
    int line_no = 0;
    std::vector<TraceSample> out;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "t_s,x_mm,y_mm,z_mm") throw ParseError("expected header t_s,x_mm,y_mm,z_mm", line_no);
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 4) throw ParseError("expected 4 columns, got " + std::to_string(cells.size()), line_no);
        TraceSample s{parse_number(cells[0], line_no),
                      {parse_number(cells[1], line_no), parse_number(cells[2], line_no), parse_number(cells[3], line_no)}};
        if (!out.empty() && !(s.t > out.back().t)) throw ParseError("time stamps must strictly increase", line_no);
        out.push_back(s);
    }
    if (!header) throw ParseError("empty trace file", 1);
    return out;
}

}  // namespace needlesteer
