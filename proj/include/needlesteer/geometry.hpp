#pragma once

// Fixed-point storage (ScaledVec3) with double-precision intermediate algebra (RealVec3, RotMat3).
// Positions that are part of a model state are kept on the integer grid of pitch 1/S mm;
// everything else is computed in doubles and quantized back when stored.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>

#include "needlesteer/errors.hpp"

namespace needlesteer {

inline constexpr int kDefaultScale = 100;  // 0.01 mm grid

struct RealVec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr RealVec3() = default;
    constexpr RealVec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr RealVec3 operator+(const RealVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr RealVec3 operator-(const RealVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr RealVec3 operator-() const { return {-x, -y, -z}; }
    constexpr RealVec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr RealVec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    RealVec3& operator+=(const RealVec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    RealVec3& operator-=(const RealVec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr bool operator==(const RealVec3&) const = default;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr RealVec3 operator*(double s, const RealVec3& v) { return v * s; }

struct ScaledVec3 {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    constexpr bool operator==(const ScaledVec3&) const = default;
};

// 3x3 matrix, row-major.
struct RotMat3 {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static RotMat3 identity() { return {}; }
    static RotMat3 about_axis(const RealVec3& axis, double angle_rad);
    static RotMat3 from_columns(const RealVec3& c0, const RealVec3& c1, const RealVec3& c2);

    RealVec3 operator*(const RealVec3& v) const;
    RotMat3 operator*(const RotMat3& o) const;
    RotMat3 transposed() const;
    double determinant() const;
    // max |R^T R - I| entry
    double orthonormality_error() const;
};

constexpr double dot(const RealVec3& a, const RealVec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr RealVec3 cross(const RealVec3& a, const RealVec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const RealVec3& v) { return std::sqrt(dot(v, v)); }
inline double distance(const RealVec3& a, const RealVec3& b) { return norm(a - b); }
inline double max_abs_diff(const RealVec3& a, const RealVec3& b) {
    return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(a.z - b.z)});
}

// Throws DegenerateGeometry when |v| <= 1e-12.
RealVec3 normalize(const RealVec3& v);

// Right-handed rotation of v about a unit axis (Rodrigues). Throws ContractError for non-unit axes.
RealVec3 rotate_about_axis(const RealVec3& v, const RealVec3& axis, double angle_rad);

// Nearest integer to each component times S; ties round away from zero. Throws RangeError on overflow.
ScaledVec3 quantize(const RealVec3& v, int scale);
RealVec3 unquantize(const ScaledVec3& v, int scale);

// Scalar helpers used throughout for lengths stored in grid units.
std::int32_t quantize_scalar(double value, int scale);

}  // namespace needlesteer

template <>
struct std::hash<needlesteer::ScaledVec3> {
    std::size_t operator()(const needlesteer::ScaledVec3& v) const noexcept {
        std::uint64_t h = static_cast<std::uint32_t>(v.x);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.y);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.z);
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};
