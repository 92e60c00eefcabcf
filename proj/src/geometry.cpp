#include "needlesteer/geometry.hpp"

#include <limits>
#include <string>

namespace needlesteer {

RealVec3 normalize(const RealVec3& v) {
    const double n = norm(v);
    if (!(n > 1e-12)) {
        throw DegenerateGeometry("cannot normalize near-zero vector");
    }
    return v / n;
}

RealVec3 rotate_about_axis(const RealVec3& v, const RealVec3& axis, double angle_rad) {
    if (std::abs(norm(axis) - 1.0) > 1e-9) {
        throw ContractError("rotation axis must be unit length");
    }
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

std::int32_t quantize_scalar(double value, int scale) {
    if (scale <= 0) {
        throw ContractError("scale factor must be positive");
    }
    const double scaled = value * static_cast<double>(scale);
    if (!std::isfinite(scaled) || std::abs(scaled) >= static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
        throw RangeError("value " + std::to_string(value) + " mm does not fit the fixed-point range at scale " +
                         std::to_string(scale));
    }
    // std::round rounds halfway cases away from zero.
    return static_cast<std::int32_t>(std::round(scaled));
}

ScaledVec3 quantize(const RealVec3& v, int scale) {
    return {quantize_scalar(v.x, scale), quantize_scalar(v.y, scale), quantize_scalar(v.z, scale)};
}

RealVec3 unquantize(const ScaledVec3& v, int scale) {
    const double s = static_cast<double>(scale);
    return {v.x / s, v.y / s, v.z / s};
}

RotMat3 RotMat3::about_axis(const RealVec3& axis, double angle_rad) {
    return from_columns(rotate_about_axis({1, 0, 0}, axis, angle_rad), rotate_about_axis({0, 1, 0}, axis, angle_rad),
                        rotate_about_axis({0, 0, 1}, axis, angle_rad));
}

RotMat3 RotMat3::from_columns(const RealVec3& c0, const RealVec3& c1, const RealVec3& c2) {
    RotMat3 r;
    const RealVec3 cols[3] = {c0, c1, c2};
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            r.m[i][j] = cols[j][i];
        }
    }
    return r;
}

RealVec3 RotMat3::operator*(const RealVec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

RotMat3 RotMat3::operator*(const RotMat3& o) const {
    RotMat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) {
                acc += m[i][k] * o.m[k][j];
            }
            r.m[i][j] = acc;
        }
    }
    return r;
}

RotMat3 RotMat3::transposed() const {
    RotMat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r.m[i][j] = m[j][i];
        }
    }
    return r;
}

double RotMat3::determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

double RotMat3::orthonormality_error() const {
    const RotMat3 p = transposed() * *this;
    double err = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            err = std::max(err, std::abs(p.m[i][j] - (i == j ? 1.0 : 0.0)));
        }
    }
    return err;
}

}  // namespace needlesteer
