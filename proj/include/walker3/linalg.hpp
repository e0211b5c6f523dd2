#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "walker3/errors.hpp"

// Small fixed-size matrix helpers. Everything here is 2x2 or 3x3 and done by
// hand; no external linear algebra dependency is warranted at this size.
namespace walker3 {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;
using Mat2 = std::array<std::array<double, 2>, 2>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline constexpr Mat3 kIdentity3{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

inline double det2(const Mat2& m) {
    return m[0][0] * m[1][1] - m[0][1] * m[1][0];
}

inline double det3(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
         - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
         + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Mat3 mul3(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            out[i][j] = s;
        }
    return out;
}

inline Vec3 mul3v(const Mat3& a, const Vec3& v) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i) out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    return out;
}

inline Mat3 inverse3(const Mat3& m) {
    const double d = det3(m);
    if (std::abs(d) < 1e-300) throw GeometryError("singular 3x3 matrix");
    Mat3 adj;
    adj[0][0] =  (m[1][1] * m[2][2] - m[1][2] * m[2][1]);
    adj[0][1] = -(m[0][1] * m[2][2] - m[0][2] * m[2][1]);
    adj[0][2] =  (m[0][1] * m[1][2] - m[0][2] * m[1][1]);
    adj[1][0] = -(m[1][0] * m[2][2] - m[1][2] * m[2][0]);
    adj[1][1] =  (m[0][0] * m[2][2] - m[0][2] * m[2][0]);
    adj[1][2] = -(m[0][0] * m[1][2] - m[0][2] * m[1][0]);
    adj[2][0] =  (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    adj[2][1] = -(m[0][0] * m[2][1] - m[0][1] * m[2][0]);
    adj[2][2] =  (m[0][0] * m[1][1] - m[0][1] * m[1][0]);
    for (auto& row : adj)
        for (auto& v : row) v /= d;
    return adj;
}

inline Mat2 inverse2(const Mat2& m) {
    const double d = det2(m);
    if (std::abs(d) < 1e-300) throw GeometryError("singular 2x2 matrix");
    return Mat2{{{m[1][1] / d, -m[0][1] / d}, {-m[1][0] / d, m[0][0] / d}}};
}

// Solve m * x = b for a 2x2 system (Cramer).
inline Vec2 solve2(const Mat2& m, const Vec2& b) {
    const double d = det2(m);
    if (std::abs(d) < 1e-300) throw GeometryError("singular 2x2 system");
    return Vec2{(b[0] * m[1][1] - b[1] * m[0][1]) / d,
                (m[0][0] * b[1] - m[1][0] * b[0]) / d};
}

inline Vec3 solve3(const Mat3& m, const Vec3& b) {
    return mul3v(inverse3(m), b);
}

inline Vec3 cross3(const Vec3& a, const Vec3& b) {
    return Vec3{a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0]};
}

inline double norm3(const Vec3& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

inline double max_abs_diff3(const Mat3& a, const Mat3& b) {
    double m = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
    return m;
}

inline double frobenius2(const Mat2& m) {
    double s = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s += m[i][j] * m[i][j];
    return std::sqrt(s);
}

inline double max_abs2(const Mat2& m) {
    double r = 0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r = std::max(r, std::abs(m[i][j]));
    return r;
}

}  // namespace walker3
