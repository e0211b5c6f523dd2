#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "walker3/expr.hpp"
#include "walker3/grid.hpp"
#include "walker3/linalg.hpp"

// The Walker metric eps*dx^2 + f(x,y)*dy^2 + 2*dt*dy on a chart with
// coordinates ordered (t, x, y), together with the pseudo-orthonormal frame
//   e1 = d_x,
//   e2 = (2-f)/(2*sqrt(2)) d_t + 1/sqrt(2) d_y,
//   e3 = (2+f)/(2*sqrt(2)) d_t - 1/sqrt(2) d_y,
// whose inner products are <e1,e1> = eps, <e2,e2> = 1, <e3,e3> = -1.
// d_t is the parallel null direction.
namespace walker3 {

inline constexpr double kSqrt2 = 1.4142135623730950488;

// Tangent vector in coordinate components (d_t, d_x, d_y) at a base point.
struct CoordVector {
    double at = 0, ax = 0, ay = 0;
    Point base;

    Vec3 components() const { return Vec3{at, ax, ay}; }
};

// Tangent vector in frame components (e1, e2, e3) at a base point.
struct FrameVector {
    double a1 = 0, a2 = 0, a3 = 0;
    Point base;

    Vec3 components() const { return Vec3{a1, a2, a3}; }
};

// Frame-only inner product diag(eps, 1, -1); no base point involved.
inline double frame_inner(int epsilon, const Vec3& a, const Vec3& b) {
    return epsilon * a[0] * b[0] + a[1] * b[1] - a[2] * b[2];
}

class WalkerMetric {
public:
    WalkerMetric(int epsilon, ScalarExpr f) : epsilon_(epsilon), f_(std::move(f)) {
        if (epsilon_ != 1 && epsilon_ != -1) throw GeometryError("epsilon must be +1 or -1");
        const auto& vars = *f_.variables();
        if (vars.size() != 2 || vars[0] != "x" || vars[1] != "y")
            throw GeometryError("f must be an expression in the variables (x, y)");
        fx_ = f_.derivative(0);
        fxx_ = fx_.derivative(0);
        fxxx_ = fxx_.derivative(0);
        fy_ = f_.derivative(1);
        fxy_ = fx_.derivative(1);
        fxxy_ = fxx_.derivative(1);

        // Symbolic coordinate metric, kept entry-by-entry so the Christoffel
        // oracle can differentiate it generically.
        const auto vl = f_.variables();
        const auto c = [&](long long v) { return ScalarExpr::constant(v, 1, vl); };
        g_entries_[0] = {c(0), c(0), c(1)};
        g_entries_[1] = {c(0), c(epsilon_), c(0)};
        g_entries_[2] = {c(1), c(0), f_};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                dg_entries_[0][a][b] = c(0);  // nothing depends on t
                dg_entries_[1][a][b] = g_entries_[a][b].derivative(0);
                dg_entries_[2][a][b] = g_entries_[a][b].derivative(1);
            }
    }

    static WalkerMetric from_source(int epsilon, std::string_view f_source) {
        return WalkerMetric(epsilon, ScalarExpr::parse(f_source, {"x", "y"}));
    }

    int epsilon() const { return epsilon_; }
    const ScalarExpr& f() const { return f_; }
    const ScalarExpr& f_x() const { return fx_; }
    const ScalarExpr& f_xx() const { return fxx_; }
    const ScalarExpr& f_xxx() const { return fxxx_; }
    const ScalarExpr& f_y() const { return fy_; }
    const ScalarExpr& f_xy() const { return fxy_; }
    const ScalarExpr& f_xxy() const { return fxxy_; }

    double f_at(const Point& p) const { return eval(f_, p); }
    double fx_at(const Point& p) const { return eval(fx_, p); }
    double fxx_at(const Point& p) const { return eval(fxx_, p); }
    double fxxx_at(const Point& p) const { return eval(fxxx_, p); }
    double fy_at(const Point& p) const { return eval(fy_, p); }
    double fxy_at(const Point& p) const { return eval(fxy_, p); }
    double fxxy_at(const Point& p) const { return eval(fxxy_, p); }

    // Coordinate components in order (t, x, y).
    Mat3 metric_components(const Point& p) const {
        const double fv = f_at(p);
        return Mat3{{{0, 0, 1},
                     {0, static_cast<double>(epsilon_), 0},
                     {1, 0, fv}}};
    }

    // Closed-form inverse; det(g) = -eps so this never degenerates.
    Mat3 inverse_metric(const Point& p) const {
        const double fv = f_at(p);
        return Mat3{{{-fv, 0, 1},
                     {0, 1.0 / epsilon_, 0},
                     {1, 0, 0}}};
    }

    // d_c g_ab evaluated symbolically (c = 0 is the t-direction).
    double metric_partial(int c, int a, int b, const Point& p) const {
        return eval(dg_entries_[c][a][b], p);
    }

    std::array<CoordVector, 3> frame_at(const Point& p) const {
        const double fv = f_at(p);
        std::array<CoordVector, 3> e;
        e[0] = CoordVector{0, 1, 0, p};
        e[1] = CoordVector{(2 - fv) / (2 * kSqrt2), 0, 1.0 / kSqrt2, p};
        e[2] = CoordVector{(2 + fv) / (2 * kSqrt2), 0, -1.0 / kSqrt2, p};
        return e;
    }

    CoordVector frame_to_coord(const FrameVector& v) const {
        const auto e = frame_at(v.base);
        return CoordVector{v.a1 * e[0].at + v.a2 * e[1].at + v.a3 * e[2].at,
                           v.a1 * e[0].ax + v.a2 * e[1].ax + v.a3 * e[2].ax,
                           v.a1 * e[0].ay + v.a2 * e[1].ay + v.a3 * e[2].ay,
                           v.base};
    }

    FrameVector coord_to_frame(const CoordVector& v) const {
        const double fv = f_at(v.base);
        // Invert the frame display: a1 = ax, a2 +- a3 from the (t, y) pair.
        const double sum = kSqrt2 * v.at + fv / kSqrt2 * v.ay;
        const double dif = kSqrt2 * v.ay;
        return FrameVector{v.ax, (sum + dif) / 2, (sum - dif) / 2, v.base};
    }

    double inner(const CoordVector& a, const CoordVector& b) const {
        require_same_base(a.base, b.base);
        const Mat3 g = metric_components(a.base);
        double s = 0;
        const Vec3 av = a.components(), bv = b.components();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += g[i][j] * av[i] * bv[j];
        return s;
    }

    double inner(const FrameVector& a, const FrameVector& b) const {
        require_same_base(a.base, b.base);
        return frame_inner(epsilon_, a.components(), b.components());
    }

    double inner(const FrameVector& a, const CoordVector& b) const {
        return inner(frame_to_coord(a), b);
    }

    double inner(const CoordVector& a, const FrameVector& b) const {
        return inner(a, frame_to_coord(b));
    }

private:
    double eval(const ScalarExpr& e, const Point& p) const {
        const std::array<double, 2> xy{p.x, p.y};
        return e.evaluate(xy);
    }

    static void require_same_base(const Point& a, const Point& b) {
        if (a.t != b.t || a.x != b.x || a.y != b.y)
            throw GeometryError("inner product of vectors at different base points");
    }

    int epsilon_;
    ScalarExpr f_, fx_, fxx_, fxxx_, fy_, fxy_, fxxy_;
    std::array<std::array<ScalarExpr, 3>, 3> g_entries_;
    std::array<std::array<std::array<ScalarExpr, 3>, 3>, 3> dg_entries_;
};

}  // namespace walker3
