#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "walker3/grid.hpp"
#include "walker3/linalg.hpp"
#include "walker3/walker.hpp"

// Levi-Civita connection and curvature of the Walker metric, computed two
// independent ways: the closed-form frame tables, and a coordinate route
// built from the Koszul formula. The curvature convention is
//   Rm(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z.
namespace walker3 {

// Central-difference step used by the coordinate oracles, scaled per
// coordinate magnitude.
inline constexpr double kFdStep = 1e-5;
// Larger outer step for the second-level differences inside the Cotton
// pipeline (first-level results carry ~1e-10 noise).
inline constexpr double kFdStepOuter = 1e-4;

inline double fd_step(double coord, double base = kFdStep) {
    return base * (1.0 + std::abs(coord));
}

using Christoffel = std::array<std::array<std::array<double, 3>, 3>, 3>;  // [l][i][j] = Gamma^l_ij
using Riemann = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;  // [i][j][k][l]
using Cotton = std::array<std::array<std::array<double, 3>, 3>, 3>;  // [i][j][k] = C_ijk

// Values of nabla_{e_i} e_j in frame components.
struct ConnectionTable {
    Point p;
    std::array<std::array<FrameVector, 3>, 3> entry;

    const FrameVector& operator()(int i, int j) const { return entry[i][j]; }
};

// Values of Rm(e_i, e_j) e_k in frame components.
struct CurvatureTable {
    Point p;
    std::array<std::array<std::array<FrameVector, 3>, 3>, 3> entry;

    const FrameVector& operator()(int i, int j, int k) const { return entry[i][j][k]; }
};

// Koszul route: Gamma^l_ij = 1/2 g^{lk} (d_i g_jk + d_j g_ik - d_k g_ij),
// with the metric derivatives taken symbolically and the inverse numeric.
inline Christoffel christoffel_coord(const WalkerMetric& m, const Point& p) {
    const Mat3 g = m.metric_components(p);
    const Mat3 ginv = inverse3(g);
    std::array<std::array<std::array<double, 3>, 3>, 3> dg{};
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) dg[c][a][b] = m.metric_partial(c, a, b, p);
    Christoffel out{};
    for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k)
                    s += ginv[l][k] * (dg[i][j][k] + dg[j][i][k] - dg[k][i][j]);
                out[l][i][j] = 0.5 * s;
            }
    return out;
}

// nabla_u v for coordinate vectors given pointwise; the derivative term must
// be supplied by the caller (zero for coordinate basis directions).
inline Vec3 covariant_combine(const Christoffel& gamma, const Vec3& u, const Vec3& v, const Vec3& dv_along_u) {
    Vec3 out = dv_along_u;
    for (int k = 0; k < 3; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) out[k] += gamma[k][a][b] * u[a] * v[b];
    return out;
}

// Closed-form connection table. Only nabla_{e2} and nabla_{e3} entries are
// non-zero; they are all multiples of f_x.
inline ConnectionTable connection_frame(const WalkerMetric& m, const Point& p) {
    const double fx = m.fx_at(p);
    const double eps = m.epsilon();
    ConnectionTable t;
    t.p = p;
    for (auto& row : t.entry)
        for (auto& v : row) v = FrameVector{0, 0, 0, p};
    t.entry[1][0] = FrameVector{0, fx / 4, fx / 4, p};
    t.entry[2][0] = FrameVector{0, -fx / 4, -fx / 4, p};
    t.entry[1][1] = FrameVector{-eps * fx / 4, 0, 0, p};
    t.entry[2][1] = FrameVector{eps * fx / 4, 0, 0, p};
    t.entry[1][2] = FrameVector{eps * fx / 4, 0, 0, p};
    t.entry[2][2] = FrameVector{-eps * fx / 4, 0, 0, p};
    return t;
}

namespace detail {

// Coordinate components of the frame fields and their (x, y) derivatives,
// obtained by differentiating the frame coefficients through the chain rule.
struct FrameJet {
    std::array<Vec3, 3> value;  // e_i components
    std::array<Vec3, 3> dx;     // d/dx of the components
    std::array<Vec3, 3> dy;     // d/dy of the components
};

inline FrameJet frame_jet(const WalkerMetric& m, const Point& p) {
    const double fv = m.f_at(p);
    const double fx = m.fx_at(p);
    const double fy = m.fy_at(p);
    FrameJet j;
    j.value[0] = Vec3{0, 1, 0};
    j.value[1] = Vec3{(2 - fv) / (2 * kSqrt2), 0, 1 / kSqrt2};
    j.value[2] = Vec3{(2 + fv) / (2 * kSqrt2), 0, -1 / kSqrt2};
    j.dx[0] = j.dy[0] = Vec3{0, 0, 0};
    j.dx[1] = Vec3{-fx / (2 * kSqrt2), 0, 0};
    j.dy[1] = Vec3{-fy / (2 * kSqrt2), 0, 0};
    j.dx[2] = Vec3{fx / (2 * kSqrt2), 0, 0};
    j.dy[2] = Vec3{fy / (2 * kSqrt2), 0, 0};
    return j;
}

}  // namespace detail

// Coordinate route for the same table: nabla_{e_i} e_j assembled from
// christoffel_coord plus the derivative of the frame coefficients, then
// converted back to frame components.
inline ConnectionTable connection_frame_oracle(const WalkerMetric& m, const Point& p) {
    const auto gamma = christoffel_coord(m, p);
    const auto jet = detail::frame_jet(m, p);
    ConnectionTable t;
    t.p = p;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            // e_i(c_j^k) = (e_i)^x d_x c_j^k + (e_i)^y d_y c_j^k
            Vec3 dcoef{};
            for (int k = 0; k < 3; ++k)
                dcoef[k] = jet.value[i][1] * jet.dx[j][k] + jet.value[i][2] * jet.dy[j][k];
            const Vec3 w = covariant_combine(gamma, jet.value[i], jet.value[j], dcoef);
            const FrameVector fv = m.coord_to_frame(CoordVector{w[0], w[1], w[2], p});
            t.entry[i][j] = fv;
        }
    return t;
}

// Closed-form curvature table; all entries are multiples of f_xx and involve
// only the (e1, e2) and (e1, e3) index pairs.
inline CurvatureTable curvature_frame(const WalkerMetric& m, const Point& p) {
    const double fxx = m.fxx_at(p);
    const double eps = m.epsilon();
    CurvatureTable t;
    t.p = p;
    for (auto& plane : t.entry)
        for (auto& row : plane)
            for (auto& v : row) v = FrameVector{0, 0, 0, p};
    const auto set = [&](int i, int j, int k, double a1, double a2, double a3) {
        t.entry[i][j][k] = FrameVector{a1, a2, a3, p};
        t.entry[j][i][k] = FrameVector{-a1, -a2, -a3, p};
    };
    set(0, 1, 0, 0, fxx / 4, fxx / 4);
    set(0, 2, 0, 0, -fxx / 4, -fxx / 4);
    set(0, 1, 1, -eps * fxx / 4, 0, 0);
    set(0, 1, 2, eps * fxx / 4, 0, 0);
    set(0, 2, 1, eps * fxx / 4, 0, 0);
    set(0, 2, 2, -eps * fxx / 4, 0, 0);
    return t;
}

// Coordinate Riemann tensor R[i][j][k][l]: component l of Rm(d_i, d_j) d_k,
//   R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk
//                                             - Gamma^l_jm Gamma^m_ik,
// with the Christoffel derivatives taken by central differences.
inline Riemann riemann_coord_oracle(const WalkerMetric& m, const Point& p) {
    const auto gamma = christoffel_coord(m, p);
    std::array<Christoffel, 3> dgamma{};
    const std::array<double, 3> coords{p.t, p.x, p.y};
    for (int c = 0; c < 3; ++c) {
        const double h = fd_step(coords[c]);
        Point pp = p, pm = p;
        (c == 0 ? pp.t : c == 1 ? pp.x : pp.y) += h;
        (c == 0 ? pm.t : c == 1 ? pm.x : pm.y) -= h;
        const auto gp = christoffel_coord(m, pp);
        const auto gm = christoffel_coord(m, pm);
        for (int l = 0; l < 3; ++l)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) dgamma[c][l][i][j] = (gp[l][i][j] - gm[l][i][j]) / (2 * h);
    }
    Riemann r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    double s = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                    for (int mm = 0; mm < 3; ++mm)
                        s += gamma[l][i][mm] * gamma[mm][j][k] - gamma[l][j][mm] * gamma[mm][i][k];
                    r[i][j][k][l] = s;
                }
    return r;
}

// Contract the coordinate Riemann oracle against the frame fields and convert
// to frame components, for comparison with curvature_frame.
inline CurvatureTable curvature_frame_from_oracle(const WalkerMetric& m, const Point& p) {
    const auto r = riemann_coord_oracle(m, p);
    const auto jet = detail::frame_jet(m, p);
    CurvatureTable t;
    t.p = p;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                Vec3 w{};
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b)
                        for (int c = 0; c < 3; ++c)
                            for (int l = 0; l < 3; ++l)
                                w[l] += jet.value[i][a] * jet.value[j][b] * jet.value[k][c] * r[a][b][c][l];
                t.entry[i][j][k] = m.coord_to_frame(CoordVector{w[0], w[1], w[2], p});
            }
    return t;
}

// Lowered curvature R_ijkl = <Rm(d_i,d_j)d_k, d_l> from a coordinate array.
inline double lower_riemann(const Riemann& r, const Mat3& g, int i, int j, int k, int l) {
    double s = 0;
    for (int mth = 0; mth < 3; ++mth) s += g[l][mth] * r[i][j][k][mth];
    return s;
}

struct JetScanVerdict {
    bool vanishes = true;
    double max_abs = 0;
    Point witness;
};

// Flat iff f_xx vanishes on the sample grid (all curvature entries are
// multiples of f_xx).
inline JetScanVerdict is_flat(const WalkerMetric& m, const GridSpec3& grid, double tol) {
    JetScanVerdict v;
    for (const Point& p : grid.points()) {
        const double a = std::abs(m.fxx_at(p));
        if (a > v.max_abs) {
            v.max_abs = a;
            v.witness = p;
        }
    }
    v.vanishes = v.max_abs <= tol;
    return v;
}

// Locally conformally flat iff f is quadratic in x, i.e. f_xxx vanishes.
inline JetScanVerdict is_locally_conformally_flat(const WalkerMetric& m, const GridSpec3& grid, double tol) {
    JetScanVerdict v;
    for (const Point& p : grid.points()) {
        const double a = std::abs(m.fxxx_at(p));
        if (a > v.max_abs) {
            v.max_abs = a;
            v.witness = p;
        }
    }
    v.vanishes = v.max_abs <= tol;
    return v;
}

// Ricci from the coordinate oracle: Ric_jk = sum_i (Rm(d_i, d_j) d_k)^i.
inline Mat3 ricci_coord(const WalkerMetric& m, const Point& p) {
    const auto r = riemann_coord_oracle(m, p);
    Mat3 ric{};
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            double s = 0;
            for (int i = 0; i < 3; ++i) s += r[i][j][k][i];
            ric[j][k] = s;
        }
    return ric;
}

inline double scalar_curvature(const WalkerMetric& m, const Point& p) {
    const Mat3 ric = ricci_coord(m, p);
    const Mat3 ginv = inverse3(m.metric_components(p));
    double s = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += ginv[i][j] * ric[i][j];
    return s;
}

// Three-dimensional Cotton tensor
//   C_ijk = nabla_k R_ij - nabla_j R_ik + 1/4 (d_j S g_ik - d_k S g_ij),
// assembled from the coordinate Ricci via finite differences. It vanishes
// exactly when the metric is locally conformally flat; this is the
// independent check for the f_xxx criterion.
inline Cotton cotton_oracle(const WalkerMetric& m, const Point& p) {
    const auto gamma = christoffel_coord(m, p);
    const Mat3 g = m.metric_components(p);
    const Mat3 ric = ricci_coord(m, p);

    std::array<Mat3, 3> dric{};
    std::array<double, 3> dS{};
    const std::array<double, 3> coords{p.t, p.x, p.y};
    for (int c = 0; c < 3; ++c) {
        const double h = fd_step(coords[c], kFdStepOuter);
        Point pp = p, pm = p;
        (c == 0 ? pp.t : c == 1 ? pp.x : pp.y) += h;
        (c == 0 ? pm.t : c == 1 ? pm.x : pm.y) -= h;
        const Mat3 rp = ricci_coord(m, pp);
        const Mat3 rm = ricci_coord(m, pm);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) dric[c][i][j] = (rp[i][j] - rm[i][j]) / (2 * h);
        dS[c] = (scalar_curvature(m, pp) - scalar_curvature(m, pm)) / (2 * h);
    }

    const auto cov_ric = [&](int c, int i, int j) {
        double s = dric[c][i][j];
        for (int l = 0; l < 3; ++l) s -= gamma[l][c][i] * ric[l][j] + gamma[l][c][j] * ric[i][l];
        return s;
    };

    Cotton out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                out[i][j][k] = cov_ric(k, i, j) - cov_ric(j, i, k)
                             + 0.25 * (dS[j] * g[i][k] - dS[k] * g[i][j]);
    return out;
}

inline double cotton_max_abs(const Cotton& c) {
    double r = 0;
    for (const auto& a : c)
        for (const auto& b : a)
            for (double v : b) r = std::max(r, std::abs(v));
    return r;
}

struct CottonScan {
    double max_abs = 0;
    Point witness;
};

inline CottonScan cotton_scan(const WalkerMetric& m, const std::vector<Point>& pts) {
    CottonScan s;
    for (const Point& p : pts) {
        const double a = cotton_max_abs(cotton_oracle(m, p));
        if (a >= s.max_abs) {
            if (a > s.max_abs) s.witness = p;
            s.max_abs = std::max(s.max_abs, a);
        }
    }
    return s;
}

// Residual diagnostics used by the verification suites ----------------------

inline double table_max_deviation(const WalkerMetric&, const ConnectionTable& a, const ConnectionTable& b) {
    double r = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            r = std::max(r, std::abs(a(i, j).a1 - b(i, j).a1));
            r = std::max(r, std::abs(a(i, j).a2 - b(i, j).a2));
            r = std::max(r, std::abs(a(i, j).a3 - b(i, j).a3));
        }
    return r;
}

inline double table_max_deviation(const CurvatureTable& a, const CurvatureTable& b) {
    double r = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                r = std::max(r, std::abs(a(i, j, k).a1 - b(i, j, k).a1));
                r = std::max(r, std::abs(a(i, j, k).a2 - b(i, j, k).a2));
                r = std::max(r, std::abs(a(i, j, k).a3 - b(i, j, k).a3));
            }
    return r;
}

// <nabla_{e_i} e_j, e_k> + <e_j, nabla_{e_i} e_k> must vanish since the frame
// inner products are constant.
inline double metric_compatibility_residual(const WalkerMetric& m, const ConnectionTable& t) {
    const int eps = m.epsilon();
    double r = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                Vec3 ej{}, ek{};
                ej[j] = 1;
                ek[k] = 1;
                const double a = frame_inner(eps, t(i, j).components(), ek);
                const double b = frame_inner(eps, ej, t(i, k).components());
                r = std::max(r, std::abs(a + b));
            }
    return r;
}

// Torsion check: nabla_{e_i} e_j - nabla_{e_j} e_i must equal the Lie bracket
// [e_i, e_j], computed from the symbolic frame coefficients.
inline double torsion_residual(const WalkerMetric& m, const Point& p) {
    const auto t = connection_frame(m, p);
    const auto jet = detail::frame_jet(m, p);
    double r = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Vec3 bracket{};
            for (int k = 0; k < 3; ++k) {
                const double ei_on_cj = jet.value[i][1] * jet.dx[j][k] + jet.value[i][2] * jet.dy[j][k];
                const double ej_on_ci = jet.value[j][1] * jet.dx[i][k] + jet.value[j][2] * jet.dy[i][k];
                bracket[k] = ei_on_cj - ej_on_ci;
            }
            const FrameVector lie = m.coord_to_frame(CoordVector{bracket[0], bracket[1], bracket[2], p});
            r = std::max(r, std::abs(t(i, j).a1 - t(j, i).a1 - lie.a1));
            r = std::max(r, std::abs(t(i, j).a2 - t(j, i).a2 - lie.a2));
            r = std::max(r, std::abs(t(i, j).a3 - t(j, i).a3 - lie.a3));
        }
    return r;
}

// Antisymmetry in (i,j), pair symmetry and the first Bianchi identity for a
// lowered curvature array.
struct CurvatureIdentityResiduals {
    double antisymmetry = 0;
    double pair_symmetry = 0;
    double first_bianchi = 0;
};

inline CurvatureIdentityResiduals curvature_identity_residuals(const Riemann& r, const Mat3& g) {
    CurvatureIdentityResiduals out;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    const double rijkl = lower_riemann(r, g, i, j, k, l);
                    out.antisymmetry = std::max(out.antisymmetry,
                                                std::abs(rijkl + lower_riemann(r, g, j, i, k, l)));
                    out.pair_symmetry = std::max(out.pair_symmetry,
                                                 std::abs(rijkl - lower_riemann(r, g, k, l, i, j)));
                    const double bianchi = r[i][j][k][l] + r[j][k][i][l] + r[k][i][j][l];
                    out.first_bianchi = std::max(out.first_bianchi, std::abs(bianchi));
                }
    return out;
}

}  // namespace walker3
