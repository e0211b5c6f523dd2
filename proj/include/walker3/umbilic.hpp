#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "walker3/connection.hpp"
#include "walker3/rng.hpp"
#include "walker3/surface.hpp"
#include "walker3/walker.hpp"

// Machinery for totally umbilical surfaces: the tangent frame {T1, T2} built
// from the normal components, the closed forms for the frame components of
// grad(lambda), the two independent evaluations of the Lie-bracket derivative
// [e1^T, e2^T](lambda), and the resulting integrability obstruction
//   v3 (v2 - v3)^2 f_xxx = 0
// that any totally umbilical surface must satisfy pointwise.
namespace walker3 {

// Points with |v1| below this are routed to the v1 = 0 branch of the case
// classifier; marginal points within a decade above it are reported.
inline constexpr double kV1ZeroThreshold = 1e-6;

// A point together with unit-normal components, causal character and
// umbilic factor; the algebraic identities are polynomial in these.
struct AdmissibleState {
    Point p;
    double v1 = 0, v2 = 0, v3 = 0;
    int delta = 1;
    double lambda = 0;

    double unit_residual(int epsilon) const {
        return std::abs(epsilon * v1 * v1 + v2 * v2 - v3 * v3 - delta);
    }
};

inline void require_admissible(const WalkerMetric& m, const AdmissibleState& st, double tol = 1e-10) {
    if (st.delta != 1 && st.delta != -1) throw GeometryError("delta must be +1 or -1");
    if (st.unit_residual(m.epsilon()) > tol)
        throw GeometryError("normal components violate eps*v1^2 + v2^2 - v3^2 = delta");
}

// T1 = v1 e2 - eps v2 e1 and T2 = v1 e3 + eps v3 e1 span the tangent plane
// when v1 != 0. M's columns are (T1, T2, V) in the e-frame; det M = eps*delta*v1.
struct UmbilicFrame {
    FrameVector T1, T2;
    Mat3 M{};
    double detM = 0;
};

inline UmbilicFrame umbilic_frame(const WalkerMetric& m, const AdmissibleState& st) {
    const double eps = m.epsilon();
    UmbilicFrame f;
    f.T1 = FrameVector{-eps * st.v2, st.v1, 0, st.p};
    f.T2 = FrameVector{eps * st.v3, 0, st.v1, st.p};
    f.M = Mat3{{{-eps * st.v2, eps * st.v3, st.v1},
                {st.v1, 0, st.v2},
                {0, st.v1, st.v3}}};
    f.detM = det3(f.M);
    return f;
}

// Frame components of grad(lambda) forced by the umbilical condition:
//   <grad l, e1> = delta f_xx v1 (v2-v3)^2 / 4
//   <grad l, e2> = delta f_xx (v3-v2) (v1^2 + eps v3 (v2-v3)) / 4
//   <grad l, e3> = delta f_xx (v2-v3) (v1^2 + eps v2 (v2-v3)) / 4
inline std::array<double, 3> grad_lambda_frame(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    const double eps = m.epsilon();
    const double fxx = m.fxx_at(st.p);
    const double w = st.v2 - st.v3;
    return {st.delta * fxx * st.v1 * w * w / 4,
            st.delta * fxx * (-w) * (st.v1 * st.v1 + eps * st.v3 * w) / 4,
            st.delta * fxx * w * (st.v1 * st.v1 + eps * st.v2 * w) / 4};
}

// Two-path check of Rm(T1,T2)V = <grad l, T2> T1 - <grad l, T1> T2: the left
// side comes from the curvature table by multilinearity and is decomposed in
// the {T1, T2, V} basis; the right side from grad_lambda_frame. Returns the
// largest coefficient deviation (the V-coefficient must vanish).
inline double lemma_curvature_gradient_residual(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    if (st.v1 == 0) throw GeometryError("v1 = 0: {T1, T2} does not span the tangent plane");
    const UmbilicFrame uf = umbilic_frame(m, st);
    const auto curv = curvature_frame(m, st.p);

    const Vec3 t1 = uf.T1.components();
    const Vec3 t2 = uf.T2.components();
    const Vec3 vn{st.v1, st.v2, st.v3};
    Vec3 lhs{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) {
                const double c = t1[i] * t2[j] * vn[k];
                if (c == 0) continue;
                const Vec3 r = curv(i, j, k).components();
                lhs[0] += c * r[0];
                lhs[1] += c * r[1];
                lhs[2] += c * r[2];
            }
    const Vec3 coeffs = solve3(uf.M, lhs);  // (T1, T2, V) coefficients

    const auto g = grad_lambda_frame(m, st);
    const double gl_t1 = t1[0] * g[0] + t1[1] * g[1] + t1[2] * g[2];
    const double gl_t2 = t2[0] * g[0] + t2[1] * g[1] + t2[2] * g[2];

    double r = std::abs(coeffs[0] - gl_t2);
    r = std::max(r, std::abs(coeffs[1] + gl_t1));
    r = std::max(r, std::abs(coeffs[2]));
    return r;
}

// eta^T = eta - delta <eta, V> V in frame components.
inline FrameVector tangential_projection(const WalkerMetric& m, const FrameVector& eta,
                                         const AdmissibleState& st) {
    const Vec3 vn{st.v1, st.v2, st.v3};
    const double ip = frame_inner(m.epsilon(), eta.components(), vn);
    return FrameVector{eta.a1 - st.delta * ip * st.v1,
                       eta.a2 - st.delta * ip * st.v2,
                       eta.a3 - st.delta * ip * st.v3, eta.base};
}

// Closed form <e_i^T, e_j^T> = sig_i delta_ij - delta sig_i sig_j v_i v_j.
inline double projected_gram(const WalkerMetric& m, const AdmissibleState& st, int i, int j) {
    const std::array<double, 3> sig{static_cast<double>(m.epsilon()), 1.0, -1.0};
    const std::array<double, 3> vn{st.v1, st.v2, st.v3};
    return sig[i] * (i == j ? 1.0 : 0.0) - st.delta * sig[i] * sig[j] * vn[i] * vn[j];
}

// [e1^T, e2^T](lambda) evaluated through the induced connection:
//   (delta (v2-v3) f_xx / 4) *
//     ( (eps f_x (v2-v3)^2 / 4)(delta(eps v1^2 + v2^2 - v2 v3) - 1) + lambda v1 ).
inline double lambda_bracket_connection(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    const double eps = m.epsilon();
    const double fx = m.fx_at(st.p), fxx = m.fxx_at(st.p);
    const double w = st.v2 - st.v3;
    const double pre = st.delta * w * fxx / 4;
    const double inner = (eps * fx * w * w / 4) *
                             (st.delta * (eps * st.v1 * st.v1 + st.v2 * st.v2 - st.v2 * st.v3) - 1) +
                         st.lambda * st.v1;
    return pre * inner;
}

// Same derivative evaluated by differentiating the closed forms directly;
// it differs from the connection route by the obstruction-carrying tail
//   (delta (v2-v3) / 4)(eps v3 (v2-v3) f_xxx).
inline double lambda_bracket_direct(const WalkerMetric& m, const AdmissibleState& st) {
    const double eps = m.epsilon();
    const double w = st.v2 - st.v3;
    const double fxxx = m.fxxx_at(st.p);
    return lambda_bracket_connection(m, st) - (st.delta * w / 4) * (eps * st.v3 * w * fxxx);
}

// Pointwise integrability obstruction v3 (v2 - v3)^2 f_xxx.
inline double umbilic_obstruction(double v1, double v2, double v3, double fxxx) {
    (void)v1;
    const double w = v2 - v3;
    return v3 * w * w * fxxx;
}

inline double umbilic_obstruction(const AdmissibleState& st, const WalkerMetric& m) {
    return umbilic_obstruction(st.v1, st.v2, st.v3, m.fxxx_at(st.p));
}

// <grad v_i, e_j^T> forced by the umbilical condition:
//   sig_i ( sum_k sig_k <e_j^T, e_k^T> <nabla_{e_k} e_i, V> ) - sig_i lambda <e_i^T, e_j^T>.
inline double normal_component_derivative(const WalkerMetric& m, const AdmissibleState& st, int i, int j) {
    require_admissible(m, st);
    const std::array<double, 3> sig{static_cast<double>(m.epsilon()), 1.0, -1.0};
    const Vec3 vn{st.v1, st.v2, st.v3};
    const auto conn = connection_frame(m, st.p);
    double s = 0;
    for (int k = 0; k < 3; ++k) {
        const double f_ki = frame_inner(m.epsilon(), conn(k, i).components(), vn);
        s += sig[k] * projected_gram(m, st, j, k) * f_ki;
    }
    return sig[i] * s - sig[i] * st.lambda * projected_gram(m, st, i, j);
}

// Independent re-derivation of the direct route: chain rule through the
// normal components and the ambient jets of f_xx. Matching
// lambda_bracket_direct on admissible states is a strong consistency check
// of the whole formula set (the f_xxy contributions cancel exactly on the
// unit sphere bundle).
inline double lambda_bracket_direct_derivation(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    const double eps = m.epsilon();
    const double w = st.v2 - st.v3;
    const double fxx = m.fxx_at(st.p);
    const double fxxx = m.fxxx_at(st.p);
    const double fxxy = m.fxxy_at(st.p);

    // P_j with <grad l, e_j> = delta f_xx P_j / 4, and their v-gradients.
    const double q = st.v1 * st.v1 + eps * st.v3 * w;
    const std::array<double, 3> dP1{w * w, 2 * st.v1 * w, -2 * st.v1 * w};
    const std::array<double, 3> dP2{-2 * st.v1 * w,
                                    -q - w * eps * st.v3,
                                    q - w * eps * (st.v2 - 2 * st.v3)};
    const double P1 = st.v1 * w * w;
    const double P2 = -w * q;

    // e_i^T in frame components and its coordinate (x, y) parts.
    const std::array<double, 3> sig{static_cast<double>(eps), 1.0, -1.0};
    const std::array<double, 3> vn{st.v1, st.v2, st.v3};
    const auto projected = [&](int i) {
        std::array<double, 3> c{};
        for (int mth = 0; mth < 3; ++mth) c[mth] = -st.delta * sig[i] * vn[i] * vn[mth];
        c[i] += 1.0;
        return c;
    };
    const auto dir_fxx = [&](const std::array<double, 3>& c) {
        const double comp_x = c[0];
        const double comp_y = (c[1] - c[2]) / kSqrt2;
        return comp_x * fxxx + comp_y * fxxy;
    };
    const std::array<double, 3> e1t = projected(0);
    const std::array<double, 3> e2t = projected(1);

    const auto term = [&](const std::array<double, 3>& dP, double P, int along) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += dP[k] * normal_component_derivative(m, st, k, along);
        return st.delta / 4.0 * (fxx * s + P * dir_fxx(along == 0 ? e1t : e2t));
    };

    return term(dP2, P2, 0) - term(dP1, P1, 1);
}

// The connection route assembled step by step (projection of the frame
// covariant derivatives plus the shape-operator term), as a second
// independent evaluation of lambda_bracket_connection.
inline double lambda_bracket_connection_assembled(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    const std::array<double, 3> sig{static_cast<double>(m.epsilon()), 1.0, -1.0};
    const Vec3 vn{st.v1, st.v2, st.v3};
    const auto conn = connection_frame(m, st.p);
    const auto g = grad_lambda_frame(m, st);

    const auto projected = [&](const Vec3& c) {
        const double ip = frame_inner(m.epsilon(), c, vn);
        return Vec3{c[0] - st.delta * ip * vn[0], c[1] - st.delta * ip * vn[1], c[2] - st.delta * ip * vn[2]};
    };
    const auto e_t = [&](int i) {
        Vec3 c{};
        c[i] = 1;
        return projected(c);
    };

    // nabla_{e_i^T} e_j^T = sum_k sig_k <e_i^T, e_k^T> (nabla_{e_k} e_j)^T
    //                        + delta <V, e_j> lambda e_i^T
    const auto nab = [&](int i, int j) {
        Vec3 out{};
        for (int k = 0; k < 3; ++k) {
            const Vec3 proj = projected(conn(k, j).components());
            const double c = sig[k] * projected_gram(m, st, i, k);
            for (int mth = 0; mth < 3; ++mth) out[mth] += c * proj[mth];
        }
        const double c2 = st.delta * sig[j] * vn[j] * st.lambda;
        const Vec3 eit = e_t(i);
        for (int mth = 0; mth < 3; ++mth) out[mth] += c2 * eit[mth];
        return out;
    };

    const Vec3 w01 = nab(0, 1);
    const Vec3 w10 = nab(1, 0);
    double value = 0;
    for (int mth = 0; mth < 3; ++mth) value += (w01[mth] - w10[mth]) * g[mth];
    return value;
}

// Both bracket values plus the obstruction, with consistency flags:
// `internal_inconsistency` fires when the two routes disagree although the
// obstruction vanishes (a bug detector), `obstruction_fired` when both the
// disagreement and the obstruction are above tolerance.
struct ObstructionRecord {
    Point p;
    double v1 = 0, v2 = 0, v3 = 0;
    int delta = 1;
    double lambda = 0;
    double bracket_connection = 0;  // A
    double bracket_direct = 0;      // B
    double difference = 0;          // B - A
    double obstruction = 0;
    bool internal_inconsistency = false;
    bool obstruction_fired = false;
};

inline ObstructionRecord bracket_consistency(const WalkerMetric& m, const AdmissibleState& st, double tol) {
    ObstructionRecord rec;
    rec.p = st.p;
    rec.v1 = st.v1;
    rec.v2 = st.v2;
    rec.v3 = st.v3;
    rec.delta = st.delta;
    rec.lambda = st.lambda;
    rec.bracket_connection = lambda_bracket_connection(m, st);
    rec.bracket_direct = lambda_bracket_direct(m, st);
    rec.difference = rec.bracket_direct - rec.bracket_connection;
    rec.obstruction = umbilic_obstruction(st, m);
    const bool diff_big = std::abs(rec.difference) > tol;
    const bool obs_big = std::abs(rec.obstruction) > tol;
    rec.internal_inconsistency = diff_big && !obs_big;
    rec.obstruction_fired = diff_big && obs_big;
    return rec;
}

// For v3 = 0 states: <nabla_{T1} V, e3> assembled from the connection table
// (the derivative terms of the v_i pair with directions orthogonal to e3)
// against the closed form -v1^2 f_x / 4.
struct V3ZeroIdentity {
    double assembled = 0;
    double closed_form = 0;
    double residual() const { return std::abs(assembled - closed_form); }
};

inline V3ZeroIdentity case_v3zero_identity(const WalkerMetric& m, const AdmissibleState& st) {
    require_admissible(m, st);
    if (std::abs(st.v3) > 1e-12) throw GeometryError("identity requires v3 = 0");
    const auto conn = connection_frame(m, st.p);
    const UmbilicFrame uf = umbilic_frame(m, st);
    const Vec3 t1 = uf.T1.components();
    const Vec3 vn{st.v1, st.v2, st.v3};
    const Vec3 e3{0, 0, 1};
    double val = 0;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            const double c = vn[i] * t1[k];
            if (c == 0) continue;
            val += c * frame_inner(m.epsilon(), conn(k, i).components(), e3);
        }
    V3ZeroIdentity out;
    out.assembled = val;
    out.closed_form = -st.v1 * st.v1 * m.fx_at(st.p) / 4;
    return out;
}

// Seeded sampler for admissible states: (v1, v2) uniform in [-2,2]^2,
// v3 = +-sqrt(eps v1^2 + v2^2 - delta) when the radicand allows, resampling
// otherwise. lambda uniform in [-2,2], points uniform in the box.
class AdmissibleSampler {
public:
    AdmissibleSampler(int epsilon, int delta, Box3 box, std::uint64_t seed,
                      double v1_min = 0.0, bool force_v3_zero = false)
        : epsilon_(epsilon), delta_(delta), box_(box), rng_(seed),
          v1_min_(v1_min), force_v3_zero_(force_v3_zero) {
        if (!feasible(epsilon, delta, force_v3_zero))
            throw GeometryError("no admissible states for this (epsilon, delta) combination");
    }

    static bool feasible(int epsilon, int delta, bool force_v3_zero) {
        if (!force_v3_zero) return true;
        // need eps v1^2 + v2^2 = delta solvable
        return !(epsilon == 1 && delta == -1);
    }

    AdmissibleState next() {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            AdmissibleState st;
            st.delta = delta_;
            st.p = Point{rng_.uniform(box_.t0, box_.t1), rng_.uniform(box_.x0, box_.x1),
                         rng_.uniform(box_.y0, box_.y1)};
            st.lambda = rng_.uniform(-2, 2);
            if (force_v3_zero_) {
                st.v1 = rng_.uniform(-2, 2);
                const double rad = delta_ - epsilon_ * st.v1 * st.v1;
                const int sgn = rng_.sign();
                if (rad < 0) continue;
                st.v2 = sgn * std::sqrt(rad);
                st.v3 = 0;
            } else {
                st.v1 = rng_.uniform(-2, 2);
                st.v2 = rng_.uniform(-2, 2);
                const double rad = epsilon_ * st.v1 * st.v1 + st.v2 * st.v2 - delta_;
                const int sgn = rng_.sign();
                if (rad < 0) continue;
                st.v3 = sgn * std::sqrt(rad);
            }
            if (std::abs(st.v1) < v1_min_) continue;
            return st;
        }
        throw GeometryError("admissible-state sampling failed to converge");
    }

private:
    int epsilon_, delta_;
    Box3 box_;
    Rng rng_;
    double v1_min_;
    bool force_v3_zero_;
};

// Finite-difference audit of the bracket derivative on an actual surface:
// lambda is sampled on a parameter stencil, differentiated along e1^T and
// e2^T twice (direct route) and through the ambient connection (connection
// route), and both are compared with the closed forms.
struct BracketAuditReport {
    double direct_fd = 0;       // e1^T(e2^T(lambda)) - e2^T(e1^T(lambda))
    double connection_fd = 0;   // <nabla_{e1^T} e2^T - nabla_{e2^T} e1^T, grad lambda>
    double closed_connection = 0;
    double closed_direct = 0;
    double max_pairwise_dev = 0;
    double rho_at_point = 0;
};

namespace detail {

struct TangentComponents {
    double a = 0, b = 0;  // coefficients in the (X_u, X_v) basis
};

inline TangentComponents parameter_components(const SurfacePatch& s, const WalkerMetric& m,
                                              double u, double v, const CoordVector& w) {
    const auto [xu, xv] = tangents(s, u, v);
    const InducedMetric ind = induced_metric(s, u, v, m);
    const Vec2 rhs{m.inner(w, xu), m.inner(w, xv)};
    const Vec2 c = solve2(ind.g, rhs);
    return TangentComponents{c[0], c[1]};
}

}  // namespace detail

inline BracketAuditReport numeric_bracket_audit(const SurfacePatch& s, const WalkerMetric& m,
                                                int delta, double u, double v, double tol,
                                                double step = 1e-3) {
    const SecondFundamentalData center = second_fundamental(s, u, v, m, delta);
    if (center.rho > tol)
        throw GeometryError("bracket audit requires an umbilical point (rho exceeds tolerance)");
    const NormalData ref = center.normal;

    // lambda and the projected frame fields with a continuous normal sign.
    const auto lambda_at = [&](double uu, double vv) {
        return second_fundamental(s, uu, vv, m, delta, &ref).lambda;
    };

    const auto projected_field = [&](int i, double uu, double vv) {
        const NormalData n = normal_aligned(s, uu, vv, m, delta, ref);
        const Point p = s.at(uu, vv);
        const auto frame = m.frame_at(p);
        const CoordVector ei = frame[static_cast<std::size_t>(i)];
        const double ip = m.inner(ei, n.coord);
        return CoordVector{ei.at - delta * ip * n.coord.at,
                           ei.ax - delta * ip * n.coord.ax,
                           ei.ay - delta * ip * n.coord.ay, p};
    };

    const auto components_field = [&](int i, double uu, double vv) {
        return detail::parameter_components(s, m, uu, vv, projected_field(i, uu, vv));
    };

    // stencil degeneracy: e1^T and e2^T must stay linearly independent
    const auto check_span = [&](double uu, double vv) {
        const auto c1 = components_field(0, uu, vv);
        const auto c2 = components_field(1, uu, vv);
        const double n1 = std::hypot(c1.a, c1.b), n2 = std::hypot(c2.a, c2.b);
        const double wedge = std::abs(c1.a * c2.b - c1.b * c2.a);
        if (wedge < 1e-8 * std::max(1.0, n1 * n2))
            throw GeometryError("degenerate stencil: projected frame fields are linearly dependent");
    };
    check_span(u, v);
    check_span(u + step, v);
    check_span(u - step, v);
    check_span(u, v + step);
    check_span(u, v - step);

    const auto dlambda = [&](double uu, double vv) {
        return std::array<double, 2>{(lambda_at(uu + step, vv) - lambda_at(uu - step, vv)) / (2 * step),
                                     (lambda_at(uu, vv + step) - lambda_at(uu, vv - step)) / (2 * step)};
    };

    // phi_i = e_i^T(lambda) as a field on the parameter domain
    const auto phi = [&](int i, double uu, double vv) {
        const auto c = components_field(i, uu, vv);
        const auto dl = dlambda(uu, vv);
        return c.a * dl[0] + c.b * dl[1];
    };

    const auto directional_of = [&](int i, auto&& field, double uu, double vv) {
        const auto c = components_field(i, uu, vv);
        const double fu = (field(uu + step, vv) - field(uu - step, vv)) / (2 * step);
        const double fv = (field(uu, vv + step) - field(uu, vv - step)) / (2 * step);
        return c.a * fu + c.b * fv;
    };

    BracketAuditReport rep;
    rep.rho_at_point = center.rho;
    rep.direct_fd = directional_of(0, [&](double a, double b) { return phi(1, a, b); }, u, v) -
                    directional_of(1, [&](double a, double b) { return phi(0, a, b); }, u, v);

    // connection route: W = nabla_{e1^T} e2^T - nabla_{e2^T} e1^T, then <W, grad lambda>
    const Point p = s.at(u, v);
    const auto gamma = christoffel_coord(m, p);
    const auto cov_tangent = [&](int i, int j) {
        const auto ci = components_field(i, u, v);
        Vec3 dEj{};
        for (int k = 0; k < 3; ++k) {
            const auto comp = [&](double uu, double vv) {
                const CoordVector w = projected_field(j, uu, vv);
                return k == 0 ? w.at : k == 1 ? w.ax : w.ay;
            };
            const double fu = (comp(u + step, v) - comp(u - step, v)) / (2 * step);
            const double fv = (comp(u, v + step) - comp(u, v - step)) / (2 * step);
            dEj[k] = ci.a * fu + ci.b * fv;
        }
        const CoordVector Ei = projected_field(i, u, v);
        const CoordVector Ej = projected_field(j, u, v);
        return covariant_combine(gamma, Ei.components(), Ej.components(), dEj);
    };
    const Vec3 w01 = cov_tangent(0, 1);
    const Vec3 w10 = cov_tangent(1, 0);
    const CoordVector W{w01[0] - w10[0], w01[1] - w10[1], w01[2] - w10[2], p};

    const auto dl = dlambda(u, v);
    const InducedMetric ind = induced_metric(s, u, v, m);
    const Mat2 ginv = inverse2(ind.g);
    const auto [xu, xv] = tangents(s, u, v);
    const Vec2 grad_param{ginv[0][0] * dl[0] + ginv[0][1] * dl[1],
                          ginv[1][0] * dl[0] + ginv[1][1] * dl[1]};
    const CoordVector grad_lambda{grad_param[0] * xu.at + grad_param[1] * xv.at,
                                  grad_param[0] * xu.ax + grad_param[1] * xv.ax,
                                  grad_param[0] * xu.ay + grad_param[1] * xv.ay, p};
    rep.connection_fd = m.inner(W, grad_lambda);

    // closed forms at the center state
    AdmissibleState st;
    st.p = p;
    st.v1 = ref.v1();
    st.v2 = ref.v2();
    st.v3 = ref.v3();
    st.delta = delta;
    st.lambda = center.lambda;
    rep.closed_connection = lambda_bracket_connection(m, st);
    rep.closed_direct = lambda_bracket_direct(m, st);

    const std::array<double, 4> vals{rep.direct_fd, rep.connection_fd, rep.closed_connection,
                                     rep.closed_direct};
    for (double a : vals)
        for (double b : vals) rep.max_pairwise_dev = std::max(rep.max_pairwise_dev, std::abs(a - b));
    return rep;
}

// Case analysis for an umbilical scan: which of
//   (a) v1 ~ 0 (then lambda must vanish),
//   (b) v3 ~ 0 (then f_x must vanish: flat ambient),
//   (c) v2 ~ v3 (then lambda must be constant),
//   (d) f_xxx ~ 0 on the sampled image (locally conformally flat ambient)
// hold across the grid. Cases are not mutually exclusive; all firing ones are
// reported. An umbilical scan violating the pointwise obstruction, or firing
// a case whose implied sub-check fails, is flagged as an inconsistency.
struct CaseReport {
    bool fired = false;
    double condition_max = 0;   // max |quantity| the condition bounds
    bool subcheck_ok = true;
    double subcheck_value = 0;
    std::string subcheck_name;
};

struct ClassifyResult {
    bool applicable = false;
    UmbilicVerdict scan_verdict = UmbilicVerdict::Degenerate;
    CaseReport v1_zero;    // (a)
    CaseReport v3_zero;    // (b)
    CaseReport v2_eq_v3;   // (c)
    CaseReport lcf;        // (d)
    double max_abs_obstruction = 0;
    int obstruction_witness = -1;
    int n_marginal_v1 = 0;  // |v1| within a decade above the zero threshold
    bool any_case_fired = false;
    bool inconsistent = false;
    std::vector<std::string> flags;
};

inline ClassifyResult classify_records(const UmbilicScanResult& scan, const WalkerMetric&,
                                       double tol) {
    ClassifyResult out;
    out.scan_verdict = scan.verdict;
    out.applicable = scan.verdict == UmbilicVerdict::Umbilical && scan.n_ok > 0;
    if (!out.applicable) return out;

    double max_v1 = 0, max_v3 = 0, max_w = 0, max_fx = 0, max_fxxx = 0, max_lambda = 0;
    double lambda_min = 0, lambda_max = 0;
    bool first = true;
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
        const auto& r = scan.points[i];
        if (r.status != PointStatus::Ok) continue;
        max_v1 = std::max(max_v1, std::abs(r.v1));
        max_v3 = std::max(max_v3, std::abs(r.v3));
        max_w = std::max(max_w, std::abs(r.v2 - r.v3));
        max_fx = std::max(max_fx, std::abs(r.fx));
        max_fxxx = std::max(max_fxxx, std::abs(r.fxxx));
        max_lambda = std::max(max_lambda, std::abs(r.lambda));
        if (std::abs(r.obstruction) >= out.max_abs_obstruction) {
            out.max_abs_obstruction = std::abs(r.obstruction);
            out.obstruction_witness = static_cast<int>(i);
        }
        if (std::abs(r.v1) >= kV1ZeroThreshold && std::abs(r.v1) < 10 * kV1ZeroThreshold)
            ++out.n_marginal_v1;
        if (first) {
            lambda_min = lambda_max = r.lambda;
            first = false;
        } else {
            lambda_min = std::min(lambda_min, r.lambda);
            lambda_max = std::max(lambda_max, r.lambda);
        }
    }

    out.v1_zero.condition_max = max_v1;
    out.v1_zero.fired = max_v1 < kV1ZeroThreshold;
    out.v1_zero.subcheck_name = "max_abs_lambda";
    out.v1_zero.subcheck_value = max_lambda;
    out.v1_zero.subcheck_ok = max_lambda <= tol;

    out.v3_zero.condition_max = max_v3;
    out.v3_zero.fired = max_v3 <= tol;
    out.v3_zero.subcheck_name = "max_abs_fx";
    out.v3_zero.subcheck_value = max_fx;
    out.v3_zero.subcheck_ok = max_fx <= tol;

    out.v2_eq_v3.condition_max = max_w;
    out.v2_eq_v3.fired = max_w <= tol;
    out.v2_eq_v3.subcheck_name = "lambda_spread";
    out.v2_eq_v3.subcheck_value = lambda_max - lambda_min;
    out.v2_eq_v3.subcheck_ok = (lambda_max - lambda_min) <= tol;

    out.lcf.condition_max = max_fxxx;
    out.lcf.fired = max_fxxx <= tol;
    out.lcf.subcheck_name = "";
    out.lcf.subcheck_value = 0;
    out.lcf.subcheck_ok = true;

    out.any_case_fired = out.v1_zero.fired || out.v3_zero.fired || out.v2_eq_v3.fired || out.lcf.fired;

    if (out.max_abs_obstruction > tol) {
        out.inconsistent = true;
        out.flags.push_back("pointwise obstruction exceeds tolerance on an umbilical patch");
    }
    const auto check_case = [&](const CaseReport& c, const char* name) {
        if (c.fired && !c.subcheck_ok) {
            out.inconsistent = true;
            out.flags.push_back(std::string("case ") + name + " fired but sub-check " +
                                c.subcheck_name + " failed");
        }
    };
    check_case(out.v1_zero, "v1=0");
    check_case(out.v3_zero, "v3=0");
    check_case(out.v2_eq_v3, "v2=v3");
    if (!out.any_case_fired) {
        if (out.max_abs_obstruction <= tol) {
            out.flags.push_back("no single case holds across the whole grid; pointwise obstruction still vanishes");
        } else {
            out.inconsistent = true;
            out.flags.push_back("umbilical patch fits no case of the classification");
        }
    }
    return out;
}

inline ClassifyResult classify(const SurfacePatch& s, const WalkerMetric& m, int delta,
                               const GridSpec2& grid, double umbilic_tol, double case_tol) {
    return classify_records(umbilic_scan(s, m, delta, grid, umbilic_tol), m, case_tol);
}

}  // namespace walker3
