#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "walker3/connection.hpp"
#include "walker3/expr.hpp"
#include "walker3/grid.hpp"
#include "walker3/linalg.hpp"
#include "walker3/parallel_for.hpp"
#include "walker3/walker.hpp"

// Parametrized surface patches (u,v) -> (t,x,y) in a Walker three-manifold:
// induced metric, delta-normal, second fundamental form h, shape operator S,
// and the umbilicity scan. Conventions:
//   nabla_X Y = nabla^Sigma_X Y + h(X,Y) V,      <V,V> = delta = +-1,
//   S(T) = -nabla_T V,                           <S(X),Y> = delta h(X,Y),
//   umbilical when h = delta * lambda * g_Sigma.
namespace walker3 {

// One embedding component with partials up to second order. Components built
// from expressions use exact symbolic derivatives; ODE-built patches plug in
// spline evaluations instead.
struct PatchComponent {
    std::function<double(double, double)> val, du, dv, duu, duv, dvv;

    static PatchComponent from_expr(const ScalarExpr& e) {
        const ScalarExpr eu = e.derivative(0), ev = e.derivative(1);
        const ScalarExpr euu = eu.derivative(0), euv = eu.derivative(1), evv = ev.derivative(1);
        const auto bind = [](const ScalarExpr& ex) {
            return [ex](double u, double v) {
                const std::array<double, 2> q{u, v};
                return ex.evaluate(q);
            };
        };
        return PatchComponent{bind(e), bind(eu), bind(ev), bind(euu), bind(euv), bind(evv)};
    }
};

class SurfacePatch {
public:
    SurfacePatch(PatchComponent t, PatchComponent x, PatchComponent y, Rect2 domain,
                 std::array<std::string, 3> source = {})
        : t_(std::move(t)), x_(std::move(x)), y_(std::move(y)), domain_(domain), source_(std::move(source)) {}

    // Embedding from three expressions in (u, v).
    static SurfacePatch from_expressions(std::string_view t_src, std::string_view x_src,
                                         std::string_view y_src, Rect2 domain) {
        const auto vars = ScalarExpr::make_vars({"u", "v"});
        return SurfacePatch(PatchComponent::from_expr(ScalarExpr::parse(t_src, vars)),
                            PatchComponent::from_expr(ScalarExpr::parse(x_src, vars)),
                            PatchComponent::from_expr(ScalarExpr::parse(y_src, vars)),
                            domain, {std::string(t_src), std::string(x_src), std::string(y_src)});
    }

    const Rect2& domain() const { return domain_; }
    const std::array<std::string, 3>& source() const { return source_; }

    Point at(double u, double v) const {
        return Point{t_.val(u, v), x_.val(u, v), y_.val(u, v)};
    }

    CoordVector tangent_u(double u, double v) const {
        return CoordVector{t_.du(u, v), x_.du(u, v), y_.du(u, v), at(u, v)};
    }

    CoordVector tangent_v(double u, double v) const {
        return CoordVector{t_.dv(u, v), x_.dv(u, v), y_.dv(u, v), at(u, v)};
    }

    // Second partial of the embedding; (a, b) index the parameters (0=u, 1=v).
    Vec3 second_partial(int a, int b, double u, double v) const {
        const auto pick = [&](const PatchComponent& c) {
            if (a == 0 && b == 0) return c.duu(u, v);
            if (a == 1 && b == 1) return c.dvv(u, v);
            return c.duv(u, v);
        };
        return Vec3{pick(t_), pick(x_), pick(y_)};
    }

private:
    PatchComponent t_, x_, y_;
    Rect2 domain_;
    std::array<std::string, 3> source_;
};

inline std::pair<CoordVector, CoordVector> tangents(const SurfacePatch& s, double u, double v) {
    return {s.tangent_u(u, v), s.tangent_v(u, v)};
}

struct InducedMetric {
    Mat2 g{};
    double det = 0;
    bool degenerate = false;
};

// Gram matrix of (X_u, X_v); flagged degenerate when |det| falls below
// 1e-10 relative to the metric's own scale.
inline InducedMetric induced_metric(const SurfacePatch& s, double u, double v, const WalkerMetric& m) {
    const auto [xu, xv] = tangents(s, u, v);
    InducedMetric out;
    out.g[0][0] = m.inner(xu, xu);
    out.g[0][1] = out.g[1][0] = m.inner(xu, xv);
    out.g[1][1] = m.inner(xv, xv);
    out.det = det2(out.g);
    const double scale = std::max(1.0, frobenius2(out.g) * frobenius2(out.g));
    out.degenerate = std::abs(out.det) <= 1e-10 * scale;
    return out;
}

struct NormalData {
    int delta = 1;
    CoordVector coord;
    FrameVector frame;

    double v1() const { return frame.a1; }
    double v2() const { return frame.a2; }
    double v3() const { return frame.a3; }
};

namespace detail {

// Unnormalized normal direction: the Euclidean cross product of the two
// metric-lowered tangent covectors annihilates both tangents exactly.
inline Vec3 normal_direction(const SurfacePatch& s, double u, double v, const WalkerMetric& m) {
    const auto [xu, xv] = tangents(s, u, v);
    const Mat3 g = m.metric_components(xu.base);
    const Vec3 cu = mul3v(g, xu.components());
    const Vec3 cv = mul3v(g, xv.components());
    return cross3(cu, cv);
}

inline void orient_largest_component(NormalData& n) {
    const Vec3 c = n.frame.components();
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(c[i]) > std::abs(c[best])) best = i;
    if (c[best] < 0) {
        n.coord = CoordVector{-n.coord.at, -n.coord.ax, -n.coord.ay, n.coord.base};
        n.frame = FrameVector{-n.frame.a1, -n.frame.a2, -n.frame.a3, n.frame.base};
    }
}

}  // namespace detail

// Unit delta-normal with a deterministic sign: the largest-magnitude frame
// component is made non-negative (first index on ties). Throws when the
// induced metric is degenerate, the normal direction is lightlike, or its
// causal character contradicts the requested delta.
inline NormalData normal(const SurfacePatch& s, double u, double v, const WalkerMetric& m, int delta) {
    if (delta != 1 && delta != -1) throw GeometryError("delta must be +1 or -1");
    const InducedMetric ind = induced_metric(s, u, v, m);
    if (ind.degenerate) throw GeometryError("degenerate induced metric; no unit normal");
    Vec3 dir = detail::normal_direction(s, u, v, m);
    const double en = norm3(dir);
    if (en == 0.0) throw GeometryError("vanishing tangent span; no normal direction");
    for (double& c : dir) c /= en;
    const Point p = s.at(u, v);
    const CoordVector cdir{dir[0], dir[1], dir[2], p};
    const double q = m.inner(cdir, cdir);
    if (std::abs(q) <= 1e-10) throw GeometryError("lightlike normal direction");
    if ((q > 0 ? 1 : -1) != delta)
        throw GeometryError(std::string("normal has causal character delta = ") + (q > 0 ? "+1" : "-1") +
                            ", incompatible with requested delta");
    const double inv = 1.0 / std::sqrt(std::abs(q));
    NormalData n;
    n.delta = delta;
    n.coord = CoordVector{dir[0] * inv, dir[1] * inv, dir[2] * inv, p};
    n.frame = m.coord_to_frame(n.coord);
    detail::orient_largest_component(n);
    return n;
}

// Same data with the sign aligned against a reference direction instead of
// the deterministic rule; used when differentiating the normal field.
inline NormalData normal_aligned(const SurfacePatch& s, double u, double v, const WalkerMetric& m,
                                 int delta, const NormalData& reference) {
    NormalData n = normal(s, u, v, m, delta);
    const Vec3 a = n.frame.components(), b = reference.frame.components();
    if (a[0] * b[0] + a[1] * b[1] + a[2] * b[2] < 0) {
        n.coord = CoordVector{-n.coord.at, -n.coord.ax, -n.coord.ay, n.coord.base};
        n.frame = FrameVector{-n.frame.a1, -n.frame.a2, -n.frame.a3, n.frame.base};
    }
    return n;
}

struct SecondFundamentalData {
    Mat2 induced{};            // g_Sigma
    Mat2 h{};                  // second fundamental form (scalar-valued)
    Mat2 shape{};              // shape operator in the (X_u, X_v) basis
    double lambda = 0;         // delta * tr_g(h) / 2
    double rho = 0;            // |h - delta*lambda*g|_F / max(1, |g|_F)
    double shape_vs_h_dev = 0; // max |<S(X_a),X_b> - delta h(X_a,X_b)|
    NormalData normal;
};

// h_ab = delta * <nabla_{X_a} X_b, V> from the Christoffel oracle and the
// symbolic second partials; S by centered differences of the normal field
// along the parameter curves (the agreement of the two is a diagnostic,
// not an assumption). When `align` is given the normal sign follows that
// reference instead of the deterministic orientation rule.
inline SecondFundamentalData second_fundamental(const SurfacePatch& s, double u, double v,
                                                const WalkerMetric& m, int delta,
                                                const NormalData* align = nullptr) {
    SecondFundamentalData out;
    out.normal = align ? normal_aligned(s, u, v, m, delta, *align) : normal(s, u, v, m, delta);
    const InducedMetric ind = induced_metric(s, u, v, m);
    out.induced = ind.g;

    const Point p = s.at(u, v);
    const auto gamma = christoffel_coord(m, p);
    const auto [xu, xv] = tangents(s, u, v);
    const std::array<Vec3, 2> tang{xu.components(), xv.components()};

    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const Vec3 dd = s.second_partial(a, b, u, v);
            const Vec3 w = covariant_combine(gamma, tang[a], tang[b], dd);
            const CoordVector cw{w[0], w[1], w[2], p};
            out.h[a][b] = delta * m.inner(cw, out.normal.coord);
        }

    const Mat2 ginv = inverse2(ind.g);
    double trace = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) trace += ginv[a][b] * out.h[a][b];
    out.lambda = delta * trace / 2;

    Mat2 traceless = out.h;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) traceless[a][b] -= delta * out.lambda * ind.g[a][b];
    out.rho = frobenius2(traceless) / std::max(1.0, frobenius2(ind.g));

    // S(X_a) = -nabla_{X_a} V, with the normal field differentiated along the
    // parameter curves under a continuous sign choice. Central differences in
    // the interior; second-order one-sided stencils against the domain edges.
    const double hstep = 1e-5;
    const Rect2& dom = s.domain();
    std::array<Vec3, 2> svec{};
    for (int a = 0; a < 2; ++a) {
        const double c = a == 0 ? u : v;
        const double lo = a == 0 ? dom.u0 : dom.v0;
        const double hi = a == 0 ? dom.u1 : dom.v1;
        const auto normal_coord = [&](double q) {
            const NormalData n = a == 0 ? normal_aligned(s, q, v, m, delta, out.normal)
                                        : normal_aligned(s, u, q, m, delta, out.normal);
            return n.coord.components();
        };
        Vec3 dn{};
        if (c + hstep <= hi && c - hstep >= lo) {
            const Vec3 np = normal_coord(c + hstep), nm = normal_coord(c - hstep);
            for (int k = 0; k < 3; ++k) dn[k] = (np[k] - nm[k]) / (2 * hstep);
        } else if (c + 2 * hstep <= hi) {
            const Vec3 n0 = normal_coord(c), n1 = normal_coord(c + hstep), n2 = normal_coord(c + 2 * hstep);
            for (int k = 0; k < 3; ++k) dn[k] = (-3 * n0[k] + 4 * n1[k] - n2[k]) / (2 * hstep);
        } else if (c - 2 * hstep >= lo) {
            const Vec3 n0 = normal_coord(c), n1 = normal_coord(c - hstep), n2 = normal_coord(c - 2 * hstep);
            for (int k = 0; k < 3; ++k) dn[k] = (3 * n0[k] - 4 * n1[k] + n2[k]) / (2 * hstep);
        } else {
            throw GeometryError("parameter domain too thin for the shape-operator stencil");
        }
        const Vec3 w = covariant_combine(gamma, tang[a], out.normal.coord.components(), dn);
        svec[a] = Vec3{-w[0], -w[1], -w[2]};
    }

    double dev = 0;
    for (int a = 0; a < 2; ++a) {
        const CoordVector sa{svec[a][0], svec[a][1], svec[a][2], p};
        const Vec2 rhs{m.inner(sa, xu), m.inner(sa, xv)};
        const Vec2 comp = solve2(ind.g, rhs);
        out.shape[0][a] = comp[0];
        out.shape[1][a] = comp[1];
        dev = std::max(dev, std::abs(rhs[0] - delta * out.h[a][0]));
        dev = std::max(dev, std::abs(rhs[1] - delta * out.h[a][1]));
    }
    out.shape_vs_h_dev = dev;
    return out;
}

enum class PointStatus { Ok, DegenerateMetric, LightlikeNormal, DeltaMismatch, EvalFailure };

inline const char* to_string(PointStatus s) {
    switch (s) {
        case PointStatus::Ok: return "ok";
        case PointStatus::DegenerateMetric: return "degenerate";
        case PointStatus::LightlikeNormal: return "lightlike_normal";
        case PointStatus::DeltaMismatch: return "delta_mismatch";
        case PointStatus::EvalFailure: return "eval_failure";
    }
    return "?";
}

// Per-point record of the umbilic scan. Numeric fields are NaN when the
// status is not Ok.
struct UmbilicPointRecord {
    double u = 0, v = 0;
    Point p;
    PointStatus status = PointStatus::Ok;
    double lambda = 0, rho = 0;
    double v1 = 0, v2 = 0, v3 = 0;
    double nt = 0, nx = 0, ny = 0;  // normal in coordinates
    double fx = 0, fxx = 0, fxxx = 0;
    double obstruction = 0;  // v3 (v2 - v3)^2 f_xxx
    double h_norm = 0;
    double h_max_abs = 0;
    double shape_vs_h_dev = 0;
};

enum class UmbilicVerdict { Umbilical, NonUmbilical, Degenerate };

inline const char* to_string(UmbilicVerdict v) {
    switch (v) {
        case UmbilicVerdict::Umbilical: return "umbilical";
        case UmbilicVerdict::NonUmbilical: return "non_umbilical";
        case UmbilicVerdict::Degenerate: return "degenerate";
    }
    return "?";
}

struct UmbilicScanResult {
    std::vector<UmbilicPointRecord> points;
    UmbilicVerdict verdict = UmbilicVerdict::Degenerate;
    int witness_index = -1;  // worst-rho point for NonUmbilical verdicts
    double max_rho = 0;
    double max_abs_lambda = 0;
    double lambda_min = 0, lambda_max = 0;
    double max_shape_vs_h_dev = 0;
    double max_abs_h = 0;
    int n_ok = 0, n_degenerate = 0;
    double tol = 0;
};

// Grid scan: per-point lambda, rho, normal components, ambient jets and the
// obstruction value. Degeneracies are recorded per point, never thrown.
inline UmbilicScanResult umbilic_scan(const SurfacePatch& s, const WalkerMetric& m, int delta,
                                      const GridSpec2& grid, double tol) {
    const auto qs = grid.points();
    UmbilicScanResult out;
    out.tol = tol;
    out.points.resize(qs.size());

    parallel_for(qs.size(), [&](std::size_t i) {
        const auto [u, v] = qs[i];
        UmbilicPointRecord rec;
        rec.u = u;
        rec.v = v;
        const double nan = std::nan("");
        rec.lambda = rec.rho = rec.v1 = rec.v2 = rec.v3 = nan;
        rec.nt = rec.nx = rec.ny = nan;
        rec.fx = rec.fxx = rec.fxxx = rec.obstruction = nan;
        rec.h_norm = rec.h_max_abs = rec.shape_vs_h_dev = nan;
        try {
            rec.p = s.at(u, v);
            rec.fx = m.fx_at(rec.p);
            rec.fxx = m.fxx_at(rec.p);
            rec.fxxx = m.fxxx_at(rec.p);
            const InducedMetric ind = induced_metric(s, u, v, m);
            if (ind.degenerate) {
                rec.status = PointStatus::DegenerateMetric;
            } else {
                const SecondFundamentalData sf = second_fundamental(s, u, v, m, delta);
                rec.status = PointStatus::Ok;
                rec.lambda = sf.lambda;
                rec.rho = sf.rho;
                rec.v1 = sf.normal.v1();
                rec.v2 = sf.normal.v2();
                rec.v3 = sf.normal.v3();
                rec.nt = sf.normal.coord.at;
                rec.nx = sf.normal.coord.ax;
                rec.ny = sf.normal.coord.ay;
                const double w = rec.v2 - rec.v3;
                rec.obstruction = rec.v3 * w * w * rec.fxxx;
                rec.h_norm = frobenius2(sf.h);
                rec.h_max_abs = max_abs2(sf.h);
                rec.shape_vs_h_dev = sf.shape_vs_h_dev;
            }
        } catch (const GeometryError& e) {
            const std::string what = e.what();
            if (what.find("lightlike") != std::string::npos)
                rec.status = PointStatus::LightlikeNormal;
            else if (what.find("incompatible") != std::string::npos)
                rec.status = PointStatus::DeltaMismatch;
            else
                rec.status = PointStatus::DegenerateMetric;
        } catch (const Error&) {
            rec.status = PointStatus::EvalFailure;
        }
        out.points[i] = rec;
    });

    bool first_ok = true;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
        const auto& rec = out.points[i];
        if (rec.status != PointStatus::Ok) {
            ++out.n_degenerate;
            continue;
        }
        ++out.n_ok;
        if (rec.rho >= out.max_rho) {
            out.max_rho = rec.rho;
            out.witness_index = static_cast<int>(i);
        }
        out.max_abs_lambda = std::max(out.max_abs_lambda, std::abs(rec.lambda));
        if (first_ok) {
            out.lambda_min = out.lambda_max = rec.lambda;
            first_ok = false;
        } else {
            out.lambda_min = std::min(out.lambda_min, rec.lambda);
            out.lambda_max = std::max(out.lambda_max, rec.lambda);
        }
        out.max_shape_vs_h_dev = std::max(out.max_shape_vs_h_dev, rec.shape_vs_h_dev);
        out.max_abs_h = std::max(out.max_abs_h, rec.h_max_abs);
    }
    if (out.n_ok == 0)
        out.verdict = UmbilicVerdict::Degenerate;
    else if (out.max_rho <= tol)
        out.verdict = UmbilicVerdict::Umbilical;
    else
        out.verdict = UmbilicVerdict::NonUmbilical;
    return out;
}

}  // namespace walker3
