#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "walker3/surface.hpp"
#include "walker3/umbilic.hpp"
#include "walker3/walker.hpp"

// The one-parameter family of surfaces iota(u,v) = (u, x(v), v) whose profile
// solves  x''(v) - (eps/2) f_x(x(v), v) = C,  with unit normal
// V = eta d_x + sqrt(2) v2 d_t and v2(v) = -eta eps x'(v) / sqrt(2).
// The profile is integrated with classical fixed-step RK4 plus a step-halving
// error estimate, then turned into a patch through a Hermite-cubic
// interpolant matching x and x' at the nodes.
namespace walker3 {

struct OdeSolution {
    std::vector<double> v, x, xp;
    double step = 0;
    int order = 4;
    double error_estimate = 0;
    int eta = 1;
    double C = 0;
    int metric_epsilon = 1;

    double v_begin() const { return v.front(); }
    double v_end() const { return v.back(); }

    // v2(v) = -eta * eps * x'(v) / sqrt(2), exact at grid nodes by construction.
    double v2_at(std::size_t i) const { return -eta * metric_epsilon * xp[i] / kSqrt2; }
};

namespace detail {

struct Rk4State {
    double x, xp;
};

template <typename Rhs>
inline Rk4State rk4_step(const Rhs& rhs, double v, const Rk4State& s, double h) {
    const auto f = [&](double vv, const Rk4State& q) {
        return Rk4State{q.xp, rhs(vv, q.x)};
    };
    const Rk4State k1 = f(v, s);
    const Rk4State k2 = f(v + h / 2, Rk4State{s.x + h / 2 * k1.x, s.xp + h / 2 * k1.xp});
    const Rk4State k3 = f(v + h / 2, Rk4State{s.x + h / 2 * k2.x, s.xp + h / 2 * k2.xp});
    const Rk4State k4 = f(v + h, Rk4State{s.x + h * k3.x, s.xp + h * k3.xp});
    return Rk4State{s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                    s.xp + h / 6 * (k1.xp + 2 * k2.xp + 2 * k3.xp + k4.xp)};
}

template <typename Rhs>
inline std::vector<Rk4State> rk4_run(const Rhs& rhs, double v0, double h, std::size_t nsteps,
                                     Rk4State start, int substeps) {
    std::vector<Rk4State> out;
    out.reserve(nsteps + 1);
    out.push_back(start);
    Rk4State s = start;
    for (std::size_t i = 0; i < nsteps; ++i) {
        double v = v0 + static_cast<double>(i) * h;
        const double hs = h / substeps;
        for (int k = 0; k < substeps; ++k) {
            s = rk4_step(rhs, v, s, hs);
            v += hs;
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace detail

// Integrate the profile ODE on [v0, v1] with the requested nominal step. The
// returned grid holds the half-step run; the difference against the
// full-step run is the error estimate, required to stay within 1e-8 per unit
// of integrated length.
inline OdeSolution integrate_profile(const WalkerMetric& m, int eta, double C, double x0, double xp0,
                                     double v0, double v1, double step) {
    if (eta != 1 && eta != -1) throw IntegrationError("eta must be +1 or -1");
    if (!(step > 0)) throw IntegrationError("step must be positive");
    if (!(v1 > v0)) throw IntegrationError("empty integration range");

    const double eps = m.epsilon();
    const auto rhs = [&](double v, double x) {
        const std::array<double, 2> xy{x, v};
        const double fx = m.f_x().evaluate(xy);
        if (!std::isfinite(fx)) throw IntegrationError("f_x not finite along the trajectory");
        return C + eps / 2 * fx;
    };

    const std::size_t nsteps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((v1 - v0) / step - 1e-12)));
    const double h = (v1 - v0) / static_cast<double>(nsteps);

    const detail::Rk4State start{x0, xp0};
    const auto coarse = detail::rk4_run(rhs, v0, h, nsteps, start, 1);
    const auto fine = detail::rk4_run(rhs, v0, h, nsteps, start, 2);

    double est = 0;
    for (std::size_t i = 0; i <= nsteps; ++i)
        est = std::max(est, std::max(std::abs(coarse[i].x - fine[i].x),
                                     std::abs(coarse[i].xp - fine[i].xp)));

    OdeSolution sol;
    sol.step = h;
    sol.error_estimate = est;
    sol.eta = eta;
    sol.C = C;
    sol.metric_epsilon = m.epsilon();
    sol.v.resize(nsteps + 1);
    sol.x.resize(nsteps + 1);
    sol.xp.resize(nsteps + 1);
    for (std::size_t i = 0; i <= nsteps; ++i) {
        sol.v[i] = v0 + static_cast<double>(i) * h;
        sol.x[i] = fine[i].x;
        sol.xp[i] = fine[i].xp;
    }
    sol.v.back() = v1;

    if (est > 1e-8 * std::max(1.0, v1 - v0))
        throw IntegrationError("step-halving error estimate exceeds 1e-8 per unit length; shrink the step");
    return sol;
}

// Piecewise-cubic Hermite interpolant of (x, x') on a uniform grid. Matches
// values and first derivatives at the nodes; second derivatives are only
// piecewise continuous.
class HermiteSpline {
public:
    explicit HermiteSpline(std::vector<double> nodes, std::vector<double> values, std::vector<double> derivs)
        : v_(std::move(nodes)), x_(std::move(values)), xp_(std::move(derivs)) {
        if (v_.size() < 2 || v_.size() != x_.size() || v_.size() != xp_.size())
            throw GeometryError("Hermite spline needs matching node/value/derivative arrays");
    }

    static HermiteSpline from_solution(const OdeSolution& sol) {
        return HermiteSpline(sol.v, sol.x, sol.xp);
    }

    double value(double v) const { return eval<0>(v); }
    double deriv(double v) const { return eval<1>(v); }
    double second(double v) const { return eval<2>(v); }

    double begin() const { return v_.front(); }
    double end() const { return v_.back(); }

private:
    template <int Order>
    double eval(double v) const {
        const double lo = v_.front(), hi = v_.back();
        const double slack = 1e-9 * (1 + std::abs(hi - lo));
        if (v < lo - slack || v > hi + slack)
            throw GeometryError("parameter outside the integrated solution range");
        v = std::min(std::max(v, lo), hi);
        const double h = (hi - lo) / static_cast<double>(v_.size() - 1);
        std::size_t i = static_cast<std::size_t>((v - lo) / h);
        if (i >= v_.size() - 1) i = v_.size() - 2;
        const double s = (v - v_[i]) / h;
        const double x0 = x_[i], x1 = x_[i + 1];
        const double m0 = xp_[i] * h, m1 = xp_[i + 1] * h;
        if constexpr (Order == 0) {
            const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
            const double h10 = s * (1 - s) * (1 - s);
            const double h01 = s * s * (3 - 2 * s);
            const double h11 = s * s * (s - 1);
            return h00 * x0 + h10 * m0 + h01 * x1 + h11 * m1;
        } else if constexpr (Order == 1) {
            const double d00 = 6 * s * s - 6 * s;
            const double d10 = 3 * s * s - 4 * s + 1;
            const double d01 = 6 * s - 6 * s * s;
            const double d11 = 3 * s * s - 2 * s;
            return (d00 * x0 + d10 * m0 + d01 * x1 + d11 * m1) / h;
        } else {
            const double dd00 = 12 * s - 6;
            const double dd10 = 6 * s - 4;
            const double dd01 = 6 - 12 * s;
            const double dd11 = 6 * s - 2;
            return (dd00 * x0 + dd10 * m0 + dd01 * x1 + dd11 * m1) / (h * h);
        }
    }

    std::vector<double> v_, x_, xp_;
};

// Patch iota(u, v) = (u, x(v), v) over [u0,u1] x [v-range of the solution].
inline SurfacePatch build_surface(const OdeSolution& sol, double u0 = 0, double u1 = 1) {
    const auto spline = std::make_shared<HermiteSpline>(HermiteSpline::from_solution(sol));
    PatchComponent t{[](double u, double) { return u; },
                     [](double, double) { return 1.0; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; }};
    PatchComponent x{[spline](double, double v) { return spline->value(v); },
                     [](double, double) { return 0.0; },
                     [spline](double, double v) { return spline->deriv(v); },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; },
                     [spline](double, double v) { return spline->second(v); }};
    PatchComponent y{[](double, double v) { return v; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 1.0; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; },
                     [](double, double) { return 0.0; }};
    return SurfacePatch(std::move(t), std::move(x), std::move(y),
                        Rect2{u0, u1, sol.v_begin(), sol.v_end()},
                        {"u", "<ode interpolant>", "v"});
}

// Quadratic perturbation x(v) -> x(v) + c v^2, applied consistently to values
// and derivatives; used as a negative control (the result is no longer a
// solution of the profile ODE for c != 0).
inline OdeSolution perturb_quadratic(OdeSolution sol, double c) {
    for (std::size_t i = 0; i < sol.v.size(); ++i) {
        sol.x[i] += c * sol.v[i] * sol.v[i];
        sol.xp[i] += 2 * c * sol.v[i];
    }
    return sol;
}

// Residual of the profile ODE for the interpolant, probed at interval
// midpoints (the Hermite second derivative is only C^0 there).
inline double interpolant_ode_residual(const WalkerMetric& m, const OdeSolution& sol) {
    const HermiteSpline spline = HermiteSpline::from_solution(sol);
    const double eps = m.epsilon();
    double worst = 0;
    for (std::size_t i = 0; i + 1 < sol.v.size(); ++i) {
        const double v = (sol.v[i] + sol.v[i + 1]) / 2;
        const std::array<double, 2> xy{spline.value(v), v};
        const double r = spline.second(v) - eps / 2 * m.f_x().evaluate(xy) - sol.C;
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

struct ParallelFamilyReport {
    UmbilicScanResult scan;
    bool delta_compatible = true;
    bool normal_ok = false;
    bool rho_ok = false;
    bool lambda_constant_ok = false;
    bool v2_equals_v3_ok = false;
    double normal_max_dev = 0;
    double lambda_spread = 0;
    double v2_v3_max_dev = 0;
    double max_abs_h = 0;
    bool h_flagged = false;  // reported, never a hard failure
    double interpolant_residual = 0;
    int witness_index = -1;

    bool passed() const {
        return delta_compatible && normal_ok && rho_ok && lambda_constant_ok && v2_equals_v3_ok;
    }
};

// Scan the built patch and check the family's defining properties: the
// computed normal matches eta d_x + sqrt(2) v2 d_t up to sign, the umbilic
// residual vanishes, lambda is constant, and v2 = v3. The largest |h| entry
// is reported against the totally-geodesic expectation but does not gate.
inline ParallelFamilyReport verify_parallel_family(const WalkerMetric& m, const OdeSolution& sol,
                                                   int delta, double u0, double u1, int nu, int nv,
                                                   double tol) {
    ParallelFamilyReport rep;
    const SurfacePatch patch = build_surface(sol, u0, u1);
    const GridSpec2 grid{Rect2{u0, u1, sol.v_begin(), sol.v_end()}, nu, nv};
    rep.scan = umbilic_scan(patch, m, delta, grid, tol);
    rep.interpolant_residual = interpolant_ode_residual(m, sol);

    // the family's normal satisfies <V,V> = eps, so delta must equal eps
    rep.delta_compatible = delta == m.epsilon();
    int mismatches = 0;
    for (const auto& r : rep.scan.points)
        if (r.status == PointStatus::DeltaMismatch) ++mismatches;
    if (mismatches > 0) rep.delta_compatible = false;
    if (!rep.delta_compatible) return rep;

    const HermiteSpline spline = HermiteSpline::from_solution(sol);
    double normal_dev = 0, w_dev = 0;
    int witness = -1;
    for (std::size_t i = 0; i < rep.scan.points.size(); ++i) {
        const auto& r = rep.scan.points[i];
        if (r.status != PointStatus::Ok) continue;
        const double xp = spline.deriv(r.v);
        const double v2 = -sol.eta * m.epsilon() * xp / kSqrt2;
        const double et = kSqrt2 * v2;         // expected d_t component
        const double ex = static_cast<double>(sol.eta);  // expected d_x component
        // sign alignment: match the d_x component's sign
        const double sign = (r.nx * ex < 0) ? -1.0 : 1.0;
        const double dev = std::max({std::abs(sign * r.nt - et), std::abs(sign * r.nx - ex),
                                     std::abs(sign * r.ny - 0.0)});
        if (dev > normal_dev) {
            normal_dev = dev;
            witness = static_cast<int>(i);
        }
        w_dev = std::max(w_dev, std::abs(r.v2 - r.v3));
    }
    rep.normal_max_dev = normal_dev;
    rep.v2_v3_max_dev = w_dev;
    rep.lambda_spread = rep.scan.lambda_max - rep.scan.lambda_min;
    rep.max_abs_h = rep.scan.max_abs_h;

    rep.normal_ok = rep.scan.n_ok > 0 && normal_dev <= tol;
    rep.rho_ok = rep.scan.verdict == UmbilicVerdict::Umbilical;
    rep.lambda_constant_ok = rep.scan.n_ok > 0 && rep.lambda_spread <= tol;
    rep.v2_equals_v3_ok = rep.scan.n_ok > 0 && w_dev <= tol;
    rep.h_flagged = rep.max_abs_h > tol;
    rep.witness_index = rep.rho_ok ? witness : rep.scan.witness_index;
    return rep;
}

}  // namespace walker3
