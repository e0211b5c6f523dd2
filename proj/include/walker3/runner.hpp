#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "walker3/connection.hpp"
#include "walker3/parallel.hpp"
#include "walker3/parallel_for.hpp"
#include "walker3/report.hpp"
#include "walker3/rng.hpp"
#include "walker3/scenario.hpp"
#include "walker3/surface.hpp"
#include "walker3/umbilic.hpp"
#include "walker3/version.hpp"

// Subcommand implementations. Each run_* fills an ordered report and returns
// exit code 0 (all enabled checks within tolerance) or 1 (some check failed;
// witnesses are in the report). Config and usage errors are thrown as
// ConfigError and mapped to exit code 2 by the CLI driver.
namespace walker3 {

struct RunOutcome {
    int exit_code = 0;
    Report report;
    std::vector<OutputFile> tables;
};

namespace detail {

inline WalkerMetric scenario_metric(const Scenario& sc) {
    return WalkerMetric::from_source(sc.metric.epsilon, sc.metric.f_source);
}

inline std::vector<Point> sample_points(const Scenario& sc, int count, std::uint64_t salt) {
    Rng rng(derive_seed(sc.analysis.seed, salt));
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(count));
    const Box3& b = sc.metric.box;
    for (int i = 0; i < count; ++i)
        pts.push_back(Point{rng.uniform(b.t0, b.t1), rng.uniform(b.x0, b.x1), rng.uniform(b.y0, b.y1)});
    return pts;
}

inline void set_point(Report& r, const char* key, const Point& p) {
    r.set(key, format_double(p.t) + " " + format_double(p.x) + " " + format_double(p.y));
}

struct CheckAggregator {
    Report* section;
    bool all_passed = true;

    void record(const char* name, double value, double tol) {
        auto& c = section->child(name);
        c.set("value", value);
        c.set("tolerance", tol);
        const bool ok = value <= tol;
        c.set("pass", ok);
        all_passed = all_passed && ok;
    }

    void record_flag(const char* name, bool ok, const std::string& detail = "") {
        auto& c = section->child(name);
        c.set("pass", ok);
        if (!detail.empty()) c.set("detail", detail);
        all_passed = all_passed && ok;
    }
};

inline SurfacePatch scenario_explicit_patch(const Scenario& sc) {
    return SurfacePatch::from_expressions(sc.surface.t_source, sc.surface.x_source, sc.surface.y_source,
                                          Rect2{sc.surface.u0, sc.surface.u1, sc.surface.v0, sc.surface.v1});
}

inline CsvTable umbilic_points_table(const UmbilicScanResult& scan) {
    CsvTable t;
    t.header = {"u", "v", "t", "x", "y", "lambda", "rho", "v1", "v2", "v3", "fx", "fxx", "fxxx", "obstruction"};
    t.rows.reserve(scan.points.size());
    for (const auto& r : scan.points) {
        t.rows.push_back({format_double(r.u), format_double(r.v), format_double(r.p.t),
                          format_double(r.p.x), format_double(r.p.y), format_double(r.lambda),
                          format_double(r.rho), format_double(r.v1), format_double(r.v2),
                          format_double(r.v3), format_double(r.fx), format_double(r.fxx),
                          format_double(r.fxxx), format_double(r.obstruction)});
    }
    return t;
}

inline void report_scan_summary(Report& r, const UmbilicScanResult& scan) {
    r.set("verdict", to_string(scan.verdict));
    r.set("points_total", scan.points.size());
    r.set("points_ok", scan.n_ok);
    r.set("points_degenerate", scan.n_degenerate);
    r.set("max_rho", scan.max_rho);
    r.set("max_abs_lambda", scan.max_abs_lambda);
    r.set("lambda_spread", scan.n_ok > 0 ? scan.lambda_max - scan.lambda_min : 0.0);
    r.set("max_abs_h", scan.max_abs_h);
    r.set("max_shape_vs_h_dev", scan.max_shape_vs_h_dev);
    if (scan.witness_index >= 0) {
        const auto& w = scan.points[static_cast<std::size_t>(scan.witness_index)];
        auto& wr = r.child("worst_rho_point");
        wr.set("u", w.u);
        wr.set("v", w.v);
        set_point(wr, "point", w.p);
        wr.set("rho", w.rho);
    }
}

inline void report_classify(Report& r, const ClassifyResult& c) {
    r.set("applicable", c.applicable);
    r.set("scan_verdict", to_string(c.scan_verdict));
    if (!c.applicable) return;
    const auto emit_case = [&](const char* name, const CaseReport& cr) {
        auto& s = r.child(name);
        s.set("fired", cr.fired);
        s.set("condition_max", cr.condition_max);
        if (!cr.subcheck_name.empty()) {
            s.set(("subcheck_" + cr.subcheck_name).c_str(), cr.subcheck_value);
            s.set("subcheck_ok", cr.subcheck_ok);
        }
    };
    emit_case("case_v1_zero", c.v1_zero);
    emit_case("case_v3_zero", c.v3_zero);
    emit_case("case_v2_eq_v3", c.v2_eq_v3);
    emit_case("case_lcf", c.lcf);
    r.set("max_abs_obstruction", c.max_abs_obstruction);
    r.set("marginal_v1_points", c.n_marginal_v1);
    r.set("any_case_fired", c.any_case_fired);
    r.set("inconsistent", c.inconsistent);
    if (!c.flags.empty()) {
        auto& f = r.child("flags");
        for (std::size_t i = 0; i < c.flags.size(); ++i) f.set(std::to_string(i).c_str(), c.flags[i]);
    }
}

}  // namespace detail

// frame-check: metric matrix, frame orthonormality, basis round-trips and the
// two-route connection comparison on the grid plus seeded random points.
inline RunOutcome run_frame_check(const Scenario& sc) {
    RunOutcome out;
    auto& section = out.report.child("frame_check");
    detail::CheckAggregator agg{&section};
    const WalkerMetric m = detail::scenario_metric(sc);

    auto points = sc.metric_grid().points();
    const auto extra = detail::sample_points(sc, 100, 0x11);
    points.insert(points.end(), extra.begin(), extra.end());
    section.set("points", points.size());

    Rng vec_rng(derive_seed(sc.analysis.seed, 0x12));
    double gram_dev = 0, det_dev = 0, inv_dev = 0, roundtrip_dev = 0, dt_null_dev = 0;
    double conn_dev = 0, compat_dev = 0, torsion_dev = 0;
    for (const Point& p : points) {
        const Mat3 g = m.metric_components(p);
        const auto frame = m.frame_at(p);
        const double eps = m.epsilon();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double expect = i != j ? 0.0 : (i == 0 ? eps : i == 1 ? 1.0 : -1.0);
                gram_dev = std::max(gram_dev, std::abs(m.inner(frame[i], frame[j]) - expect));
            }
        det_dev = std::max(det_dev, std::abs(det3(g) + eps));
        inv_dev = std::max(inv_dev, max_abs_diff3(mul3(g, m.inverse_metric(p)), kIdentity3));
        dt_null_dev = std::max({dt_null_dev, std::abs(g[0][0]), std::abs(g[0][1])});

        const CoordVector cv{vec_rng.uniform(-2, 2), vec_rng.uniform(-2, 2), vec_rng.uniform(-2, 2), p};
        const CoordVector back = m.frame_to_coord(m.coord_to_frame(cv));
        roundtrip_dev = std::max({roundtrip_dev, std::abs(back.at - cv.at), std::abs(back.ax - cv.ax),
                                  std::abs(back.ay - cv.ay)});
        const FrameVector fv{vec_rng.uniform(-2, 2), vec_rng.uniform(-2, 2), vec_rng.uniform(-2, 2), p};
        const FrameVector fback = m.coord_to_frame(m.frame_to_coord(fv));
        roundtrip_dev = std::max({roundtrip_dev, std::abs(fback.a1 - fv.a1), std::abs(fback.a2 - fv.a2),
                                  std::abs(fback.a3 - fv.a3)});

        const auto table = connection_frame(m, p);
        conn_dev = std::max(conn_dev, table_max_deviation(m, table, connection_frame_oracle(m, p)));
        compat_dev = std::max(compat_dev, metric_compatibility_residual(m, table));
        torsion_dev = std::max(torsion_dev, torsion_residual(m, p));
    }
    agg.record("frame_gram_vs_signature", gram_dev, sc.tol("exact"));
    agg.record("metric_det_plus_eps", det_dev, sc.tol("exact"));
    agg.record("inverse_product_vs_identity", inv_dev, sc.tol("exact"));
    agg.record("dt_null_and_orthogonal", dt_null_dev, sc.tol("exact"));
    agg.record("basis_roundtrip", roundtrip_dev, sc.tol("exact"));
    agg.record("connection_closed_vs_coordinate", conn_dev, sc.tol("symbolic"));
    agg.record("metric_compatibility", compat_dev, sc.tol("symbolic"));
    agg.record("torsion_free", torsion_dev, sc.tol("symbolic"));
    section.set("passed", agg.all_passed);
    out.exit_code = agg.all_passed ? 0 : 1;
    return out;
}

// curvature-check: closed-form curvature against the coordinate oracle, plus
// the tensor identities on both routes.
inline RunOutcome run_curvature_check(const Scenario& sc) {
    RunOutcome out;
    auto& section = out.report.child("curvature_check");
    detail::CheckAggregator agg{&section};
    const WalkerMetric m = detail::scenario_metric(sc);

    auto points = sc.metric_grid().points();
    const auto extra = detail::sample_points(sc, 50, 0x21);
    points.insert(points.end(), extra.begin(), extra.end());
    section.set("points", points.size());

    std::vector<double> dev(points.size()), anti(points.size()), pair(points.size()), bianchi(points.size());
    std::vector<double> closed_pair(points.size()), closed_bianchi(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const Point& p = points[i];
        const auto closed = curvature_frame(m, p);
        dev[i] = table_max_deviation(closed, curvature_frame_from_oracle(m, p));
        const auto oracle = riemann_coord_oracle(m, p);
        const auto ids = curvature_identity_residuals(oracle, m.metric_components(p));
        anti[i] = ids.antisymmetry;
        pair[i] = ids.pair_symmetry;
        bianchi[i] = ids.first_bianchi;

        // same identities on the closed table, lowered with diag(eps,1,-1)
        const std::array<double, 3> sig{static_cast<double>(m.epsilon()), 1.0, -1.0};
        const auto lower = [&](int a, int b, int c, int d) {
            return sig[d] * closed(a, b, c).components()[d];
        };
        double cp = 0, cb = 0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c)
                    for (int d = 0; d < 3; ++d) {
                        cp = std::max(cp, std::abs(lower(a, b, c, d) - lower(c, d, a, b)));
                        const Vec3 s1 = closed(a, b, c).components();
                        const Vec3 s2 = closed(b, c, a).components();
                        const Vec3 s3 = closed(c, a, b).components();
                        cb = std::max(cb, std::abs(s1[d] + s2[d] + s3[d]));
                    }
        closed_pair[i] = cp;
        closed_bianchi[i] = cb;
    });

    const auto vmax = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    agg.record("closed_vs_oracle", vmax(dev), sc.tol("fd"));
    agg.record("oracle_antisymmetry", vmax(anti), sc.tol("fd"));
    agg.record("oracle_pair_symmetry", vmax(pair), sc.tol("fd"));
    agg.record("oracle_first_bianchi", vmax(bianchi), sc.tol("fd"));
    agg.record("closed_pair_symmetry", vmax(closed_pair), sc.tol("symbolic"));
    agg.record("closed_first_bianchi", vmax(closed_bianchi), sc.tol("symbolic"));

    // zero-set bookkeeping for f_xx on the grid (reported, not gated)
    int zero_fxx = 0;
    const auto grid_pts = sc.metric_grid().points();
    for (const Point& p : grid_pts)
        if (std::abs(m.fxx_at(p)) <= sc.tol("flat")) ++zero_fxx;
    section.set("fxx_zero_points", zero_fxx);
    section.set("grid_points", grid_pts.size());

    section.set("passed", agg.all_passed);
    out.exit_code = agg.all_passed ? 0 : 1;
    return out;
}

// lcf-test: the f_xxx criterion against the Cotton-tensor oracle.
inline RunOutcome run_lcf_test(const Scenario& sc) {
    RunOutcome out;
    auto& section = out.report.child("lcf_test");
    const WalkerMetric m = detail::scenario_metric(sc);
    const auto grid = sc.metric_grid();

    const auto criterion = is_locally_conformally_flat(m, grid, sc.tol("lcf"));
    auto& cr = section.child("fxxx_criterion");
    cr.set("lcf", criterion.vanishes);
    cr.set("max_abs_fxxx", criterion.max_abs);
    detail::set_point(cr, "witness", criterion.witness);

    const auto pts = grid.points();
    std::vector<double> cotton_vals(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { cotton_vals[i] = cotton_max_abs(cotton_oracle(m, pts[i])); });
    std::size_t worst = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (cotton_vals[i] > cotton_vals[worst]) worst = i;
    auto& co = section.child("cotton_oracle");
    const bool cotton_lcf = cotton_vals[worst] <= sc.tol("cotton");
    co.set("lcf", cotton_lcf);
    co.set("max_abs_cotton", cotton_vals[worst]);
    detail::set_point(co, "witness", pts[worst]);

    const bool agree = criterion.vanishes == cotton_lcf;
    section.set("verdicts_agree", agree);
    section.set("passed", agree);

    // flatness as a side note (flat is a special case of lcf)
    const auto flat = is_flat(m, grid, sc.tol("flat"));
    auto& fl = section.child("flatness");
    fl.set("flat", flat.vanishes);
    fl.set("max_abs_fxx", flat.max_abs);
    detail::set_point(fl, "witness", flat.witness);

    CsvTable table;
    table.header = {"t", "x", "y", "fxxx", "cotton_max"};
    for (std::size_t i = 0; i < pts.size(); ++i)
        table.rows.push_back({format_double(pts[i].t), format_double(pts[i].x), format_double(pts[i].y),
                              format_double(m.fxxx_at(pts[i])), format_double(cotton_vals[i])});
    out.tables.push_back(OutputFile{"lcf_points.csv", table.to_string()});

    out.exit_code = agree ? 0 : 1;
    return out;
}

// umbilic-scan: full surface pipeline on an explicit patch (or the ode patch)
// plus the case classifier and, when possible, the bracket audit at the
// domain center.
inline RunOutcome run_umbilic_scan(const Scenario& sc) {
    if (sc.surface.kind == SurfaceKind::None)
        throw ConfigError("umbilic-scan needs a [surface] section", sc.config_path);
    RunOutcome out;
    auto& section = out.report.child("umbilic_scan");
    const WalkerMetric m = detail::scenario_metric(sc);

    SurfacePatch patch = [&] {
        if (sc.surface.kind == SurfaceKind::Explicit) return detail::scenario_explicit_patch(sc);
        OdeSolution sol = integrate_profile(m, sc.surface.eta, sc.surface.C, sc.surface.x0, sc.surface.xp0,
                                            sc.surface.v0, sc.surface.v1, sc.surface.step);
        if (sc.surface.perturb != 0) sol = perturb_quadratic(sol, sc.surface.perturb);
        return build_surface(sol, sc.surface.u0, sc.surface.u1);
    }();

    const GridSpec2 grid{Rect2{sc.surface.u0, sc.surface.u1, sc.surface.v0, sc.surface.v1},
                         sc.surface.nu, sc.surface.nv};
    const auto scan = umbilic_scan(patch, m, sc.analysis.delta, grid, sc.tol("umbilic"));
    detail::report_scan_summary(section, scan);

    const auto cls = classify_records(scan, m, sc.tol("case"));
    detail::report_classify(section.child("classification"), cls);

    auto& audit_r = section.child("bracket_audit");
    if (scan.verdict == UmbilicVerdict::Umbilical) {
        try {
            const double uc = (sc.surface.u0 + sc.surface.u1) / 2;
            const double vc = (sc.surface.v0 + sc.surface.v1) / 2;
            const auto audit = numeric_bracket_audit(patch, m, sc.analysis.delta, uc, vc, sc.tol("umbilic"));
            audit_r.set("direct_fd", audit.direct_fd);
            audit_r.set("connection_fd", audit.connection_fd);
            audit_r.set("closed_connection", audit.closed_connection);
            audit_r.set("closed_direct", audit.closed_direct);
            audit_r.set("max_pairwise_dev", audit.max_pairwise_dev);
            audit_r.set("within_tolerance", audit.max_pairwise_dev <= sc.tol("audit"));
        } catch (const Error& e) {
            audit_r.set("skipped", e.what());
        }
    } else {
        audit_r.set("skipped", "scan verdict is not umbilical");
    }

    const bool internal_ok = scan.n_ok == 0 || scan.max_shape_vs_h_dev <= sc.tol("fd");
    section.set("shape_vs_h_within_fd_tol", internal_ok);
    const bool pass = scan.verdict == UmbilicVerdict::Umbilical && !cls.inconsistent && internal_ok;
    section.set("passed", pass);

    out.tables.push_back(OutputFile{"umbilic_points.csv", detail::umbilic_points_table(scan).to_string()});
    out.exit_code = pass ? 0 : 1;
    return out;
}

// parallel-construct: integrate the profile, build the patch and verify the
// family properties.
inline RunOutcome run_parallel_construct(const Scenario& sc) {
    if (sc.surface.kind != SurfaceKind::Ode)
        throw ConfigError("parallel-construct needs an ode [surface] section", sc.config_path);
    RunOutcome out;
    auto& section = out.report.child("parallel_construct");
    const WalkerMetric m = detail::scenario_metric(sc);

    OdeSolution sol;
    try {
        sol = integrate_profile(m, sc.surface.eta, sc.surface.C, sc.surface.x0, sc.surface.xp0,
                                sc.surface.v0, sc.surface.v1, sc.surface.step);
    } catch (const IntegrationError& e) {
        section.set("integration_failed", e.what());
        section.set("passed", false);
        out.exit_code = 1;
        return out;
    }
    auto& ode_r = section.child("ode");
    ode_r.set("eta", sol.eta);
    ode_r.set("c", sol.C);
    ode_r.set("x0", sc.surface.x0);
    ode_r.set("xp0", sc.surface.xp0);
    ode_r.set("step", sol.step);
    ode_r.set("order", sol.order);
    ode_r.set("error_estimate", sol.error_estimate);
    if (sc.surface.perturb != 0) {
        sol = perturb_quadratic(sol, sc.surface.perturb);
        ode_r.set("perturb", sc.surface.perturb);
    }
    ode_r.set("interpolant_ode_residual", interpolant_ode_residual(m, sol));

    const double tol = sc.tol("parallel");
    const auto rep = verify_parallel_family(m, sol, sc.analysis.delta, sc.surface.u0, sc.surface.u1,
                                            sc.surface.nu, sc.surface.nv, tol);
    detail::report_scan_summary(section.child("scan"), rep.scan);

    auto& checks = section.child("checks");
    detail::CheckAggregator agg{&checks};
    agg.record_flag("delta_compatible", rep.delta_compatible,
                    rep.delta_compatible ? "" : "the family normal has causal character eps; request delta = eps");
    if (rep.delta_compatible) {
        agg.record("normal_matches_family_form", rep.normal_max_dev, tol);
        agg.record("umbilic_residual", rep.scan.max_rho, tol);
        agg.record("lambda_constant", rep.lambda_spread, tol);
        agg.record("v2_equals_v3", rep.v2_v3_max_dev, tol);
    }
    auto& hrep = section.child("totally_geodesic_report");
    hrep.set("max_abs_h", rep.max_abs_h);
    hrep.set("flagged_for_investigation", rep.h_flagged);

    if (!rep.passed() && rep.witness_index >= 0) {
        const auto& w = rep.scan.points[static_cast<std::size_t>(rep.witness_index)];
        auto& wr = section.child("witness");
        wr.set("u", w.u);
        wr.set("v", w.v);
        detail::set_point(wr, "point", w.p);
        wr.set("rho", w.rho);
    }

    section.set("passed", rep.passed());
    out.tables.push_back(OutputFile{"parallel_points.csv", detail::umbilic_points_table(rep.scan).to_string()});
    out.exit_code = rep.passed() ? 0 : 1;
    return out;
}

// theorem-audit: seeded sweeps of the algebraic identities on admissible
// states, for both causal characters of the normal.
inline RunOutcome run_theorem_audit(const Scenario& sc) {
    RunOutcome out;
    auto& section = out.report.child("theorem_audit");
    detail::CheckAggregator agg{&section};
    const WalkerMetric m = detail::scenario_metric(sc);
    const int trials = sc.analysis.trials;
    section.set("trials_per_delta", trials);

    double lemma_max = 0, bracket_max = 0, derivation_max = 0, assembled_max = 0;
    double v3zero_max = 0, gram_max = 0, gradl_v2v3_max = 0, odd_max = 0;
    int v3zero_states = 0, v2v3_states = 0;

    for (int delta : {1, -1}) {
        // general admissible states with v1 bounded away from zero
        {
            AdmissibleSampler sampler(m.epsilon(), delta, sc.metric.box,
                                      derive_seed(sc.analysis.seed, 0x100 + static_cast<std::uint64_t>(delta + 2)),
                                      0.1);
            std::vector<AdmissibleState> states(static_cast<std::size_t>(trials));
            for (auto& st : states) st = sampler.next();
            std::vector<double> r1(states.size()), r2(states.size()), r3(states.size()), r4(states.size()),
                r5(states.size()), r6(states.size());
            parallel_for(states.size(), [&](std::size_t i) {
                const auto& st = states[i];
                r1[i] = lemma_curvature_gradient_residual(m, st);
                const double a = lambda_bracket_connection(m, st);
                const double b = lambda_bracket_direct(m, st);
                const double w = st.v2 - st.v3;
                const double closed_diff = -(st.delta * w / 4) * (m.epsilon() * st.v3 * w * m.fxxx_at(st.p));
                r2[i] = std::abs((b - a) - closed_diff);
                r3[i] = std::abs(lambda_bracket_direct_derivation(m, st) - b);
                r4[i] = std::abs(lambda_bracket_connection_assembled(m, st) - a);
                double gm = 0;
                for (int ii = 0; ii < 3; ++ii)
                    for (int jj = 0; jj < 3; ++jj) {
                        const FrameVector ei{ii == 0 ? 1.0 : 0.0, ii == 1 ? 1.0 : 0.0, ii == 2 ? 1.0 : 0.0, st.p};
                        const FrameVector ej{jj == 0 ? 1.0 : 0.0, jj == 1 ? 1.0 : 0.0, jj == 2 ? 1.0 : 0.0, st.p};
                        const auto pi = tangential_projection(m, ei, st);
                        const auto pj = tangential_projection(m, ej, st);
                        gm = std::max(gm, std::abs(m.inner(pi, pj) - projected_gram(m, st, ii, jj)));
                    }
                r5[i] = gm;
                const double fxxx = m.fxxx_at(st.p);
                r6[i] = std::abs(umbilic_obstruction(-st.v1, -st.v2, -st.v3, fxxx) +
                                 umbilic_obstruction(st.v1, st.v2, st.v3, fxxx));
            });
            for (std::size_t i = 0; i < states.size(); ++i) {
                lemma_max = std::max(lemma_max, r1[i]);
                bracket_max = std::max(bracket_max, r2[i]);
                derivation_max = std::max(derivation_max, r3[i]);
                assembled_max = std::max(assembled_max, r4[i]);
                gram_max = std::max(gram_max, r5[i]);
                odd_max = std::max(odd_max, r6[i]);
            }
        }
        // v3 = 0 states, when the unit condition admits them
        if (AdmissibleSampler::feasible(m.epsilon(), delta, true)) {
            AdmissibleSampler sampler(m.epsilon(), delta, sc.metric.box,
                                      derive_seed(sc.analysis.seed, 0x200 + static_cast<std::uint64_t>(delta + 2)),
                                      0.0, true);
            const int n = std::max(1, trials / 2);
            std::vector<AdmissibleState> states(static_cast<std::size_t>(n));
            for (auto& st : states) st = sampler.next();
            std::vector<double> res(states.size());
            parallel_for(states.size(), [&](std::size_t i) {
                res[i] = case_v3zero_identity(m, states[i]).residual();
            });
            for (double rres : res) v3zero_max = std::max(v3zero_max, rres);
            v3zero_states += n;
        }
        // v2 = v3 states force eps*v1^2 = delta, so they exist when eps = delta
        if (m.epsilon() == delta) {
            Rng rng(derive_seed(sc.analysis.seed, 0x300 + static_cast<std::uint64_t>(delta + 2)));
            for (int i = 0; i < std::max(1, trials / 2); ++i) {
                AdmissibleState st;
                st.delta = delta;
                st.p = Point{rng.uniform(sc.metric.box.t0, sc.metric.box.t1),
                             rng.uniform(sc.metric.box.x0, sc.metric.box.x1),
                             rng.uniform(sc.metric.box.y0, sc.metric.box.y1)};
                st.v1 = rng.sign();
                st.v2 = st.v3 = rng.uniform(-2, 2);
                st.lambda = rng.uniform(-2, 2);
                const auto g = grad_lambda_frame(m, st);
                gradl_v2v3_max = std::max({gradl_v2v3_max, std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
                ++v2v3_states;
            }
        }
    }

    agg.record("curvature_gradient_identity", lemma_max, sc.tol("lemma"));
    agg.record("bracket_difference_closed_form", bracket_max, sc.tol("bracket"));
    agg.record("direct_route_derivation_vs_closed", derivation_max, sc.tol("symbolic"));
    agg.record("connection_route_assembly_vs_closed", assembled_max, sc.tol("symbolic"));
    agg.record("projection_gram_identity", gram_max, sc.tol("exact"));
    agg.record("obstruction_oddness", odd_max, sc.tol("exact"));
    if (v3zero_states > 0) {
        section.set("v3zero_states", v3zero_states);
        agg.record("v3zero_normal_derivative_identity", v3zero_max, sc.tol("bracket"));
    } else {
        section.set("v3zero_states", "none feasible for this (epsilon, delta)");
    }
    if (v2v3_states > 0) {
        section.set("v2_eq_v3_states", v2v3_states);
        agg.record("grad_lambda_vanishes_when_v2_eq_v3", gradl_v2v3_max, 0.0);
    }

    section.set("passed", agg.all_passed);
    out.exit_code = agg.all_passed ? 0 : 1;
    return out;
}

// all: every suite the scenario enables.
inline RunOutcome run_all(const Scenario& sc) {
    RunOutcome out;
    int exit_code = 0;
    const auto append = [&](RunOutcome&& part) {
        exit_code = std::max(exit_code, part.exit_code);
        for (auto& t : part.tables) out.tables.push_back(std::move(t));
        out.report.merge(part.report);
    };

    append(run_frame_check(sc));
    append(run_curvature_check(sc));
    append(run_lcf_test(sc));
    append(run_theorem_audit(sc));
    if (sc.surface.kind != SurfaceKind::None) append(run_umbilic_scan(sc));
    if (sc.surface.kind == SurfaceKind::Ode) append(run_parallel_construct(sc));
    out.report.set("passed", exit_code == 0);
    out.exit_code = exit_code;
    return out;
}

inline RunOutcome run_subcommand(const std::string& name, const Scenario& sc) {
    if (name == "frame-check") return run_frame_check(sc);
    if (name == "curvature-check") return run_curvature_check(sc);
    if (name == "lcf-test") return run_lcf_test(sc);
    if (name == "umbilic-scan") return run_umbilic_scan(sc);
    if (name == "parallel-construct") return run_parallel_construct(sc);
    if (name == "theorem-audit") return run_theorem_audit(sc);
    if (name == "all") return run_all(sc);
    throw ConfigError("unknown subcommand '" + name + "'");
}

// Wrap a subcommand outcome in the standard envelope and serialize it.
inline std::vector<OutputFile> render_outcome(const std::string& subcommand, const Scenario& sc,
                                              const RunOutcome& outcome) {
    Report top;
    top.set("tool", kToolName);
    top.set("version", kToolVersion);
    top.set("subcommand", subcommand);
    top.set("seed", sc.analysis.seed);
    auto& scenario_r = top.child("scenario");
    sc.echo(scenario_r);
    top.child("results") = outcome.report;
    top.set("exit_code", outcome.exit_code);

    std::vector<OutputFile> files;
    if (sc.output.format == "structured")
        files.push_back(OutputFile{subcommand + "_report.json", top.to_json().dump(2) + "\n"});
    else
        files.push_back(OutputFile{subcommand + "_report.txt", top.to_text()});
    for (const auto& t : outcome.tables) files.push_back(t);
    return files;
}

}  // namespace walker3
