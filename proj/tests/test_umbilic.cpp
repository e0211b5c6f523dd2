#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "walker3/parallel.hpp"
#include "walker3/rng.hpp"
#include "walker3/umbilic.hpp"

using namespace walker3;

namespace {

const std::vector<const char*> kCorpus{"x^2*y", "exp(x)*sin(y) + x^3*y", "x^3", "3*x + y^2", "5"};

AdmissibleState state(Point p, double v1, double v2, double v3, int delta, double lambda) {
    AdmissibleState st;
    st.p = p;
    st.v1 = v1;
    st.v2 = v2;
    st.v3 = v3;
    st.delta = delta;
    st.lambda = lambda;
    return st;
}

}  // namespace

TEST_CASE("umbilic frame and its change-of-basis matrix", "[umbilic]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    AdmissibleSampler sampler(1, 1, Box3{}, 555);
    for (int i = 0; i < 200; ++i) {
        const auto st = sampler.next();
        const auto uf = umbilic_frame(m, st);
        // T1 and T2 are orthogonal to V by construction
        const Vec3 vn{st.v1, st.v2, st.v3};
        REQUIRE(std::abs(frame_inner(1, uf.T1.components(), vn)) < 1e-12);
        REQUIRE(std::abs(frame_inner(1, uf.T2.components(), vn)) < 1e-12);
        // det M = eps * delta * v1
        REQUIRE(uf.detM == Catch::Approx(st.v1 * st.delta).margin(1e-10));
    }
}

TEST_CASE("grad lambda closed forms", "[umbilic]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");

    SECTION("hand-substituted triple") {
        const Point p{0, 1, 2};  // f_xx = 4
        const auto g = grad_lambda_frame(m, state(p, 2, 1, 2, 1, 0));
        CHECK(g[0] == 2.0);
        CHECK(g[1] == 2.0);
        CHECK(g[2] == -3.0);
    }
    SECTION("vanishes exactly when v2 = v3") {
        const Point p{0, 1, 2};
        const auto g = grad_lambda_frame(m, state(p, 1, 0.8, 0.8, 1, 0.5));
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
        CHECK(g[2] == 0.0);
    }
    SECTION("vanishes exactly when f_xx = 0") {
        const auto flat = WalkerMetric::from_source(1, "3*x + y^2");
        AdmissibleSampler sampler(1, -1, Box3{}, 42);
        for (int i = 0; i < 50; ++i) {
            const auto g = grad_lambda_frame(flat, sampler.next());
            REQUIRE(g[0] == 0.0);
            REQUIRE(g[1] == 0.0);
            REQUIRE(g[2] == 0.0);
        }
    }
    SECTION("rejects inadmissible states") {
        CHECK_THROWS_AS(grad_lambda_frame(m, state(Point{}, 1, 1, 1, -1, 0)), GeometryError);
    }
}

TEST_CASE("curvature-gradient identity holds on random states", "[umbilic]") {
    for (const char* src : kCorpus)
        for (int eps : {1, -1})
            for (int delta : {1, -1}) {
                const auto m = WalkerMetric::from_source(eps, src);
                AdmissibleSampler sampler(eps, delta, Box3{}, 1000 + eps + delta, 0.1);
                for (int i = 0; i < 200; ++i) {
                    REQUIRE(lemma_curvature_gradient_residual(m, sampler.next()) < 1e-9);
                }
            }
}

TEST_CASE("curvature-gradient identity degenerate branches", "[umbilic]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    SECTION("v2 = v3 makes both sides vanish") {
        const auto st = state(Point{0, 1, 2}, 1, 0.6, 0.6, 1, 0.3);
        CHECK(lemma_curvature_gradient_residual(m, st) < 1e-12);
    }
    SECTION("flat points make both sides vanish") {
        const auto st = state(Point{0, 1, 0}, 2, 1, 2, 1, 0.3);  // f_xx = 2y = 0
        CHECK(lemma_curvature_gradient_residual(m, st) < 1e-12);
    }
    SECTION("v1 = 0 is rejected") {
        CHECK_THROWS_AS(lemma_curvature_gradient_residual(m, state(Point{}, 0, std::sqrt(2.0), 1, 1, 0)),
                        GeometryError);
    }
}

TEST_CASE("tangential projection", "[umbilic]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    const Point p{0.3, 0.4, 0.5};

    SECTION("kills the normal") {
        const auto st = state(p, 2, 1, 2, 1, 0);
        const auto r = tangential_projection(m, FrameVector{2, 1, 2, p}, st);
        CHECK(std::abs(r.a1) < 1e-12);
        CHECK(std::abs(r.a2) < 1e-12);
        CHECK(std::abs(r.a3) < 1e-12);
    }
    SECTION("fixes vectors already tangent") {
        const auto st = state(p, 1, 0, 0, 1, 0);
        const auto r = tangential_projection(m, FrameVector{0, 1, 0, p}, st);
        CHECK(r.a1 == 0.0);
        CHECK(r.a2 == 1.0);
        CHECK(r.a3 == 0.0);
    }
    SECTION("is idempotent and satisfies the Gram identity") {
        for (int eps : {1, -1})
            for (int delta : {1, -1}) {
                const auto me = WalkerMetric::from_source(eps, "x^2*y");
                AdmissibleSampler sampler(eps, delta, Box3{}, 77, 0.0);
                for (int i = 0; i < 100; ++i) {
                    const auto st = sampler.next();
                    for (int a = 0; a < 3; ++a) {
                        Vec3 comp{};
                        comp[a] = 1;
                        const FrameVector ea{comp[0], comp[1], comp[2], st.p};
                        const auto pa = tangential_projection(me, ea, st);
                        const auto paa = tangential_projection(me, pa, st);
                        REQUIRE(std::abs(paa.a1 - pa.a1) < 1e-12);
                        REQUIRE(std::abs(paa.a2 - pa.a2) < 1e-12);
                        REQUIRE(std::abs(paa.a3 - pa.a3) < 1e-12);
                        const Vec3 vn{st.v1, st.v2, st.v3};
                        REQUIRE(std::abs(frame_inner(eps, pa.components(), vn)) < 1e-12);
                        for (int b = 0; b < 3; ++b) {
                            Vec3 cb{};
                            cb[b] = 1;
                            const auto pb = tangential_projection(me, FrameVector{cb[0], cb[1], cb[2], st.p}, st);
                            REQUIRE(std::abs(me.inner(pa, pb) - projected_gram(me, st, a, b)) < 1e-12);
                        }
                    }
                }
            }
    }
}

TEST_CASE("bracket values on the documented substitution", "[umbilic]") {
    // f = x^3 + 2 x^2 + 4 x has f_x = 4, f_xx = 4, f_xxx = 6 at x = 0
    const auto m = WalkerMetric::from_source(1, "x^3 + 2*x^2 + 4*x");
    const Point p{0, 0, 0};
    const auto st = state(p, 2, 1, 2, 1, 1);

    CHECK(lambda_bracket_connection(m, st) == Catch::Approx(-4.0).margin(1e-12));
    CHECK(lambda_bracket_direct(m, st) == Catch::Approx(-7.0).margin(1e-12));
    CHECK(umbilic_obstruction(st, m) == Catch::Approx(12.0).margin(1e-12));

    const auto rec = bracket_consistency(m, st, 1e-10);
    CHECK(rec.difference == Catch::Approx(-3.0).margin(1e-12));
    CHECK(rec.obstruction_fired);
    CHECK_FALSE(rec.internal_inconsistency);
}

TEST_CASE("bracket prefactors vanish in the degenerate directions", "[umbilic]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    const Point p{0, 1, 2};
    CHECK(lambda_bracket_connection(m, state(p, 1, 0.7, 0.7, 1, 2)) == 0.0);  // v2 = v3
    const auto flat = WalkerMetric::from_source(1, "3*x + y^2");
    CHECK(lambda_bracket_connection(flat, state(p, 2, 1, 2, 1, 2)) == 0.0);  // f_xx = 0
    // f_xxx = 0 or v3 = 0 reduce the direct value to the connection value
    CHECK(lambda_bracket_direct(m, state(p, 2, 1, 2, 1, 1)) ==
          lambda_bracket_connection(m, state(p, 2, 1, 2, 1, 1)));
    const auto cubic = WalkerMetric::from_source(1, "x^3");
    const auto v30 = state(Point{0, 1, 0}, 1, 0, 0, 1, 0.4);
    CHECK(lambda_bracket_direct(cubic, v30) == lambda_bracket_connection(cubic, v30));
}

TEST_CASE("bracket identity sweep and independent derivations", "[umbilic]") {
    for (const char* src : kCorpus)
        for (int eps : {1, -1})
            for (int delta : {1, -1}) {
                const auto m = WalkerMetric::from_source(eps, src);
                AdmissibleSampler sampler(eps, delta, Box3{}, 2024, 0.0);
                for (int i = 0; i < 200; ++i) {
                    const auto st = sampler.next();
                    const double a = lambda_bracket_connection(m, st);
                    const double b = lambda_bracket_direct(m, st);
                    const double w = st.v2 - st.v3;
                    const double closed = -(st.delta * w / 4) * (eps * st.v3 * w * m.fxxx_at(st.p));
                    REQUIRE(std::abs((b - a) - closed) < 1e-10);
                    REQUIRE(std::abs(lambda_bracket_direct_derivation(m, st) - b) < 1e-9);
                    REQUIRE(std::abs(lambda_bracket_connection_assembled(m, st) - a) < 1e-9);
                }
            }
}

TEST_CASE("obstruction examples and oddness", "[umbilic]") {
    CHECK(umbilic_obstruction(2, 1, 2, 6) == 12.0);
    CHECK(umbilic_obstruction(5, 0.3, 0.3, 6) == 0.0);
    CHECK(umbilic_obstruction(5, -1, 2, 0) == 0.0);

    Rng rng(31337);
    for (int i = 0; i < 200; ++i) {
        const double v1 = rng.uniform(-2, 2), v2 = rng.uniform(-2, 2), v3 = rng.uniform(-2, 2);
        const double fxxx = rng.uniform(-5, 5);
        REQUIRE(umbilic_obstruction(-v1, -v2, -v3, fxxx) == Catch::Approx(-umbilic_obstruction(v1, v2, v3, fxxx)).margin(1e-12));
    }
}

TEST_CASE("bracket consistency record flags", "[umbilic]") {
    SECTION("lcf ambient keeps both routes identical") {
        const auto m = WalkerMetric::from_source(1, "y*x^2 + x");
        AdmissibleSampler sampler(1, 1, Box3{}, 9);
        for (int i = 0; i < 100; ++i) {
            const auto rec = bracket_consistency(m, sampler.next(), 1e-10);
            REQUIRE(rec.difference == 0.0);
            REQUIRE_FALSE(rec.obstruction_fired);
            REQUIRE_FALSE(rec.internal_inconsistency);
        }
    }
    SECTION("cubic ambient fires the obstruction") {
        const auto m = WalkerMetric::from_source(1, "x^3");
        const auto rec = bracket_consistency(m, state(Point{0, 1, 1}, 2, 1, 2, 1, 0.5), 1e-10);
        CHECK(std::abs(rec.difference) == Catch::Approx(3.0).margin(1e-12));
        CHECK(rec.obstruction_fired);
        CHECK_FALSE(rec.internal_inconsistency);
    }
}

TEST_CASE("normal-derivative identity for v3 = 0", "[umbilic]") {
    for (const char* src : kCorpus)
        for (int eps : {1, -1})
            for (int delta : {1, -1}) {
                if (!AdmissibleSampler::feasible(eps, delta, true)) continue;
                const auto m = WalkerMetric::from_source(eps, src);
                AdmissibleSampler sampler(eps, delta, Box3{}, 451, 0.0, true);
                for (int i = 0; i < 100; ++i) {
                    REQUIRE(case_v3zero_identity(m, sampler.next()).residual() < 1e-10);
                }
            }
    const auto m = WalkerMetric::from_source(1, "x^2");
    CHECK_THROWS_AS(case_v3zero_identity(m, state(Point{}, 2, 1, 2, 1, 0)), GeometryError);
}

TEST_CASE("numeric bracket audit", "[umbilic]") {
    SECTION("profile surface in the lcf ambient: all four routes agree") {
        const auto m = WalkerMetric::from_source(1, "x^2");
        const auto sol = integrate_profile(m, 1, 0, 1, 1, 0, 1, 0.002);
        const auto patch = build_surface(sol, 0, 1);
        const auto audit = numeric_bracket_audit(patch, m, 1, 0.5, 0.5, 1e-5);
        CHECK(audit.max_pairwise_dev < 1e-4);
    }
    SECTION("totally geodesic plane in the flat ambient: everything vanishes") {
        const auto m = WalkerMetric::from_source(1, "0");
        const auto s = SurfacePatch::from_expressions("v", "u", "v", Rect2{0, 1, 0, 1});
        const auto audit = numeric_bracket_audit(s, m, -1, 0.5, 0.5, 1e-8);  // timelike normal
        CHECK(std::abs(audit.direct_fd) < 1e-8);
        CHECK(std::abs(audit.connection_fd) < 1e-8);
        CHECK(std::abs(audit.closed_connection) < 1e-8);
        CHECK(std::abs(audit.closed_direct) < 1e-8);
    }
    SECTION("non-umbilical input is rejected") {
        const auto m = WalkerMetric::from_source(1, "x^3");
        const auto s = SurfacePatch::from_expressions("u", "1 + u^2 + v^2", "v", Rect2{-0.3, 0.3, -0.3, 0.3});
        CHECK_THROWS_AS(numeric_bracket_audit(s, m, 1, 0.1, 0.1, 1e-5), GeometryError);
    }
    SECTION("a degenerate projected frame is reported, not silently used") {
        // on the x = const plane e1 is the normal, so e1^T vanishes and the
        // stencil can not span the tangent plane
        const auto m = WalkerMetric::from_source(1, "0");
        const auto s = SurfacePatch::from_expressions("u", "1/2", "v", Rect2{0, 1, 0, 1});
        try {
            numeric_bracket_audit(s, m, 1, 0.5, 0.5, 1e-8);
            FAIL("expected a degenerate-stencil error");
        } catch (const GeometryError& e) {
            CHECK(std::string(e.what()).find("stencil") != std::string::npos);
        }
    }
}

TEST_CASE("case classifier", "[umbilic]") {
    SECTION("profile family fires the parallel and lcf cases") {
        const auto m = WalkerMetric::from_source(1, "x^2");
        const auto sol = integrate_profile(m, 1, 0, 1, 1, 0, 1, 0.002);
        const auto patch = build_surface(sol, 0, 1);
        const auto cls = classify(patch, m, 1, GridSpec2{Rect2{0, 1, 0, 1}, 7, 25}, 1e-5, 1e-6);
        CHECK(cls.applicable);
        CHECK(cls.v2_eq_v3.fired);
        CHECK(cls.v2_eq_v3.subcheck_ok);
        CHECK(cls.lcf.fired);
        CHECK_FALSE(cls.v1_zero.fired);
        CHECK_FALSE(cls.inconsistent);
    }
    SECTION("x = const plane in the flat ambient fires the lcf case") {
        const auto m = WalkerMetric::from_source(1, "0");
        const auto s = SurfacePatch::from_expressions("u", "1/2", "v", Rect2{0, 1, 0, 1});
        const auto cls = classify(s, m, 1, GridSpec2{Rect2{0, 1, 0, 1}, 5, 9}, 1e-8, 1e-6);
        CHECK(cls.applicable);
        CHECK(cls.lcf.fired);  // flat ambients are conformally flat
        CHECK(cls.v3_zero.fired);
        CHECK(cls.v3_zero.subcheck_ok);  // f_x = 0
        CHECK_FALSE(cls.inconsistent);
    }
    SECTION("non-umbilical scans are not classified") {
        const auto m = WalkerMetric::from_source(1, "x^3");
        const auto s = SurfacePatch::from_expressions("u", "1 + u^2 + v^2", "v", Rect2{-0.3, 0.3, -0.3, 0.3});
        const auto cls = classify(s, m, 1, GridSpec2{Rect2{-0.3, 0.3, -0.3, 0.3}, 5, 5}, 1e-5, 1e-6);
        CHECK_FALSE(cls.applicable);
    }
    SECTION("synthetic umbilical data with v3 = 0 in a bent ambient is flagged") {
        // this combination contradicts the case analysis, so the classifier
        // must report an inconsistency rather than stay silent
        const auto m = WalkerMetric::from_source(1, "x^2");
        UmbilicScanResult scan;
        scan.verdict = UmbilicVerdict::Umbilical;
        scan.n_ok = 4;
        for (int i = 0; i < 4; ++i) {
            UmbilicPointRecord r;
            r.status = PointStatus::Ok;
            r.u = r.v = 0.1 * i;
            r.p = Point{0, 1, 0.1 * i};
            r.lambda = 0.3;        // not constant-zero but constant
            r.rho = 0;
            r.v1 = 1.0;
            r.v2 = 0.2;
            r.v3 = 0;              // case (b) condition
            r.fx = 2.0;            // but the ambient is not flat: sub-check fails
            r.fxx = 2.0;
            r.fxxx = 0.0;
            r.obstruction = 0.0;
            scan.points.push_back(r);
        }
        const auto cls = classify_records(scan, m, 1e-6);
        CHECK(cls.applicable);
        CHECK(cls.v3_zero.fired);
        CHECK_FALSE(cls.v3_zero.subcheck_ok);
        CHECK(cls.inconsistent);
        REQUIRE_FALSE(cls.flags.empty());
    }
    SECTION("near-threshold v1 values are counted as marginal") {
        const auto m = WalkerMetric::from_source(1, "x^2");
        UmbilicScanResult scan;
        scan.verdict = UmbilicVerdict::Umbilical;
        scan.n_ok = 3;
        const double v1s[] = {1e-8, 5e-6, 0.5};  // routed, marginal, ordinary
        for (double v1 : v1s) {
            UmbilicPointRecord r;
            r.status = PointStatus::Ok;
            r.p = Point{0, 1, 0};
            r.lambda = 0;
            r.rho = 0;
            r.v1 = v1;
            r.v2 = r.v3 = std::sqrt(std::max(0.0, (1 + v1 * v1) / 1.0 - 1));  // rough, unused by the counter
            r.fx = 2;
            r.fxx = 2;
            r.fxxx = 0;
            r.obstruction = 0;
            scan.points.push_back(r);
        }
        const auto cls = classify_records(scan, m, 1e-6);
        CHECK(cls.n_marginal_v1 == 1);
        CHECK_FALSE(cls.v1_zero.fired);  // not all points route to the v1 = 0 branch
    }
}

TEST_CASE("admissible sampler respects its constraints", "[umbilic]") {
    for (int eps : {1, -1})
        for (int delta : {1, -1}) {
            AdmissibleSampler sampler(eps, delta, Box3{}, 5150, 0.1);
            for (int i = 0; i < 100; ++i) {
                const auto st = sampler.next();
                REQUIRE(st.unit_residual(eps) < 1e-12);
                REQUIRE(std::abs(st.v1) >= 0.1);
            }
        }
    CHECK_FALSE(AdmissibleSampler::feasible(1, -1, true));
    CHECK_THROWS_AS(AdmissibleSampler(1, -1, Box3{}, 1, 0.0, true), GeometryError);
}
