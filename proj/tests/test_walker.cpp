#include <catch_amalgamated.hpp>

#include <cmath>

#include "walker3/linalg.hpp"
#include "walker3/rng.hpp"
#include "walker3/walker.hpp"

using namespace walker3;

namespace {
constexpr double kS2 = 1.4142135623730950488;
}

TEST_CASE("metric components match the normal form", "[walker]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    const Point p{0, 1, 2};
    const Mat3 g = m.metric_components(p);
    const Mat3 expect{{{0, 0, 1}, {0, 1, 0}, {1, 0, 2}}};
    CHECK(max_abs_diff3(g, expect) == 0.0);

    const auto mneg = WalkerMetric::from_source(-1, "0");
    const Mat3 g2 = mneg.metric_components(Point{5, -3, 7});
    const Mat3 expect2{{{0, 0, 1}, {0, -1, 0}, {1, 0, 0}}};
    CHECK(max_abs_diff3(g2, expect2) == 0.0);

    CHECK_THROWS_AS(WalkerMetric::from_source(2, "0"), GeometryError);
    CHECK_THROWS_AS(WalkerMetric(1, ScalarExpr::parse("u", ScalarExpr::make_vars({"u", "v"}))), GeometryError);
}

TEST_CASE("inverse metric is the exact inverse", "[walker]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    const Mat3 inv = m.inverse_metric(Point{0, 1, 2});
    const Mat3 expect{{{-2, 0, 1}, {0, 1, 0}, {1, 0, 0}}};
    CHECK(max_abs_diff3(inv, expect) == 0.0);

    const auto m0 = WalkerMetric::from_source(1, "0");
    const Mat3 inv0 = m0.inverse_metric(Point{1, 2, 3});
    const Mat3 expect0{{{0, 0, 1}, {0, 1, 0}, {1, 0, 0}}};
    CHECK(max_abs_diff3(inv0, expect0) == 0.0);

    // determinant oracle: numeric det of the components must be -eps
    for (int eps : {1, -1}) {
        const auto me = WalkerMetric::from_source(eps, "exp(x)*sin(y) + x^3*y");
        Rng rng(99);
        for (int i = 0; i < 50; ++i) {
            const Point p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            CHECK(std::abs(det3(me.metric_components(p)) + eps) < 1e-12);
            CHECK(max_abs_diff3(mul3(me.metric_components(p), me.inverse_metric(p)), kIdentity3) < 1e-12);
        }
    }
}

TEST_CASE("frame specializations at f = 2 and f = -2", "[walker]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    {
        const Point p{0, 1, 2};  // f = 2
        const auto e = m.frame_at(p);
        CHECK(e[1].at == 0.0);
        CHECK(e[1].ax == 0.0);
        CHECK(e[1].ay == Catch::Approx(1 / kS2).margin(1e-15));
    }
    {
        const Point p{0, 1, -2};  // f = -2
        const auto e = m.frame_at(p);
        CHECK(e[2].at == 0.0);
        CHECK(e[2].ax == 0.0);
        CHECK(e[2].ay == Catch::Approx(-1 / kS2).margin(1e-15));
    }
}

TEST_CASE("frame is pseudo-orthonormal at random points", "[walker]") {
    for (int eps : {1, -1}) {
        const auto m = WalkerMetric::from_source(eps, "exp(x)*sin(y) + x^3*y");
        Rng rng(4242);
        for (int i = 0; i < 100; ++i) {
            const Point p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const auto e = m.frame_at(p);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    const double expect = a != b ? 0.0 : (a == 0 ? eps : a == 1 ? 1.0 : -1.0);
                    REQUIRE(std::abs(m.inner(e[a], e[b]) - expect) < 1e-12);
                }
        }
    }
}

TEST_CASE("frame/coordinate conversions invert each other", "[walker]") {
    const auto m = WalkerMetric::from_source(1, "x^2*y");
    const Point p{0.4, -1.2, 0.9};

    const CoordVector e1 = m.frame_to_coord(FrameVector{1, 0, 0, p});
    CHECK(e1.at == 0.0);
    CHECK(e1.ax == 1.0);
    CHECK(e1.ay == 0.0);

    const FrameVector dt = m.coord_to_frame(CoordVector{1, 0, 0, p});
    CHECK(dt.a1 == Catch::Approx(0.0).margin(1e-15));
    CHECK(dt.a2 == Catch::Approx(1 / kS2).margin(1e-15));
    CHECK(dt.a3 == Catch::Approx(1 / kS2).margin(1e-15));

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Point q{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const CoordVector cv{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), q};
        const CoordVector back = m.frame_to_coord(m.coord_to_frame(cv));
        REQUIRE(std::abs(back.at - cv.at) < 1e-12);
        REQUIRE(std::abs(back.ax - cv.ax) < 1e-12);
        REQUIRE(std::abs(back.ay - cv.ay) < 1e-12);
    }
}

TEST_CASE("inner products agree across representations", "[walker]") {
    const auto m = WalkerMetric::from_source(-1, "exp(x)*sin(y)");
    const Point p{0.1, 0.2, 0.3};
    const auto e = m.frame_at(p);
    CHECK(m.inner(e[1], e[2]) == Catch::Approx(0.0).margin(1e-15));

    const CoordVector dt{1, 0, 0, p};
    CHECK(m.inner(dt, dt) == 0.0);  // the parallel null direction
    const CoordVector dx{0, 1, 0, p};
    CHECK(m.inner(dt, dx) == 0.0);

    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        const Point q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const CoordVector a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), q};
        const CoordVector b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2), q};
        const double coord_ip = m.inner(a, b);
        const double frame_ip_v = m.inner(m.coord_to_frame(a), m.coord_to_frame(b));
        REQUIRE(std::abs(coord_ip - frame_ip_v) < 1e-12);
    }

    const Point other{9, 9, 9};
    CHECK_THROWS_AS(m.inner(CoordVector{1, 0, 0, p}, CoordVector{1, 0, 0, other}), GeometryError);
}
