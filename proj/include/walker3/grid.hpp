#pragma once

#include <vector>

#include "walker3/errors.hpp"

namespace walker3 {

struct Point {
    double t = 0, x = 0, y = 0;
};

// Axis-aligned box in (t,x,y). Zero-volume boxes are rejected by GridSpec3.
struct Box3 {
    double t0 = -1, t1 = 1;
    double x0 = -1, x1 = 1;
    double y0 = -1, y1 = 1;
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return out;
}

struct GridSpec3 {
    Box3 box;
    int nt = 3, nx = 11, ny = 11;

    GridSpec3() = default;
    GridSpec3(Box3 b, int nt_, int nx_, int ny_) : box(b), nt(nt_), nx(nx_), ny(ny_) {
        validate();
    }

    void validate() const {
        if (nt < 2 || nx < 2 || ny < 2)
            throw ConfigError("grid resolution must be >= 2 per axis");
        if (!(box.t1 > box.t0) || !(box.x1 > box.x0) || !(box.y1 > box.y0))
            throw ConfigError("degenerate sample box (zero volume)");
    }

    // Ordered t-major, then x, then y; deterministic.
    std::vector<Point> points() const {
        validate();
        std::vector<Point> out;
        out.reserve(static_cast<std::size_t>(nt) * nx * ny);
        const auto ts = linspace(box.t0, box.t1, nt);
        const auto xs = linspace(box.x0, box.x1, nx);
        const auto ys = linspace(box.y0, box.y1, ny);
        for (double t : ts)
            for (double x : xs)
                for (double y : ys) out.push_back(Point{t, x, y});
        return out;
    }
};

struct Rect2 {
    double u0 = 0, u1 = 1;
    double v0 = 0, v1 = 1;
};

struct GridSpec2 {
    Rect2 rect;
    int nu = 9, nv = 33;

    GridSpec2() = default;
    GridSpec2(Rect2 r, int nu_, int nv_) : rect(r), nu(nu_), nv(nv_) { validate(); }

    void validate() const {
        if (nu < 2 || nv < 2)
            throw ConfigError("grid resolution must be >= 2 per axis");
        if (!(rect.u1 > rect.u0) || !(rect.v1 > rect.v0))
            throw ConfigError("degenerate parameter rectangle");
    }

    std::vector<std::pair<double, double>> points() const {
        validate();
        std::vector<std::pair<double, double>> out;
        out.reserve(static_cast<std::size_t>(nu) * nv);
        const auto us = linspace(rect.u0, rect.u1, nu);
        const auto vs = linspace(rect.v0, rect.v1, nv);
        for (double u : us)
            for (double v : vs) out.emplace_back(u, v);
        return out;
    }
};

}  // namespace walker3
