#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "stripes/linefield.hpp"

using namespace stripes;

namespace {

std::shared_ptr<const Grid> annulus_grid(double h = 1.0 / 32) {
    Domain dom(make_tube(ClosedCurve::circle({0, 0}, 1.5), 0.5));
    return std::make_shared<Grid>(rasterize(dom, h, 1));
}

std::shared_ptr<const Grid> disc_grid(double h = 1.0 / 32) {
    Domain dom(Disc{{0, 0}, 1.0});
    return std::make_shared<Grid>(rasterize(dom, h, 1));
}

// closed cell ring at the given radius, built from a dense angular walk
std::vector<std::int32_t> cell_ring(const Grid& g, Vec2 center, double radius) {
    std::vector<std::int32_t> loop;
    int steps = 2048;
    for (int t = 0; t < steps; ++t) {
        double phi = 2 * pi * t / steps;
        Vec2 x{center.x + radius * std::cos(phi), center.y + radius * std::sin(phi)};
        int i = int(std::floor((x.x - g.origin.x) / g.h));
        int j = int(std::floor((x.y - g.origin.y) / g.h));
        std::int32_t f = g.flat(i, j);
        if (loop.empty() || loop.back() != f) loop.push_back(f);
    }
    while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
    return loop;
}

}  // namespace

TEST_CASE("angle conversions produce rank-one projections") {
    for (double theta : {0.0, 0.3, 1.234, pi / 4, pi - 0.01, 2.5}) {
        Directions d = convert(theta);
        CHECK(std::abs(d.q.norm() - 1.0) < 1e-12);
        Mat2 P = d.P;
        CHECK((P.mul(P) - P).frobenius() < 1e-12);
        CHECK(std::abs(P.b - P.c) < 1e-12);
        CHECK(std::abs(P.trace() - 1.0) < 1e-12);
    }
}

TEST_CASE("horizontal direction") {
    Directions d = convert(0.0);
    CHECK(d.P.a == Catch::Approx(1.0).margin(1e-15));
    CHECK(std::abs(d.P.b) < 1e-15);
    CHECK(std::abs(d.P.d) < 1e-15);
    CHECK(d.q.x == Catch::Approx(1.0).margin(1e-15));
    CHECK(std::abs(d.q.y) < 1e-15);
}

TEST_CASE("diagonal direction") {
    Directions d = convert(pi / 4);
    CHECK(d.P.a == Catch::Approx(0.5).margin(1e-12));
    CHECK(d.P.b == Catch::Approx(0.5).margin(1e-12));
    CHECK(d.P.c == Catch::Approx(0.5).margin(1e-12));
    CHECK(d.P.d == Catch::Approx(0.5).margin(1e-12));
    CHECK(std::abs(d.q.x) < 1e-12);
    CHECK(d.q.y == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("opposite unit vectors give the same projection") {
    Directions up = convert_m({0.0, 1.0});
    Directions down = convert_m({0.0, -1.0});
    CHECK((up.P - down.P).frobenius() < 1e-12);
    CHECK((up.q - down.q).norm() < 1e-12);
    // and q is pi-periodic in theta
    for (double theta : {0.1, 0.9, 2.2}) {
        CHECK((convert(theta).q - convert(theta + pi).q).norm() < 1e-12);
    }
}

TEST_CASE("projection validation") {
    CHECK_FALSE(validate_projection(Mat2{1, 0, 0, 1}, 1e-9).pass);  // trace 2
    CHECK_FALSE(validate_projection(Mat2{0, 0, 0, 0}, 1e-9).pass);  // rank 0
    CHECK(validate_projection(convert(1.234).P, 1e-12).pass);
    CHECK_THROWS_AS(convert_P(Mat2{1, 0, 0, 1}), NotAProjection);
    CHECK_THROWS_AS(convert_m({0.0, 0.5}), NotAProjection);
    CHECK_THROWS_AS(convert_q({0.0, 0.0}), NotAProjection);
}

TEST_CASE("field construction keeps unit q and projection identities") {
    auto grid = annulus_grid();
    ProjectionField f = target_pattern(grid, {0, 0});
    f.validate();
    for (std::size_t k = 0; k < f.q.size(); k += 17) {
        CHECK(std::abs(f.q[k].norm() - 1.0) < 1e-9);
        Mat2 P = convert_q(f.q[k]).P;
        CHECK((P.mul(P) - P).frobenius() < 1e-9);
        CHECK(std::abs(P.trace() - 1.0) < 1e-9);
    }
}

TEST_CASE("winding of a constant field vanishes") {
    auto grid = disc_grid();
    ProjectionField f = constant_field(grid, 0.37);
    auto loop = cell_ring(*grid, {0, 0}, 0.6);
    CHECK(loop_index(f, loop) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("winding of the concentric pattern is plus one") {
    auto grid = annulus_grid();
    ProjectionField f = target_pattern(grid, {0, 0});
    auto loop = cell_ring(*grid, {0, 0}, 1.5);
    CHECK(loop_index(f, loop) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("winding of the half-index pattern is one half") {
    auto grid = disc_grid();
    ProjectionField f = uturn_pattern(grid, {0, 0});
    auto loop = cell_ring(*grid, {0, 0}, 0.6);
    CHECK(loop_index(f, loop) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("lift of a constant field is constant") {
    auto grid = disc_grid();
    LiftResult res = lift(constant_field(grid, 1.1));
    REQUIRE(res.ok());
    Vec2 m0 = res.field->m[0];
    for (const Vec2& m : res.field->m) CHECK((m - m0).norm() < 1e-9);
}

TEST_CASE("lift of the concentric pattern is azimuthal up to a global sign") {
    auto grid = annulus_grid();
    LiftResult res = lift(target_pattern(grid, {0, 0}));
    REQUIRE(res.ok());
    const Grid& g = *grid;
    double flips = 0.0;
    for (std::size_t k = 0; k < res.field->m.size(); ++k) {
        Vec2 x = g.center_flat(g.interior[k]);
        double r = x.norm();
        Vec2 azim{-x.y / r, x.x / r};
        double dot = res.field->m[k].dot(azim);
        CHECK(std::abs(std::abs(dot) - 1.0) < 1e-6);
        flips += (dot < 0) ? 1.0 : 0.0;
    }
    // one global sign: all aligned or all anti-aligned
    CHECK((flips == 0.0 || flips == double(res.field->m.size())));
}

TEST_CASE("lift rejects the half-index pattern with a witness") {
    auto grid = disc_grid();
    ProjectionField f = uturn_pattern(grid, {0, 0});
    LiftResult res = lift(f);
    REQUIRE_FALSE(res.ok());
    REQUIRE(res.defect.has_value());
    CHECK(res.defect->orientable == false);
    CHECK(res.defect->index == Catch::Approx(0.5).margin(1e-9));
    REQUIRE(res.defect->loop.size() >= 4);
    // the witness loop actually encircles a half-index core: q winds once
    double w = detail::winding_of_loop(f, res.defect->loop, false);
    CHECK(std::round(w) == Catch::Approx(1.0).margin(1e-12));
}
