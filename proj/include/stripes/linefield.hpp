#pragma once

// Unoriented direction fields on grids.  A direction (line through the
// origin) at angle theta is stored as the double-angle vector
// q = (cos 2θ, sin 2θ), which is continuous across the θ ↦ θ+π
// identification and therefore free of branch-cut artifacts when
// differenced.  Equivalent representations: the rank-1 orthogonal
// projection P = m⊗m = ½[[1+q₁, q₂],[q₂, 1−q₁]] and the unit vector ±m.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(NotAProjection);
STRIPES_DEFINE_ERROR(UnresolvableJump);
STRIPES_DEFINE_ERROR(FieldShapeMismatch);

// All four representations of one direction, mutually consistent.
struct Directions {
    double theta = 0.0;  // in [0, pi)
    Vec2 q;              // (cos 2theta, sin 2theta)
    Mat2 P;              // m ⊗ m
    Vec2 m;              // unit vector at angle theta (one of the two signs)
};

struct ProjectionDiagnostics {
    double idempotency = 0.0;  // ‖P² − P‖_F
    double symmetry = 0.0;     // ‖P − Pᵀ‖_F
    double trace = 0.0;        // |tr P − 1|
    bool pass = false;
};

inline ProjectionDiagnostics validate_projection(const Mat2& P, double tol) {
    ProjectionDiagnostics d;
    d.idempotency = (P.mul(P) - P).frobenius();
    Mat2 t{P.a, P.c, P.b, P.d};
    d.symmetry = (P - t).frobenius();
    d.trace = std::abs(P.trace() - 1.0);
    d.pass = d.idempotency <= tol && d.symmetry <= tol && d.trace <= tol;
    return d;
}

namespace detail {
inline Directions directions_from_theta(double theta) {
    Directions o;
    o.theta = wrap(theta, pi);
    o.q = {std::cos(2.0 * o.theta), std::sin(2.0 * o.theta)};
    o.m = {std::cos(o.theta), std::sin(o.theta)};
    o.P = {o.m.x * o.m.x, o.m.x * o.m.y, o.m.x * o.m.y, o.m.y * o.m.y};
    return o;
}
}  // namespace detail

inline Directions convert(double theta) { return detail::directions_from_theta(theta); }

inline Directions convert_q(Vec2 q) {
    double n = q.norm();
    if (n < 1e-12) throw NotAProjection("zero double-angle vector");
    return detail::directions_from_theta(0.5 * std::atan2(q.y / n, q.x / n));
}

inline Directions convert_m(Vec2 m) {
    double n = m.norm();
    if (std::abs(n - 1.0) > 1e-6) throw NotAProjection("|m| must be 1, got " + std::to_string(n));
    return detail::directions_from_theta(std::atan2(m.y, m.x));
}

inline Directions convert_P(const Mat2& P, double tol = 1e-6) {
    ProjectionDiagnostics d = validate_projection(P, tol);
    if (!d.pass)
        throw NotAProjection("matrix fails projection validation: idempotency " +
                             std::to_string(d.idempotency) + ", symmetry " +
                             std::to_string(d.symmetry) + ", trace " + std::to_string(d.trace));
    return convert_q({P.a - P.d, P.b + P.c});
}

// A direction per interior cell, stored as double-angle vectors indexed by
// the grid's interior rank.
struct ProjectionField {
    std::shared_ptr<const Grid> grid;
    std::vector<Vec2> q;

    const Grid& g() const { return *grid; }

    // enforce the unit-norm invariant (throws beyond tol)
    void validate(double tol = 1e-9) const {
        if (!grid || q.size() != grid->interior.size())
            throw FieldShapeMismatch("field size does not match grid interior");
        for (const Vec2& v : q)
            if (std::abs(v.norm() - 1.0) > tol)
                throw NotAProjection("|q| deviates from 1 by " +
                                     std::to_string(std::abs(v.norm() - 1.0)));
    }
};

struct UnitVectorField {
    std::shared_ptr<const Grid> grid;
    std::vector<Vec2> m;
};

struct DefectReport {
    std::vector<std::int32_t> loop;  // closed cell path (flat indices), ccw
    double index = 0.0;              // half-integer winding of the direction
    bool orientable = true;          // index integral <=> orientable
};

// --- constructors -----------------------------------------------------------

template <typename ThetaFn>
inline ProjectionField field_from_theta(std::shared_ptr<const Grid> grid, ThetaFn&& theta) {
    ProjectionField f;
    f.grid = std::move(grid);
    f.q.resize(f.grid->interior.size());
    for (std::size_t k = 0; k < f.q.size(); ++k) {
        double th = theta(f.grid->center_flat(f.grid->interior[k]));
        f.q[k] = {std::cos(2.0 * th), std::sin(2.0 * th)};
    }
    return f;
}

inline ProjectionField constant_field(std::shared_ptr<const Grid> grid, double theta) {
    return field_from_theta(std::move(grid), [=](Vec2) { return theta; });
}

// Concentric stripes about a center: θ = azimuth + π/2 (index +1 core).
inline ProjectionField target_pattern(std::shared_ptr<const Grid> grid, Vec2 center) {
    return field_from_theta(std::move(grid), [=](Vec2 x) {
        return std::atan2(x.y - center.y, x.x - center.x) + 0.5 * pi;
    });
}

// Half-index core: θ = azimuth/2, so q is the unit radial vector.
inline ProjectionField uturn_pattern(std::shared_ptr<const Grid> grid, Vec2 center) {
    ProjectionField f;
    f.grid = std::move(grid);
    f.q.resize(f.grid->interior.size());
    for (std::size_t k = 0; k < f.q.size(); ++k) {
        Vec2 d = f.grid->center_flat(f.grid->interior[k]) - center;
        double n = d.norm();
        f.q[k] = n > 1e-12 ? d / n : Vec2{1.0, 0.0};
    }
    return f;
}

inline ProjectionField field_from_vectors(const UnitVectorField& v) {
    ProjectionField f;
    f.grid = v.grid;
    f.q.resize(v.m.size());
    for (std::size_t k = 0; k < v.m.size(); ++k) {
        Vec2 m = v.m[k];
        f.q[k] = {m.x * m.x - m.y * m.y, 2.0 * m.x * m.y};
    }
    return f;
}

// --- winding ----------------------------------------------------------------

namespace detail {
// signed principal angle from a to b; threshold pi/2 (strict) or pi (lenient)
inline double unwrap_step(Vec2 a, Vec2 b, bool strict) {
    double dot = a.dot(b), cr = a.cross(b);
    if (strict ? (dot <= 0.0) : (dot <= 0.0 && std::abs(cr) < 1e-12))
        throw UnresolvableJump("adjacent directions too far apart to unwrap");
    return std::atan2(cr, dot);
}

inline double winding_of_loop(const ProjectionField& f, const std::vector<std::int32_t>& loop,
                              bool strict) {
    const Grid& g = f.g();
    double total = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        std::int32_t r0 = g.rank[std::size_t(loop[i])];
        std::int32_t r1 = g.rank[std::size_t(loop[(i + 1) % loop.size()])];
        if (r0 < 0 || r1 < 0) throw FieldShapeMismatch("loop leaves the interior mask");
        total += unwrap_step(f.q[std::size_t(r0)], f.q[std::size_t(r1)], strict);
    }
    return total / (2.0 * pi);  // turns of q
}
}  // namespace detail

// Winding of the direction around a closed cell path, in units of full
// turns of θ: the double-angle vector q winds 2·index times, so the result
// is an exact multiple of ½.  Adjacent q's must be within π/2.
inline double loop_index(const ProjectionField& field, const std::vector<std::int32_t>& loop) {
    double w = detail::winding_of_loop(field, loop, /*strict=*/true);
    double snapped = std::round(w);
    if (std::abs(w - snapped) > 0.05)
        throw UnresolvableJump("loop winding " + std::to_string(w) + " is not an integer");
    return snapped / 2.0;
}

// --- lifting ----------------------------------------------------------------

struct LiftResult {
    std::optional<UnitVectorField> field;  // set on success
    std::optional<DefectReport> defect;    // set when non-orientable
    bool ok() const { return field.has_value(); }
};

// Recover a continuous unit vector field m with m⊗m = P by breadth-first
// sign propagation over the 4-neighbor cell graph.  A fundamental cycle that
// forces a sign flip is returned as the non-orientability witness; its index
// is computed with lenient (principal-value) unwrapping because cells near a
// defect core may exceed the strict π/2 sampling bound.
inline LiftResult lift(const ProjectionField& field) {
    field.validate();
    const Grid& g = field.g();
    std::size_t n = field.q.size();
    std::vector<Vec2> u(n);  // representative vector at angle arg(q)/2
    for (std::size_t k = 0; k < n; ++k) {
        double th = 0.5 * std::atan2(field.q[k].y, field.q[k].x);
        u[k] = {std::cos(th), std::sin(th)};
    }
    std::vector<std::int8_t> sign(n, 0);
    std::vector<std::int32_t> parent(n, -1);
    auto neighbors = [&](std::int32_t f, std::int32_t out[4]) {
        int i = f / g.ny, j = f % g.ny, c = 0;
        if (g.in_mask(i - 1, j)) out[c++] = g.flat(i - 1, j);
        if (g.in_mask(i + 1, j)) out[c++] = g.flat(i + 1, j);
        if (g.in_mask(i, j - 1)) out[c++] = g.flat(i, j - 1);
        if (g.in_mask(i, j + 1)) out[c++] = g.flat(i, j + 1);
        return c;
    };
    auto cycle_through = [&](std::int32_t ra, std::int32_t rb) {
        // fundamental cycle: tree path a->root and b->root, trimmed above the
        // lowest common ancestor, joined by the non-tree edge (a,b)
        std::vector<std::int32_t> pa, pb;
        for (std::int32_t r = ra; r >= 0; r = parent[std::size_t(r)]) pa.push_back(r);
        for (std::int32_t r = rb; r >= 0; r = parent[std::size_t(r)]) pb.push_back(r);
        while (pa.size() > 1 && pb.size() > 1 && pa[pa.size() - 2] == pb[pb.size() - 2]) {
            pa.pop_back();
            pb.pop_back();
        }
        std::vector<std::int32_t> loop;
        for (std::int32_t r : pa) loop.push_back(g.interior[std::size_t(r)]);
        for (std::size_t i = pb.size() - 1; i-- > 0;)
            loop.push_back(g.interior[std::size_t(pb[i])]);
        // canonicalize counterclockwise by the signed area of the cell centers
        double area2 = 0.0;
        for (std::size_t i = 0; i < loop.size(); ++i) {
            Vec2 p0 = g.center_flat(loop[i]);
            Vec2 p1 = g.center_flat(loop[(i + 1) % loop.size()]);
            area2 += p0.cross(p1);
        }
        if (area2 < 0.0) std::reverse(loop.begin() + 1, loop.end());
        return loop;
    };
    for (std::size_t root = 0; root < n; ++root) {
        if (sign[root]) continue;  // next component (mask may be disconnected)
        sign[root] = 1;
        std::queue<std::int32_t> bfs;
        bfs.push(std::int32_t(root));
        while (!bfs.empty()) {
            std::int32_t rc = bfs.front();
            bfs.pop();
            std::int32_t nb[4];
            int c = neighbors(g.interior[std::size_t(rc)], nb);
            for (int t = 0; t < c; ++t) {
                std::int32_t rn = g.rank[std::size_t(nb[t])];
                double d = u[std::size_t(rc)].dot(u[std::size_t(rn)]);
                if (std::abs(d) < 1e-12)
                    throw UnresolvableJump("exactly orthogonal neighbor directions");
                std::int8_t want = std::int8_t(sign[std::size_t(rc)] * (d > 0.0 ? 1 : -1));
                if (!sign[std::size_t(rn)]) {
                    sign[std::size_t(rn)] = want;
                    parent[std::size_t(rn)] = rc;
                    bfs.push(rn);
                } else if (sign[std::size_t(rn)] != want) {
                    DefectReport rep;
                    rep.loop = cycle_through(rc, rn);
                    double w = detail::winding_of_loop(field, rep.loop, /*strict=*/false);
                    rep.index = std::round(w) / 2.0;
                    rep.orientable = false;
                    LiftResult res;
                    res.defect = rep;
                    return res;
                }
            }
        }
    }
    UnitVectorField out;
    out.grid = field.grid;
    out.m.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.m[k] = double(sign[k]) * u[k];
    LiftResult res;
    res.field = std::move(out);
    return res;
}

}  // namespace stripes
