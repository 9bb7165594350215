#pragma once

// Discrete differential operators on projection fields: divergence, the
// residual P·(div P), energy and L^p diagnostics, boundary trace, the exact
// tangential solution on tubular domains, and the constancy-along-kernel-line
// check.
//
// With q = (cos 2θ, sin 2θ) and P = ½[[1+q₁, q₂],[q₂, 1−q₁]]:
//   (div P)₁ = ½(∂ₓq₁ + ∂_yq₂),   (div P)₂ = ½(∂ₓq₂ − ∂_yq₁).

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"
#include "linefield.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(MaskTooThin);
STRIPES_DEFINE_ERROR(MissingNormals);
STRIPES_DEFINE_ERROR(SegmentLeavesDomain);

struct VectorGridField {
    std::shared_ptr<const Grid> grid;
    std::vector<Vec2> v;  // indexed by interior rank; zero extension outside
};

namespace detail {
// apply one axis stencil to component selector fn : rank -> double
template <typename F>
inline double apply_stencil(const Grid& g, const Grid::Stencil& st, F&& comp) {
    double acc = 0.0;
    for (int t = 0; t < 3; ++t) {
        if (st.c[t] == 0.0) continue;
        acc += st.c[t] * comp(std::size_t(g.rank[std::size_t(st.idx[t])]));
    }
    return acc;
}
}  // namespace detail

inline VectorGridField divergence(const ProjectionField& field) {
    const Grid& g = field.g();
    if (g.defective > 0)
        throw MaskTooThin(std::to_string(g.defective) +
                          " cells lack an admissible difference stencil");
    VectorGridField out;
    out.grid = field.grid;
    out.v.resize(field.q.size());
    for (std::size_t k = 0; k < field.q.size(); ++k) {
        double dxq1 = detail::apply_stencil(g, g.sx[k], [&](std::size_t r) { return field.q[r].x; });
        double dyq1 = detail::apply_stencil(g, g.sy[k], [&](std::size_t r) { return field.q[r].x; });
        double dxq2 = detail::apply_stencil(g, g.sx[k], [&](std::size_t r) { return field.q[r].y; });
        double dyq2 = detail::apply_stencil(g, g.sy[k], [&](std::size_t r) { return field.q[r].y; });
        out.v[k] = {0.5 * (dxq1 + dyq2), 0.5 * (dxq2 - dyq1)};
    }
    return out;
}

// Boundary quadrature ∮|Pn| with the exposure-corrected segment length
// h/max(|n₁|,|n₂|), which integrates arc length correctly on staircase masks.
inline double boundary_trace(const ProjectionField& field) {
    const Grid& g = field.g();
    if (g.boundary.empty()) throw MissingNormals("grid carries no boundary normals");
    double acc = 0.0;
    for (const Grid::BoundaryCell& bc : g.boundary) {
        const Vec2& q = field.q[std::size_t(g.rank[std::size_t(bc.flat)])];
        Vec2 pn{0.5 * ((1.0 + q.x) * bc.n.x + q.y * bc.n.y),
                0.5 * (q.y * bc.n.x + (1.0 - q.x) * bc.n.y)};
        acc += pn.norm() * bc.w;
    }
    return acc;
}

struct ResidualReport {
    VectorGridField residual;  // P·(div P) per cell
    double l2 = 0.0;           // sqrt(Σ |P div P|² h²)
    double linf = 0.0;
    double trace = 0.0;        // ∮ |P n|
};

inline ResidualReport residual(const ProjectionField& field) {
    const Grid& g = field.g();
    VectorGridField div = divergence(field);
    ResidualReport rep;
    rep.residual.grid = field.grid;
    rep.residual.v.resize(div.v.size());
    double sum2 = 0.0;
    for (std::size_t k = 0; k < div.v.size(); ++k) {
        const Vec2& q = field.q[k];
        const Vec2& d = div.v[k];
        Vec2 r{0.5 * ((1.0 + q.x) * d.x + q.y * d.y), 0.5 * (q.y * d.x + (1.0 - q.x) * d.y)};
        rep.residual.v[k] = r;
        sum2 += r.norm2();
        rep.linf = std::max(rep.linf, r.norm());
    }
    rep.l2 = std::sqrt(sum2 * g.h * g.h);
    rep.trace = boundary_trace(field);
    return rep;
}

// (1/8) Σ |div P|² h² — the Γ-limit density of the copolymer energies.
inline double energy_G0(const ProjectionField& field) {
    const Grid& g = field.g();
    VectorGridField div = divergence(field);
    double acc = 0.0;
    for (const Vec2& d : div.v) acc += d.norm2();
    return 0.125 * acc * g.h * g.h;
}

// Σ |div P|^p h² (the integral itself, not its p-th root).  Cells within
// `core_radius` of `core` are excluded when given; by default nothing is.
inline double lp_div_norm(const ProjectionField& field, double p,
                          std::optional<Vec2> core = std::nullopt, double core_radius = 0.0) {
    const Grid& g = field.g();
    VectorGridField div = divergence(field);
    double acc = 0.0;
    for (std::size_t k = 0; k < div.v.size(); ++k) {
        if (core && (g.center_flat(g.interior[k]) - *core).norm() < core_radius) continue;
        acc += std::pow(div.v[k].norm(), p);
    }
    return acc * g.h * g.h;
}

// Tangential exact solution on a tube: P(x) = t(s)⊗t(s) at the nearest
// curve point; q is the double angle of the tangent direction.
inline ProjectionField exact_solution(const TubularDomain& tube, std::shared_ptr<const Grid> grid) {
    ProjectionField f;
    f.grid = std::move(grid);
    f.q.resize(f.grid->interior.size());
    for (std::size_t k = 0; k < f.q.size(); ++k) {
        Vec2 x = f.grid->center_flat(f.grid->interior[k]);
        Vec2 t = tube.curve.at(nearest_curve_arclength(tube.curve, x)).tangent;
        f.q[k] = {t.x * t.x - t.y * t.y, 2.0 * t.x * t.y};
    }
    return f;
}

namespace detail {
// normalized bilinear interpolation of q restricted to mask cells; nullopt
// when the surrounding cells carry too little mask weight
inline std::optional<Vec2> sample_q(const ProjectionField& f, Vec2 x) {
    const Grid& g = f.g();
    double fx = (x.x - g.origin.x) / g.h - 0.5;
    double fy = (x.y - g.origin.y) / g.h - 0.5;
    int i0 = int(std::floor(fx)), j0 = int(std::floor(fy));
    double ax = fx - double(i0), ay = fy - double(j0);
    Vec2 acc{0.0, 0.0};
    double wsum = 0.0;
    for (int di = 0; di <= 1; ++di) {
        for (int dj = 0; dj <= 1; ++dj) {
            int i = i0 + di, j = j0 + dj;
            if (!g.in_mask(i, j)) continue;
            double w = (di ? ax : 1.0 - ax) * (dj ? ay : 1.0 - ay);
            acc += w * f.q[std::size_t(g.rank[std::size_t(g.flat(i, j))])];
            wsum += w;
        }
    }
    if (wsum < 0.25) return std::nullopt;
    acc = acc / wsum;
    double n = acc.norm();
    if (n < 1e-9) return std::nullopt;
    return acc / n;
}
}  // namespace detail

struct PropagationReport {
    double max_deviation = 0.0;  // max ‖P(y) − P(x0)‖_F along the segment
    double length = 0.0;         // total in-domain segment length sampled
    bool pass = false;
};

// A projection field solving the continuum problem is constant along the
// line through x0 in its kernel direction.  Samples P along that line,
// clipped to the mask, and reports the worst Frobenius deviation.
inline PropagationReport check_propagation(const ProjectionField& field, Vec2 x0, double tol) {
    const Grid& g = field.g();
    std::optional<Vec2> q0 = detail::sample_q(field, x0);
    if (!q0) throw SegmentLeavesDomain("x0 lies outside the field's mask");
    // kernel of P is the direction orthogonal to m, i.e. theta + pi/2;
    // its double angle is -q0, so the direction vector comes from m rotated
    Vec2 m = convert_q(*q0).m;
    Vec2 k = m.perp_ccw();
    PropagationReport rep;
    double step = 0.5 * g.h;
    for (double dir : {1.0, -1.0}) {
        for (int i = 1;; ++i) {
            Vec2 y = x0 + (dir * step * double(i)) * k;
            std::optional<Vec2> qy = detail::sample_q(field, y);
            if (!qy) break;  // segment clipped at the mask edge
            rep.max_deviation = std::max(rep.max_deviation, (*qy - *q0).norm() / std::sqrt(2.0));
            rep.length += step;
        }
    }
    rep.pass = rep.max_deviation <= tol;
    return rep;
}

}  // namespace stripes
