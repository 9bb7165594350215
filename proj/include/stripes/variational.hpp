#pragma once

// Penalized residual minimization over unit double-angle fields:
//
//   J(q) = Σ_cells |P·(div P)|² h²  +  λ Σ_boundary |P n|² w
//
// minimized by projected gradient descent on the per-cell unit circle
// (step, renormalize) with a Barzilai–Borwein trial step and backtracking
// Armijo line search.  The decay of the attainable minimum under grid
// refinement is the empirical tubularity test: on tubular domains the
// objective keeps falling with h, while on domains admitting no solution it
// plateaus at an h-independent positive floor.
//
// Initialization: i.i.d. uniform directions smoothed by one Gaussian pass,
// drawn on a coarsened grid, driven toward the boundary-tangential state by
// anchored averaging sweeps, then bilinearly prolonged level by level to the
// target grid with a short healing sweep after each prolongation.  The
// coarse-to-fine cascade fixes the field's winding around holes of the
// domain before fine-scale descent, which plain single-level descent cannot
// repair once random initial data has frozen in a different topology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "linefield.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(DivergedLineSearch);

struct MinimizeParams {
    double lambda = 1.0;   // boundary penalty weight
    double step = 0.5;     // initial trial step for the line search
    int max_iters = 6000;
    double grad_tol = 1e-7;  // stop when the euclidean gradient norm falls below
    std::uint64_t seed = 1;
    // plateau detection: stop when J improves by less than stall_rtol (relative)
    // over the last stall_window accepted steps;  window 0 disables the check
    int stall_window = 0;
    double stall_rtol = 1e-4;
    // descent-clock budget: stop once the sum of accepted step sizes times h²
    // (the explicit-gradient-flow time the walk has covered) reaches this;
    // 0 disables.  Unlike an iteration cap this is comparable across spacings.
    double flow_budget = 0.0;
    // initialization cascade
    int coarse_cells = 9;     // target cells-across of the coarsest level
    int heal_steps = 80;      // anchored sweeps after each prolongation
    double coarse_sweeps = 2.0;  // coarse sweeps = this * (cells across)^2
    int threads = 1;          // rasterization of cascade levels
};

struct MinimizeReport {
    ProjectionField field;
    std::vector<double> trace;   // objective after each accepted step (J0 first)
    double objective = 0.0;      // final J
    double residual_l2 = 0.0;    // final sqrt(Σ|P div P|² h²)
    double boundary = 0.0;       // final ∮|Pn|
    int iterations = 0;
    bool converged = false;  // gradient norm reached grad_tol
    bool stalled = false;    // stopped on the plateau or flow-budget criterion
    double flow_time = 0.0;  // accumulated accepted-step flow time (Σ α·h²)
};


namespace detail {

// J and its exact tangential gradient, differentiated through the stencils.
// The grid's flat-indexed stencils are re-indexed by interior rank once in
// the constructor (with the divergence's 1/2 folded into the coefficients),
// so the descent loops touch q and grad directly.
class ResidualObjective {
  public:
    ResidualObjective(std::shared_ptr<const Grid> grid, double lambda)
        : grid_(std::move(grid)), lambda_(lambda) {
        const Grid& g = *grid_;
        if (g.defective > 0)
            throw MaskTooThin(std::to_string(g.defective) +
                              " cells lack an admissible difference stencil");
        n_ = g.interior.size();
        st_.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            CellStencil& s = st_[k];
            for (int t = 0; t < 3; ++t) {
                double cx = g.sx[k].c[t];
                s.xm[t] = cx != 0.0 ? g.rank[std::size_t(g.sx[k].idx[t])] : -1;
                s.xc[t] = 0.5 * cx;
                double cy = g.sy[k].c[t];
                s.ym[t] = cy != 0.0 ? g.rank[std::size_t(g.sy[k].idx[t])] : -1;
                s.yc[t] = 0.5 * cy;
            }
        }
        bnd_.resize(g.boundary.size());
        tangential_.resize(g.boundary.size());
        for (std::size_t b = 0; b < g.boundary.size(); ++b) {
            const Grid::BoundaryCell& bc = g.boundary[b];
            bnd_[b] = {std::size_t(g.rank[std::size_t(bc.flat)]), bc.n, bc.w};
            Vec2 t = bc.n.perp_ccw();
            tangential_[b] = {t.x * t.x - t.y * t.y, 2.0 * t.x * t.y};
        }
    }

    const Grid& grid() const { return *grid_; }
    std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
    double lambda() const { return lambda_; }
    const std::vector<Vec2>& boundary_tangential_q() const { return tangential_; }

    double value(const std::vector<Vec2>& q) const {
        const Grid& g = *grid_;
        double h2 = g.h * g.h, acc = 0.0;
        for (std::size_t k = 0; k < n_; ++k) acc += proj_apply(q[k], div_at(q, k)).norm2();
        acc *= h2;
        for (const Bnd& b : bnd_) {
            Vec2 pn = proj_apply(q[b.k], b.n);
            acc += lambda_ * pn.norm2() * b.w;
        }
        return acc;
    }

    // gradient of J in (q1,q2) per cell, projected tangentially (grad·q = 0)
    double value_and_gradient(const std::vector<Vec2>& q, std::vector<Vec2>& grad) const {
        const Grid& g = *grid_;
        double h2 = g.h * g.h;
        grad.assign(n_, Vec2{0.0, 0.0});
        double acc = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            Vec2 r = div_at(q, k);
            Vec2 v = proj_apply(q[k], r);
            acc += v.norm2();
            // local dependence of P at cell k:
            //   d|Pr|²/dq1 = r1·v1 − r2·v2,   d|Pr|²/dq2 = r1·v2 + r2·v1
            grad[k].x += h2 * (r.x * v.x - r.y * v.y);
            grad[k].y += h2 * (r.x * v.y + r.y * v.x);
            // adjoint of the divergence stencils with W = 2h²·v:
            //   dJ/dq1 += ½(Dxᵀ W1 − Dyᵀ W2),   dJ/dq2 += ½(Dyᵀ W1 + Dxᵀ W2)
            // (the ½ is folded into the stored coefficients)
            Vec2 w = (2.0 * h2) * v;
            const CellStencil& s = st_[k];
            for (int t = 0; t < 3; ++t) {
                if (s.xm[t] >= 0) {
                    Vec2& gm = grad[std::size_t(s.xm[t])];
                    gm.x += s.xc[t] * w.x;
                    gm.y += s.xc[t] * w.y;
                }
                if (s.ym[t] >= 0) {
                    Vec2& gm = grad[std::size_t(s.ym[t])];
                    gm.y += s.yc[t] * w.x;
                    gm.x -= s.yc[t] * w.y;
                }
            }
        }
        acc *= h2;
        for (const Bnd& b : bnd_) {
            Vec2 pn = proj_apply(q[b.k], b.n);
            acc += lambda_ * pn.norm2() * b.w;
            double lw = lambda_ * b.w;
            grad[b.k].x += lw * (pn.x * b.n.x - pn.y * b.n.y);
            grad[b.k].y += lw * (pn.x * b.n.y + pn.y * b.n.x);
        }
        for (std::size_t k = 0; k < n_; ++k) {
            double d = grad[k].dot(q[k]);
            grad[k] -= d * q[k];
        }
        return acc;
    }

  private:
    struct CellStencil {
        std::int32_t xm[3], ym[3];  // interior ranks, -1 marks an unused slot
        double xc[3], yc[3];        // halved stencil coefficients
    };
    struct Bnd {
        std::size_t k;  // interior rank of the boundary cell
        Vec2 n;
        double w;
    };

    static Vec2 proj_apply(const Vec2& q, const Vec2& x) {
        return {0.5 * ((1.0 + q.x) * x.x + q.y * x.y), 0.5 * (q.y * x.x + (1.0 - q.x) * x.y)};
    }
    Vec2 div_at(const std::vector<Vec2>& q, std::size_t k) const {
        const CellStencil& s = st_[k];
        double dxq1 = 0.0, dxq2 = 0.0, dyq1 = 0.0, dyq2 = 0.0;
        for (int t = 0; t < 3; ++t) {
            if (s.xm[t] >= 0) {
                const Vec2& u = q[std::size_t(s.xm[t])];
                dxq1 += s.xc[t] * u.x;
                dxq2 += s.xc[t] * u.y;
            }
            if (s.ym[t] >= 0) {
                const Vec2& u = q[std::size_t(s.ym[t])];
                dyq1 += s.yc[t] * u.x;
                dyq2 += s.yc[t] * u.y;
            }
        }
        return {dxq1 + dyq2, dxq2 - dyq1};
    }

    std::shared_ptr<const Grid> grid_;
    double lambda_;
    std::size_t n_ = 0;
    std::vector<CellStencil> st_;
    std::vector<Bnd> bnd_;
    std::vector<Vec2> tangential_;  // anchored boundary values (double angle)
};

// One mask-aware renormalized [1,2,1]⊗[1,2,1] averaging sweep; boundary
// cells are re-anchored to the tangential double angle after every sweep.
inline void anchored_sweeps(const Grid& g, const std::vector<Vec2>& anchor, std::vector<Vec2>& q,
                            int sweeps) {
    static const double k3[3] = {1.0, 2.0, 1.0};
    std::vector<Vec2> next(q.size());
    auto reanchor = [&] {
        for (std::size_t b = 0; b < g.boundary.size(); ++b)
            q[std::size_t(g.rank[std::size_t(g.boundary[b].flat)])] = anchor[b];
    };
    reanchor();
    for (int it = 0; it < sweeps; ++it) {
        for (std::size_t k = 0; k < q.size(); ++k) {
            int f = g.interior[k];
            int i = f / g.ny, j = f % g.ny;
            Vec2 acc{0.0, 0.0};
            double wsum = 0.0;
            for (int di = -1; di <= 1; ++di) {
                for (int dj = -1; dj <= 1; ++dj) {
                    if (!g.in_mask(i + di, j + dj)) continue;
                    double w = k3[di + 1] * k3[dj + 1];
                    acc += w * q[std::size_t(g.rank[std::size_t(g.flat(i + di, j + dj))])];
                    wsum += w;
                }
            }
            acc = acc / wsum;
            double n = acc.norm();
            next[k] = n > 1e-12 ? acc / n : Vec2{1.0, 0.0};
        }
        q.swap(next);
        reanchor();
    }
}

inline std::vector<Vec2> tangential_anchor(const Grid& g) {
    std::vector<Vec2> anchor(g.boundary.size());
    for (std::size_t b = 0; b < g.boundary.size(); ++b) {
        Vec2 t = g.boundary[b].n.perp_ccw();
        anchor[b] = {t.x * t.x - t.y * t.y, 2.0 * t.x * t.y};
    }
    return anchor;
}

// i.i.d. uniform directions + one Gaussian (binomial 1-2-1) smoothing pass
inline std::vector<Vec2> seeded_field(const Grid& g, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec2> q(g.interior.size());
    for (Vec2& v : q) {
        double psi = rng.uniform(0.0, 2.0 * pi);
        v = {std::cos(psi), std::sin(psi)};
    }
    std::vector<Vec2> s(q.size());
    static const double k3[3] = {1.0, 2.0, 1.0};
    for (std::size_t k = 0; k < q.size(); ++k) {
        int f = g.interior[k];
        int i = f / g.ny, j = f % g.ny;
        Vec2 acc{0.0, 0.0};
        double wsum = 0.0;
        for (int di = -1; di <= 1; ++di) {
            for (int dj = -1; dj <= 1; ++dj) {
                if (!g.in_mask(i + di, j + dj)) continue;
                double w = k3[di + 1] * k3[dj + 1];
                acc += w * q[std::size_t(g.rank[std::size_t(g.flat(i + di, j + dj))])];
                wsum += w;
            }
        }
        acc = acc / wsum;
        double n = acc.norm();
        s[k] = n > 1e-12 ? acc / n : Vec2{1.0, 0.0};
    }
    return s;
}

struct DescendOutcome {
    double objective = 0.0;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    bool stalled = false;
    double flow_time = 0.0;
};

// Projected gradient descent with BB trial steps and Armijo backtracking
// (c = 1e−4, shrink 0.5) on the per-cell unit circle; q is updated in place.
inline DescendOutcome descend(const ResidualObjective& obj, std::vector<Vec2>& q,
                              const MinimizeParams& params) {
    std::vector<Vec2> g, gprev, qprev, trial(q.size());
    double J = obj.value_and_gradient(q, g);
    DescendOutcome out;
    out.trace.push_back(J);
    double alpha = params.step;
    const double c1 = 1e-4;
    int it = 0;
    for (; it < params.max_iters; ++it) {
        double gnorm2 = 0.0;
        for (const Vec2& v : g) gnorm2 += v.norm2();
        if (std::sqrt(gnorm2) <= params.grad_tol) {
            out.converged = true;
            break;
        }
        if (!qprev.empty()) {
            double sy = 0.0, ss = 0.0;
            for (std::size_t k = 0; k < q.size(); ++k) {
                Vec2 dq = q[k] - qprev[k];
                Vec2 dg = g[k] - gprev[k];
                ss += dq.norm2();
                sy += dq.dot(dg);
            }
            if (sy > 1e-300) alpha = std::min(std::max(ss / sy, 1e-10), 1e4);
        }
        double Jn = 0.0;
        bool accepted = false;
        while (alpha >= 1e-18) {
            for (std::size_t k = 0; k < q.size(); ++k) {
                Vec2 v = q[k] - alpha * g[k];
                double n = v.norm();
                trial[k] = n > 1e-300 ? v / n : Vec2{1.0, 0.0};
            }
            Jn = obj.value(trial);
            if (Jn <= J - c1 * alpha * gnorm2) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // step underflow: a vanishing gradient means we simply converged
            if (std::sqrt(gnorm2) <= std::max(1e3 * params.grad_tol, 1e-12)) {
                out.converged = true;
                break;
            }
            throw DivergedLineSearch("line search underflow at gradient norm " +
                                     std::to_string(std::sqrt(gnorm2)));
        }
        qprev = q;
        gprev = g;
        q.swap(trial);
        J = obj.value_and_gradient(q, g);
        out.trace.push_back(J);
        out.flow_time += alpha * obj.grid().h * obj.grid().h;
        if (params.flow_budget > 0.0 && out.flow_time >= params.flow_budget) {
            out.stalled = true;
            ++it;
            break;
        }
        if (params.stall_window > 0 && out.trace.size() > std::size_t(params.stall_window)) {
            double before = out.trace[out.trace.size() - 1 - std::size_t(params.stall_window)];
            if (before - J < params.stall_rtol * before) {
                out.stalled = true;
                ++it;
                break;
            }
        }
    }
    out.iterations = it;
    out.objective = J;
    return out;
}

// Cascade initialization: seeded random data locked to the anchored state on
// the coarsest grid, then prolong / heal down to the target grid with *no*
// descent at the intermediate spacings. The healing sweeps only repair
// interpolation seams, so every target spacing inherits the same coarse
// configuration; descending at each level instead would re-anneal the state
// differently per spacing and blur comparisons across a refinement ladder.
inline ProjectionField cascade_init(const Domain& domain, std::shared_ptr<const Grid> target,
                                    const MinimizeParams& p) {
    auto [lo, hi] = domain.bbox();
    double width = hi.x - lo.x;
    double h = target->h;
    int levels = 0;
    while (width / (h * double(1 << (levels + 1))) >= double(p.coarse_cells) &&
           h * double(1 << (levels + 1)) < domain.min_feature() / 4.0)
        ++levels;
    std::vector<std::shared_ptr<const Grid>> grids(std::size_t(levels) + 1);
    grids[std::size_t(levels)] = target;
    for (int l = levels - 1; l >= 0; --l)
        grids[std::size_t(l)] = std::make_shared<Grid>(
            rasterize(domain, h * double(1 << (levels - l)), p.threads));
    const Grid& g0 = *grids[0];
    std::vector<Vec2> q = seeded_field(g0, p.seed);
    int cells0 = int(std::lround(width / g0.h));
    anchored_sweeps(g0, tangential_anchor(g0), q,
                    int(p.coarse_sweeps * double(cells0) * double(cells0)) + 200);
    for (int l = 0; l < levels; ++l) {
        const Grid& gf = *grids[std::size_t(l + 1)];
        ProjectionField coarse;
        coarse.grid = grids[std::size_t(l)];
        coarse.q = std::move(q);
        std::vector<Vec2> qf(gf.interior.size());
        for (std::size_t k = 0; k < qf.size(); ++k) {
            std::optional<Vec2> s = sample_q(coarse, gf.center_flat(gf.interior[k]));
            qf[k] = s ? *s : Vec2{1.0, 0.0};
        }
        anchored_sweeps(gf, tangential_anchor(gf), qf, p.heal_steps);
        q = std::move(qf);
    }
    ProjectionField out;
    out.grid = std::move(target);
    out.q = std::move(q);
    return out;
}

// Resample a field onto a finer grid and repair the interpolation seams with
// anchored sweeps; the configuration (defect layout) is preserved.
inline ProjectionField prolong_heal(const ProjectionField& coarse,
                                    std::shared_ptr<const Grid> fine, int heal_steps) {
    ProjectionField out;
    out.q.resize(fine->interior.size());
    for (std::size_t k = 0; k < out.q.size(); ++k) {
        std::optional<Vec2> s = sample_q(coarse, fine->center_flat(fine->interior[k]));
        out.q[k] = s ? *s : Vec2{1.0, 0.0};
    }
    anchored_sweeps(*fine, tangential_anchor(*fine), out.q, heal_steps);
    out.grid = std::move(fine);
    return out;
}

}  // namespace detail

// J(field) = Σ|P div P|² h² + λ ∮|Pn|² (boundary term weighted like the trace)
inline double objective(const ProjectionField& field, double lambda) {
    detail::ResidualObjective obj(field.grid, lambda);
    return obj.value(field.q);
}

// Exact gradient of the discrete objective, tangential to the unit circle.
inline std::vector<Vec2> gradient(const ProjectionField& field, double lambda) {
    detail::ResidualObjective obj(field.grid, lambda);
    std::vector<Vec2> g;
    obj.value_and_gradient(field.q, g);
    return g;
}

// Projected gradient descent with Barzilai–Borwein trial steps and Armijo
// backtracking (c = 1e−4, shrink 0.5).  `init` overrides the seeded cascade.
inline MinimizeReport minimize(const Domain& domain, std::shared_ptr<const Grid> grid,
                               const MinimizeParams& params,
                               std::optional<ProjectionField> init = std::nullopt) {
    detail::ResidualObjective obj(grid, params.lambda);
    ProjectionField field = init ? std::move(*init) : detail::cascade_init(domain, grid, params);
    if (field.q.size() != grid->interior.size())
        throw FieldShapeMismatch("initial field does not match the grid");
    field.grid = grid;

    detail::DescendOutcome out = detail::descend(obj, field.q, params);
    MinimizeReport rep;
    rep.trace = std::move(out.trace);
    rep.iterations = out.iterations;
    rep.converged = out.converged;
    rep.stalled = out.stalled;
    rep.flow_time = out.flow_time;
    rep.objective = out.objective;
    rep.field = std::move(field);
    ResidualReport res = residual(rep.field);
    rep.residual_l2 = res.l2;
    rep.boundary = res.trace;
    return rep;
}

struct TubularityParams {
    MinimizeParams minimize;
    int restarts = 3;               // independent seeds per h, best kept
    double obstruction_floor = 1e-3;  // absolute fallback when no reference given
    // descent budget per spacing as physical smoothing time: the iteration cap
    // at spacing h becomes round(iter_budget / h²), so every rung of a halving
    // ladder anneals its inherited state for the same flow time.  0 keeps the
    // plain minimize.max_iters cap at every spacing.
    double iter_budget = 0.0;
    // alternative budget on the measured flow clock Σ α·h² (h-independent by
    // construction); copied into minimize.flow_budget at every spacing.  0 off.
    double flow_budget = 0.0;
    // Warm-start each restart's next rung from its own minimizer on the
    // previous rung (prolonged and seam-healed).  Each restart is then one
    // configuration followed across the ladder, so the per-rung objectives
    // compare the energy of the *same* state at successive resolutions:
    // h-independent for a genuinely stuck configuration, decaying when the
    // domain admits a solution the descent keeps approaching.
    bool chain_rungs = true;
    // Iteration cap for the warm rungs: long enough to relax interpolation
    // seams, short enough not to re-anneal the inherited configuration.
    // Rung 0 is governed by minimize.max_iters / the stall plateau instead.
    int warm_iters = 3000;
};

struct TubularityReport {
    std::vector<double> hs;
    std::vector<double> objectives;  // best-of-restarts per h
    std::vector<double> ratios;      // objectives[i+1] / objectives[i]
    std::string verdict;             // tubular-consistent | obstructed | inconclusive
};

// Empirical dichotomy: minimize at each spacing of a halving ladder (best of
// `restarts` independent seeds) and classify the decay.  `reference` carries
// per-h best objectives of a known solvable domain; without it the
// obstructed verdict falls back to the absolute floor.
inline TubularityReport tubularity_test(const Domain& domain, const std::vector<double>& h_ladder,
                                        const TubularityParams& params,
                                        const std::vector<double>& reference = {}) {
    if (h_ladder.size() < 3) throw Error("tubularity ladder needs at least 3 spacings");
    for (std::size_t i = 0; i + 1 < h_ladder.size(); ++i)
        if (std::abs(h_ladder[i + 1] - 0.5 * h_ladder[i]) > 1e-12 * h_ladder[i])
            throw Error("tubularity ladder spacings must halve");
    TubularityReport rep;
    rep.hs = h_ladder;
    std::vector<ProjectionField> carried(std::size_t(params.restarts));
    for (std::size_t li = 0; li < h_ladder.size(); ++li) {
        double h = h_ladder[li];
        auto grid = std::make_shared<Grid>(rasterize(domain, h, params.minimize.threads));
        double best = 1e300;
        for (int r = 0; r < params.restarts; ++r) {
            MinimizeParams mp = params.minimize;
            mp.seed = params.minimize.seed + std::uint64_t(r);
            if (params.iter_budget > 0.0)
                mp.max_iters = int(std::lround(params.iter_budget / (h * h)));
            if (params.flow_budget > 0.0) mp.flow_budget = params.flow_budget;
            std::optional<ProjectionField> init;
            if (params.chain_rungs && li > 0) {
                init = detail::prolong_heal(carried[std::size_t(r)], grid, mp.heal_steps);
                mp.max_iters = params.warm_iters;
            }
            MinimizeReport res = minimize(domain, grid, mp, std::move(init));
            best = std::min(best, res.objective);
            if (params.chain_rungs) carried[std::size_t(r)] = std::move(res.field);
        }
        rep.objectives.push_back(best);
    }
    for (std::size_t i = 0; i + 1 < rep.objectives.size(); ++i)
        rep.ratios.push_back(rep.objectives[i + 1] / std::max(rep.objectives[i], 1e-300));
    bool decays = true, flat = true;
    for (double r : rep.ratios) {
        decays = decays && r <= 0.5;
        flat = flat && r >= 0.8 && r <= 1.2;
    }
    double final_value = rep.objectives.back();
    bool above = reference.empty() ? final_value > params.obstruction_floor
                                   : final_value > 10.0 * reference.back();
    rep.verdict = decays ? "tubular-consistent" : (flat && above ? "obstructed" : "inconclusive");
    return rep;
}

}  // namespace stripes
