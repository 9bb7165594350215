#pragma once

// Wasserstein-1 (Monge-Kantorovich) transport with Euclidean ground cost:
// exact 1D CDF formulas for line and circle geometries, a per-ray radial
// oracle for rotationally symmetric band measures, and an exact min-cost
// flow solver for general discrete measures.

#include "stripes/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace stripes {

STRIPES_DEFINE_ERROR(MassImbalance);
STRIPES_DEFINE_ERROR(MethodDomainMismatch);
STRIPES_DEFINE_ERROR(ProblemTooLarge);
STRIPES_DEFINE_ERROR(EmptyMeasure);

// One shipment of mass between a supply index and a demand index. Indices
// refer to the caller's supply/demand arrays (or grid cells, once mapped).
struct TransportPlan {
    struct Move {
        int source = 0;
        int target = 0;
        double mass = 0.0;
    };
    std::vector<Move> moves;
    double cost = 0.0;
};

// A point mass on the line.
struct Atom {
    double x = 0.0;
    double mass = 0.0;
};

// A measure on an interval with piecewise-linear density: on
// [xs[i], xs[i+1]) the density is a[i] + b[i]*x. The CDF is piecewise
// quadratic, which keeps all W1 integrals in closed form.
class Density1D {
  public:
    static Density1D piecewise_linear(std::vector<double> xs, std::vector<double> a,
                                      std::vector<double> b) {
        if (xs.size() < 2 || a.size() != xs.size() - 1 || b.size() != xs.size() - 1)
            throw EmptyMeasure("density needs at least one interval with matching coefficients");
        for (std::size_t i = 0; i + 1 < xs.size(); ++i)
            if (!(xs[i] < xs[i + 1])) throw EmptyMeasure("breakpoints must be strictly increasing");
        Density1D d;
        d.xs_ = std::move(xs);
        d.a_ = std::move(a);
        d.b_ = std::move(b);
        return d;
    }

    static Density1D piecewise_constant(std::vector<double> xs, std::vector<double> rho) {
        std::vector<double> b(rho.size(), 0.0);
        return piecewise_linear(std::move(xs), std::move(rho), std::move(b));
    }

    const std::vector<double>& breakpoints() const { return xs_; }
    double slope_coeff(std::size_t i) const { return b_[i]; }
    double offset_coeff(std::size_t i) const { return a_[i]; }

    double density(double x, std::size_t i) const { return a_[i] + b_[i] * x; }

    double lo() const { return xs_.front(); }
    double hi() const { return xs_.back(); }

    double mass() const {
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < xs_.size(); ++i) m += interval_mass(i);
        return m;
    }

    // Mass of interval i: integral of a + b*x over [xs[i], xs[i+1]].
    double interval_mass(std::size_t i) const {
        double x0 = xs_[i], x1 = xs_[i + 1];
        return a_[i] * (x1 - x0) + 0.5 * b_[i] * (x1 * x1 - x0 * x0);
    }

    Density1D scaled(double factor) const {
        Density1D d = *this;
        for (auto& v : d.a_) v *= factor;
        for (auto& v : d.b_) v *= factor;
        return d;
    }

  private:
    std::vector<double> xs_;
    std::vector<double> a_, b_;
};

namespace detail {

// Integral of |A + B t + C t^2| over [0, T], splitting at real roots.
inline double abs_quadratic_integral(double A, double B, double C, double T) {
    auto prim = [&](double t) { return A * t + 0.5 * B * t * t + C * t * t * t / 3.0; };
    auto val = [&](double t) { return A + B * t + C * t * t; };
    double roots[2];
    int nr = 0;
    if (std::abs(C) > 1e-300) {
        double disc = B * B - 4.0 * C * A;
        if (disc > 0.0) {
            double sq = std::sqrt(disc);
            // Citardauq pairing keeps both roots accurate when B dominates.
            double q = -0.5 * (B + (B >= 0.0 ? sq : -sq));
            double r0 = q / C, r1 = (std::abs(q) > 1e-300) ? A / q : r0;
            if (r0 > r1) std::swap(r0, r1);
            roots[nr++] = r0;
            roots[nr++] = r1;
        }
    } else if (std::abs(B) > 1e-300) {
        roots[nr++] = -A / B;
    }
    double cuts[4] = {0.0, T, T, T};
    int nc = 1;
    for (int k = 0; k < nr; ++k)
        if (roots[k] > 0.0 && roots[k] < T) cuts[nc++] = roots[k];
    cuts[nc++] = T;
    std::sort(cuts, cuts + nc);
    double total = 0.0;
    for (int k = 0; k + 1 < nc; ++k) {
        double t0 = cuts[k], t1 = cuts[k + 1];
        if (t1 <= t0) continue;
        double piece = prim(t1) - prim(t0);
        double sign = val(0.5 * (t0 + t1)) >= 0.0 ? 1.0 : -1.0;
        total += sign * piece;
    }
    return total;
}

// The CDF difference F_mu - F_nu on the merged breakpoint grid, as one
// quadratic piece per merged interval: on [x_k, x_{k+1}) the difference is
// A_k + B_k (x - x_k) + C_k (x - x_k)^2.
struct CdfDifference {
    std::vector<double> xs;
    std::vector<double> A, B, C;
};

inline CdfDifference cdf_difference(const Density1D& mu, const Density1D& nu) {
    const auto& xm = mu.breakpoints();
    const auto& xn = nu.breakpoints();
    std::vector<double> xs;
    xs.reserve(xm.size() + xn.size());
    std::merge(xm.begin(), xm.end(), xn.begin(), xn.end(), std::back_inserter(xs));
    xs.erase(std::unique(xs.begin(), xs.end(),
                         [](double p, double q) { return std::abs(p - q) < 1e-14; }),
             xs.end());

    CdfDifference d;
    d.xs = xs;
    double acc = 0.0;
    std::size_t im = 0, in = 0;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        double x0 = xs[k], x1 = xs[k + 1], mid = 0.5 * (x0 + x1);
        while (im + 2 < xm.size() && xm[im + 1] <= mid) ++im;
        while (in + 2 < xn.size() && xn[in + 1] <= mid) ++in;
        double am = 0.0, bm = 0.0;
        if (mid >= xm.front() && mid <= xm.back()) {
            am = mu.offset_coeff(im);
            bm = mu.slope_coeff(im);
        }
        double an = 0.0, bn = 0.0;
        if (mid >= xn.front() && mid <= xn.back()) {
            an = nu.offset_coeff(in);
            bn = nu.slope_coeff(in);
        }
        // density difference at x0 + t: (am - an) + (bm - bn)(x0 + t)
        double d0 = (am - an) + (bm - bn) * x0;
        double d1 = bm - bn;
        d.A.push_back(acc);
        d.B.push_back(d0);
        d.C.push_back(0.5 * d1);
        double T = x1 - x0;
        acc += d0 * T + 0.5 * d1 * T * T;
    }
    return d;
}

inline double integral_abs_shifted(const CdfDifference& d, double c) {
    double total = 0.0;
    for (std::size_t k = 0; k < d.A.size(); ++k)
        total += abs_quadratic_integral(d.A[k] - c, d.B[k], d.C[k], d.xs[k + 1] - d.xs[k]);
    return total;
}

}  // namespace detail

// Exact W1 between two atomic measures on the line with equal total mass:
// the integral of |F_mu - F_nu|, evaluated by one merged sweep.
inline double w1_atoms_line(std::vector<Atom> mu, std::vector<Atom> nu, double mass_tol = 1e-9) {
    if (mu.empty() || nu.empty()) throw EmptyMeasure("transport between empty measures");
    double ms = 0.0, md = 0.0;
    for (const auto& a : mu) ms += a.mass;
    for (const auto& a : nu) md += a.mass;
    double total = std::max(ms, md);
    if (total <= 0.0) throw EmptyMeasure("measures carry no mass");
    if (std::abs(ms - md) > mass_tol * total)
        throw MassImbalance("atomic measures differ in total mass");
    auto byx = [](const Atom& p, const Atom& q) { return p.x < q.x; };
    std::sort(mu.begin(), mu.end(), byx);
    std::sort(nu.begin(), nu.end(), byx);
    double cost = 0.0, delta = 0.0, prev = std::min(mu.front().x, nu.front().x);
    std::size_t i = 0, j = 0;
    while (i < mu.size() || j < nu.size()) {
        double x;
        if (j >= nu.size() || (i < mu.size() && mu[i].x <= nu[j].x)) {
            x = mu[i].x;
            cost += std::abs(delta) * (x - prev);
            delta += mu[i].mass / ms;
            ++i;
        } else {
            x = nu[j].x;
            cost += std::abs(delta) * (x - prev);
            delta -= nu[j].mass / md;
            ++j;
        }
        prev = x;
    }
    return cost * ms;
}

// Exact W1 between two density measures on the line (equal mass up to
// mass_tol relative; the demand side is rescaled to match exactly).
inline double w1_density_line(const Density1D& mu, const Density1D& nu, double mass_tol = 1e-2) {
    double ms = mu.mass(), md = nu.mass();
    if (ms <= 0.0 || md <= 0.0) throw EmptyMeasure("measures carry no mass");
    if (std::abs(ms - md) > mass_tol * std::max(ms, md))
        throw MassImbalance("density measures differ in total mass beyond tolerance");
    auto d = detail::cdf_difference(mu, nu.scaled(ms / md));
    return detail::integral_abs_shifted(d, 0.0);
}

// Exact W1 on a circle of circumference `period`: both measures live on
// [x0, x0 + period) and distance is arc length. Equals the minimum over a
// constant shift c of the line formula; the objective is convex in c, so a
// golden-section search on [min F-diff, max F-diff] is exact to rounding.
inline double w1_density_circle(const Density1D& mu, const Density1D& nu, double period,
                                double mass_tol = 1e-2) {
    double ms = mu.mass(), md = nu.mass();
    if (ms <= 0.0 || md <= 0.0) throw EmptyMeasure("measures carry no mass");
    if (std::abs(ms - md) > mass_tol * std::max(ms, md))
        throw MassImbalance("density measures differ in total mass beyond tolerance");
    if (!(period > 0.0)) throw EmptyMeasure("period must be positive");
    auto d = detail::cdf_difference(mu, nu.scaled(ms / md));
    double clo = std::numeric_limits<double>::infinity(), chi = -clo;
    for (std::size_t k = 0; k < d.A.size(); ++k) {
        double T = d.xs[k + 1] - d.xs[k];
        for (double t : {0.0, T}) {
            double v = d.A[k] + d.B[k] * t + d.C[k] * t * t;
            clo = std::min(clo, v);
            chi = std::max(chi, v);
        }
        if (std::abs(d.C[k]) > 1e-300) {
            double tv = -d.B[k] / (2.0 * d.C[k]);
            if (tv > 0.0 && tv < T) {
                double v = d.A[k] + d.B[k] * tv + d.C[k] * tv * tv;
                clo = std::min(clo, v);
                chi = std::max(chi, v);
            }
        }
    }
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = clo, b = chi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = detail::integral_abs_shifted(d, x1);
    double f2 = detail::integral_abs_shifted(d, x2);
    for (int it = 0; it < 200 && (b - a) > 1e-16 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = detail::integral_abs_shifted(d, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = detail::integral_abs_shifted(d, x2);
        }
    }
    return std::min(f1, f2);
}

// Per-ray monotone transport for rotationally symmetric band measures on a
// circle tube of centerline radius rho0 and half-width delta. `interfaces`
// holds the 2k sorted offsets r_0 < ... < r_{2k-1}; material occupies
// (r_{2i}, r_{2i+1}) and the complement inside (-delta, delta) is the
// demand. The radial measure carries the area weight rho0 + r, making the
// per-angle W1 exact; the total is 2*pi times the per-angle cost.
inline double w1_radial_circle_tube(double rho0, double delta,
                                    const std::vector<double>& interfaces) {
    if (rho0 <= 0.0 || delta <= 0.0 || delta >= rho0)
        throw MethodDomainMismatch("radial oracle needs a valid circle tube");
    if (interfaces.size() < 2 || interfaces.size() % 2 != 0)
        throw EmptyMeasure("band pattern needs an even number of interfaces");
    for (std::size_t i = 0; i + 1 < interfaces.size(); ++i)
        if (!(interfaces[i] < interfaces[i + 1]))
            throw EmptyMeasure("interfaces must be strictly increasing");
    if (interfaces.front() <= -delta || interfaces.back() >= delta)
        throw EmptyMeasure("interfaces must lie strictly inside the tube");

    std::vector<double> xs;
    xs.push_back(-delta);
    for (double r : interfaces) xs.push_back(r);
    xs.push_back(delta);
    std::vector<double> au, bu, av, bv;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        bool material = (i % 2 == 1);  // first segment (edge gap) is demand
        // weight rho0 + r  ->  a = rho0, b = 1 on the occupied side
        au.push_back(material ? rho0 : 0.0);
        bu.push_back(material ? 1.0 : 0.0);
        av.push_back(material ? 0.0 : rho0);
        bv.push_back(material ? 0.0 : 1.0);
    }
    auto mu = Density1D::piecewise_linear(xs, au, bu);
    auto nu = Density1D::piecewise_linear(xs, av, bv);
    return 2.0 * pi * w1_density_line(mu, nu);
}

// Discrete transport instance: point supplies and demands in the plane.
struct FlowProblem {
    std::vector<Vec2> supply_pos;
    std::vector<double> supply_mass;
    std::vector<Vec2> demand_pos;
    std::vector<double> demand_mass;
};

struct EuclideanCost {
    double operator()(const Vec2& a, const Vec2& b) const {
        return std::hypot(a.x - b.x, a.y - b.y);
    }
};

// Exact min-cost flow between discrete measures by successive shortest
// augmenting paths with node potentials (costs stay reducible because the
// ground metric is nonnegative). Dense bipartite graph; edge costs are
// evaluated on the fly, so memory stays linear in the node count. Demands
// are rescaled to the supply total (tolerance-checked), so the flow is
// perfectly balanced. Node count is capped: larger instances must be
// reduced (e.g. by symmetry) before calling.
template <class Cost = EuclideanCost>
inline TransportPlan mincost_flow(const FlowProblem& pb, Cost cost = Cost(),
                                  double mass_tol = 1e-2, std::size_t node_cap = 20000) {
    const std::size_t S = pb.supply_pos.size(), D = pb.demand_pos.size();
    if (S == 0 || D == 0) throw EmptyMeasure("transport between empty measures");
    if (S != pb.supply_mass.size() || D != pb.demand_mass.size())
        throw EmptyMeasure("positions and masses must have matching lengths");
    if (S + D > node_cap)
        throw ProblemTooLarge("instance exceeds the node cap; reduce by symmetry first");
    double ms = 0.0, md = 0.0;
    for (double m : pb.supply_mass) {
        if (m < 0.0) throw EmptyMeasure("negative mass");
        ms += m;
    }
    for (double m : pb.demand_mass) {
        if (m < 0.0) throw EmptyMeasure("negative mass");
        md += m;
    }
    if (ms <= 0.0 || md <= 0.0) throw EmptyMeasure("measures carry no mass");
    if (std::abs(ms - md) > mass_tol * std::max(ms, md))
        throw MassImbalance("supply and demand totals differ beyond tolerance");

    const double scale = ms / md;
    std::vector<double> rs = pb.supply_mass, rd = pb.demand_mass;
    for (auto& m : rd) m *= scale;

    // flow stored sparsely per supply: (demand index, mass)
    std::vector<std::vector<std::pair<int, double>>> flow(S);
    std::vector<double> pu(S, 0.0), pv(D, 0.0);       // potentials
    std::vector<double> du(S), dv(D);                 // Dijkstra distances
    std::vector<int> prev_s(D, -1);                   // demand's predecessor supply
    std::vector<int> prev_d(S, -1);                   // supply's predecessor demand
    std::vector<char> done_s(S), done_d(D);
    const double inf = std::numeric_limits<double>::infinity();
    const double eps_mass = 1e-15 * ms;

    double remaining = ms;
    while (remaining > eps_mass) {
        std::fill(du.begin(), du.end(), inf);
        std::fill(dv.begin(), dv.end(), inf);
        std::fill(done_s.begin(), done_s.end(), 0);
        std::fill(done_d.begin(), done_d.end(), 0);
        std::fill(prev_s.begin(), prev_s.end(), -1);
        std::fill(prev_d.begin(), prev_d.end(), -1);
        for (std::size_t i = 0; i < S; ++i)
            if (rs[i] > eps_mass) du[i] = 0.0;

        int sink = -1;
        while (true) {
            // pick the unfinished node with the smallest tentative distance
            double best = inf;
            int bi = -1;
            bool bis_supply = true;
            for (std::size_t i = 0; i < S; ++i)
                if (!done_s[i] && du[i] < best) {
                    best = du[i];
                    bi = int(i);
                    bis_supply = true;
                }
            for (std::size_t j = 0; j < D; ++j)
                if (!done_d[j] && dv[j] < best) {
                    best = dv[j];
                    bi = int(j);
                    bis_supply = false;
                }
            if (bi < 0) break;  // unreachable remainder (cannot happen on dense graph)
            if (!bis_supply && rd[std::size_t(bi)] > eps_mass) {
                sink = bi;  // nearest unsaturated demand: stop early
                break;
            }
            if (bis_supply) {
                std::size_t i = std::size_t(bi);
                done_s[i] = 1;
                for (std::size_t j = 0; j < D; ++j) {
                    if (done_d[j]) continue;
                    double rc = cost(pb.supply_pos[i], pb.demand_pos[j]) - pu[i] + pv[j];
                    if (rc < 0.0) rc = 0.0;  // guard fp drift in reduced costs
                    double nd = du[i] + rc;
                    if (nd < dv[j]) {
                        dv[j] = nd;
                        prev_s[j] = int(i);
                    }
                }
            } else {
                std::size_t j = std::size_t(bi);
                done_d[j] = 1;
                // backward edges exist where flow is positive
                for (std::size_t i = 0; i < S; ++i) {
                    if (done_s[i]) continue;
                    double f = 0.0;
                    for (const auto& e : flow[i])
                        if (e.first == int(j)) {
                            f = e.second;
                            break;
                        }
                    if (f <= eps_mass) continue;
                    double rc = -(cost(pb.supply_pos[i], pb.demand_pos[j]) - pu[i] + pv[j]);
                    if (rc < 0.0) rc = 0.0;
                    double nd = dv[j] + rc;
                    if (nd < du[i]) {
                        du[i] = nd;
                        prev_d[i] = int(j);
                    }
                }
            }
        }
        if (sink < 0) throw MassImbalance("flow could not route all mass");

        // walk the alternating path back to a source, find the bottleneck
        double bottleneck = rd[std::size_t(sink)];
        {
            int j = sink;
            while (true) {
                int i = prev_s[std::size_t(j)];
                int jp = prev_d[std::size_t(i)];
                if (jp < 0) {
                    bottleneck = std::min(bottleneck, rs[std::size_t(i)]);
                    break;
                }
                double f = 0.0;
                for (const auto& e : flow[std::size_t(i)])
                    if (e.first == jp) {
                        f = e.second;
                        break;
                    }
                bottleneck = std::min(bottleneck, f);
                j = jp;
            }
        }
        // apply the augmentation
        {
            int j = sink;
            while (true) {
                int i = prev_s[std::size_t(j)];
                auto& edges = flow[std::size_t(i)];
                bool found = false;
                for (auto& e : edges)
                    if (e.first == j) {
                        e.second += bottleneck;
                        found = true;
                        break;
                    }
                if (!found) edges.push_back({j, bottleneck});
                int jp = prev_d[std::size_t(i)];
                if (jp < 0) {
                    rs[std::size_t(i)] -= bottleneck;
                    break;
                }
                for (auto& e : edges)
                    if (e.first == jp) {
                        e.second -= bottleneck;
                        break;
                    }
                j = jp;
            }
            rd[std::size_t(sink)] -= bottleneck;
            remaining -= bottleneck;
        }
        // potential update: only nodes with finite labels participate again
        double dsink = dv[std::size_t(sink)];
        for (std::size_t i = 0; i < S; ++i)
            if (du[i] < inf) pu[i] += std::max(0.0, dsink - du[i]);
        for (std::size_t j = 0; j < D; ++j)
            if (dv[j] < inf) pv[j] += std::max(0.0, dsink - dv[j]);
    }

    TransportPlan plan;
    double total = 0.0;
    for (std::size_t i = 0; i < S; ++i)
        for (const auto& e : flow[i])
            if (e.second > eps_mass) {
                plan.moves.push_back({int(i), e.first, e.second});
                total += e.second * cost(pb.supply_pos[i], pb.demand_pos[std::size_t(e.first)]);
            }
    plan.cost = total;
    return plan;
}

// Exact min-cost flow on a distance-pruned edge set. Each supply connects
// only to demands within `radius`; after solving, the dual potentials are
// checked against every pruned edge (dual feasibility certificate). If any
// pruned edge could improve the solution, the radius doubles and the solve
// repeats, so the result is certified optimal for the full dense problem.
// Far cheaper than the dense solver when transport is short-range.
template <class Cost = EuclideanCost>
inline TransportPlan mincost_flow_pruned(const FlowProblem& pb, double radius, Cost cost = Cost(),
                                         double mass_tol = 1e-2, std::size_t node_cap = 20000,
                                         int max_rounds = 6) {
    const std::size_t S = pb.supply_pos.size(), D = pb.demand_pos.size();
    if (S == 0 || D == 0) throw EmptyMeasure("transport between empty measures");
    if (S != pb.supply_mass.size() || D != pb.demand_mass.size())
        throw EmptyMeasure("positions and masses must have matching lengths");
    if (S + D > node_cap)
        throw ProblemTooLarge("instance exceeds the node cap; reduce by symmetry first");
    double ms = 0.0, md = 0.0;
    for (double m : pb.supply_mass) ms += m;
    for (double m : pb.demand_mass) md += m;
    if (ms <= 0.0 || md <= 0.0) throw EmptyMeasure("measures carry no mass");
    if (std::abs(ms - md) > mass_tol * std::max(ms, md))
        throw MassImbalance("supply and demand totals differ beyond tolerance");
    const double scale = ms / md;
    const double eps_mass = 1e-15 * ms;
    const double inf = std::numeric_limits<double>::infinity();

    for (int round = 0; round < max_rounds; ++round, radius *= 2.0) {
        // adjacency: demands within radius of each supply, costs cached so
        // the Dijkstra inner loop is pure arithmetic
        std::vector<std::vector<std::pair<int, double>>> adj(S);
        bool connected = true;
        for (std::size_t i = 0; i < S && connected; ++i) {
            for (std::size_t j = 0; j < D; ++j) {
                double c = cost(pb.supply_pos[i], pb.demand_pos[j]);
                if (c <= radius) adj[i].push_back({int(j), c});
            }
            if (adj[i].empty()) connected = false;
        }
        if (!connected) continue;

        std::vector<double> rs = pb.supply_mass, rd = pb.demand_mass;
        for (auto& m : rd) m *= scale;
        std::vector<std::vector<std::pair<int, double>>> flow(S);
        std::vector<std::vector<std::pair<int, double>>> back(D);  // demand -> (supply, flow)
        std::vector<double> pu(S, 0.0), pv(D, 0.0), du(S), dv(D);
        std::vector<int> prev_s(D, -1), prev_d(S, -1);
        std::vector<char> done_s(S), done_d(D);

        // heap entries: (distance, node) with node < S meaning supply
        using HeapItem = std::pair<double, int>;
        auto heap_cmp = [](const HeapItem& a, const HeapItem& b) {
            return a.first > b.first || (a.first == b.first && a.second > b.second);
        };

        bool stuck = false;
        double remaining = ms;
        while (remaining > eps_mass && !stuck) {
            std::fill(du.begin(), du.end(), inf);
            std::fill(dv.begin(), dv.end(), inf);
            std::fill(done_s.begin(), done_s.end(), 0);
            std::fill(done_d.begin(), done_d.end(), 0);
            std::fill(prev_s.begin(), prev_s.end(), -1);
            std::fill(prev_d.begin(), prev_d.end(), -1);
            // single-source rounds keep each Dijkstra local: the search
            // usually pops a handful of nodes before hitting free demand
            std::vector<HeapItem> heap;
            for (std::size_t i = 0; i < S; ++i)
                if (rs[i] > eps_mass) {
                    du[i] = 0.0;
                    heap.push_back({0.0, int(i)});
                    break;
                }
            std::make_heap(heap.begin(), heap.end(), heap_cmp);

            int sink = -1;
            while (!heap.empty()) {
                std::pop_heap(heap.begin(), heap.end(), heap_cmp);
                auto [dist, node] = heap.back();
                heap.pop_back();
                if (node < int(S)) {
                    std::size_t i = std::size_t(node);
                    if (done_s[i] || dist > du[i]) continue;
                    done_s[i] = 1;
                    double base = dist - pu[i];
                    for (const auto& [j, c] : adj[i]) {
                        if (done_d[std::size_t(j)]) continue;
                        double nd = base + c + pv[std::size_t(j)];
                        if (nd < dist) nd = dist;  // guard fp drift in reduced costs
                        if (nd < dv[std::size_t(j)]) {
                            dv[std::size_t(j)] = nd;
                            prev_s[std::size_t(j)] = int(i);
                            heap.push_back({nd, int(S) + j});
                            std::push_heap(heap.begin(), heap.end(), heap_cmp);
                        }
                    }
                } else {
                    std::size_t j = std::size_t(node - int(S));
                    if (done_d[j] || dist > dv[j]) continue;
                    if (rd[j] > eps_mass) {
                        sink = int(j);
                        break;
                    }
                    done_d[j] = 1;
                    for (const auto& e : back[j]) {
                        std::size_t i = std::size_t(e.first);
                        if (done_s[i] || e.second <= eps_mass) continue;
                        double rc = -(cost(pb.supply_pos[i], pb.demand_pos[j]) - pu[i] + pv[j]);
                        if (rc < 0.0) rc = 0.0;
                        double nd = dist + rc;
                        if (nd < du[i]) {
                            du[i] = nd;
                            prev_d[i] = int(j);
                            heap.push_back({nd, int(i)});
                            std::push_heap(heap.begin(), heap.end(), heap_cmp);
                        }
                    }
                }
            }
            if (sink < 0) {
                stuck = true;  // pruned graph cannot route the remainder
                break;
            }

            double bottleneck = rd[std::size_t(sink)];
            {
                int j = sink;
                while (true) {
                    int i = prev_s[std::size_t(j)];
                    int jp = prev_d[std::size_t(i)];
                    if (jp < 0) {
                        bottleneck = std::min(bottleneck, rs[std::size_t(i)]);
                        break;
                    }
                    for (const auto& e : flow[std::size_t(i)])
                        if (e.first == jp) {
                            bottleneck = std::min(bottleneck, e.second);
                            break;
                        }
                    j = jp;
                }
            }
            {
                int j = sink;
                while (true) {
                    int i = prev_s[std::size_t(j)];
                    auto& edges = flow[std::size_t(i)];
                    bool found = false;
                    for (auto& e : edges)
                        if (e.first == j) {
                            e.second += bottleneck;
                            found = true;
                            break;
                        }
                    if (!found) edges.push_back({j, bottleneck});
                    auto& bedges = back[std::size_t(j)];
                    found = false;
                    for (auto& e : bedges)
                        if (e.first == i) {
                            e.second += bottleneck;
                            found = true;
                            break;
                        }
                    if (!found) bedges.push_back({i, bottleneck});
                    int jp = prev_d[std::size_t(i)];
                    if (jp < 0) {
                        rs[std::size_t(i)] -= bottleneck;
                        break;
                    }
                    for (auto& e : edges)
                        if (e.first == jp) {
                            e.second -= bottleneck;
                            break;
                        }
                    for (auto& e : back[std::size_t(jp)])
                        if (e.first == i) {
                            e.second -= bottleneck;
                            break;
                        }
                    j = jp;
                }
                rd[std::size_t(sink)] -= bottleneck;
                remaining -= bottleneck;
            }
            double dsink = dv[std::size_t(sink)];
            for (std::size_t i = 0; i < S; ++i)
                if (du[i] < inf) pu[i] += std::max(0.0, dsink - du[i]);
            for (std::size_t j = 0; j < D; ++j)
                if (dv[j] < inf) pv[j] += std::max(0.0, dsink - dv[j]);
        }
        if (stuck) continue;

        // dual feasibility certificate over every pruned pair
        double worst = 0.0, cscale = 0.0;
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < D; ++j) {
                double c = cost(pb.supply_pos[i], pb.demand_pos[j]);
                cscale = std::max(cscale, c);
                worst = std::min(worst, c - pu[i] + pv[j]);
            }
        if (worst >= -1e-9 * (1.0 + cscale)) {
            TransportPlan plan;
            double total = 0.0;
            for (std::size_t i = 0; i < S; ++i)
                for (const auto& e : flow[i])
                    if (e.second > eps_mass) {
                        plan.moves.push_back({int(i), e.first, e.second});
                        total +=
                            e.second * cost(pb.supply_pos[i], pb.demand_pos[std::size_t(e.first)]);
                    }
            plan.cost = total;
            return plan;
        }
    }
    throw ProblemTooLarge("pruned flow failed to certify optimality within the radius budget");
}

// Marginal check: largest absolute mismatch between a plan's row/column
// sums and the given measures, as a fraction of total mass.
inline double plan_marginal_error(const TransportPlan& plan, const std::vector<double>& supply,
                                  const std::vector<double>& demand, double demand_scale = 1.0) {
    std::vector<double> rs(supply.size(), 0.0), rd(demand.size(), 0.0);
    for (const auto& m : plan.moves) {
        rs[std::size_t(m.source)] += m.mass;
        rd[std::size_t(m.target)] += m.mass;
    }
    double total = 0.0;
    for (double m : supply) total += m;
    double worst = 0.0;
    for (std::size_t i = 0; i < supply.size(); ++i)
        worst = std::max(worst, std::abs(rs[i] - supply[i]));
    for (std::size_t j = 0; j < demand.size(); ++j)
        worst = std::max(worst, std::abs(rd[j] - demand[j] * demand_scale));
    return total > 0.0 ? worst / total : 0.0;
}

}  // namespace stripes
