#pragma once

// Striped two-phase patterns on tubular domains and their energy suite:
// interface length, exact Monge-Kantorovich transport between the phases,
// and the rescaled energies that expose the stripe-width selection.

#include "stripes/geometry.hpp"
#include "stripes/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stripes {

STRIPES_DEFINE_ERROR(InvalidCount);
STRIPES_DEFINE_ERROR(CannotBalanceMass);
STRIPES_DEFINE_ERROR(BadInterfaces);

// A binary phase pattern on a tube, stored analytically as interface
// offsets r_0 < r_1 < ... < r_{2k-1} strictly inside (-delta, delta).
// The material phase u = 1 occupies the bands (r_{2i}, r_{2i+1}); the
// complement inside the tube is u = 0, so both tube edges see u = 0.
struct BinaryPattern {
    TubularDomain tube;
    std::vector<double> interfaces;

    std::size_t bands() const { return interfaces.size() / 2; }

    void validate() const {
        if (interfaces.size() % 2 != 0)
            throw BadInterfaces("a band pattern needs an even number of interfaces");
        for (std::size_t i = 0; i + 1 < interfaces.size(); ++i)
            if (!(interfaces[i] < interfaces[i + 1]))
                throw BadInterfaces("interfaces must be strictly increasing");
        if (!interfaces.empty() &&
            (interfaces.front() <= -tube.delta || interfaces.back() >= tube.delta))
            throw BadInterfaces("interfaces must lie strictly inside (-delta, delta)");
    }

    // Area of the offset band (ra, rb): integrating the offset-curve length
    // L + 2*pi*r over r (valid because 1 + r*kappa > 0 throughout the tube;
    // the total turning of a simple closed curve is 2*pi).
    double band_area(double ra, double rb) const {
        double L = tube.curve.length();
        return L * (rb - ra) + pi * (rb * rb - ra * ra);
    }

    double material_area() const {
        double a = 0.0;
        for (std::size_t i = 0; i + 1 < interfaces.size(); i += 2)
            a += band_area(interfaces[i], interfaces[i + 1]);
        return a;
    }

    double mass_fraction() const { return material_area() / tube.area(); }

    // Admissible patterns carry material fraction 1/2 (tolerance 1e-3) with
    // the phase vanishing near both tube edges.
    bool admissible(double tol = 1e-3) const {
        if (interfaces.empty()) return false;
        validate();
        return std::abs(mass_fraction() - 0.5) <= tol;
    }

    // Phase indicator in tube coordinates.
    bool material_at(double r) const {
        auto it = std::upper_bound(interfaces.begin(), interfaces.end(), r);
        return (it - interfaces.begin()) % 2 == 1;
    }
};

// Equally spaced bands: the tube cross-section (-delta, delta) splits into
// k equal periods and each period holds one centered material band. The
// common band width solves the area balance (with the exact curved-area
// formula) so the material fraction hits `fraction`; by symmetry of the
// period centers the solution is width = 2*delta*fraction/k, and the
// bisection converges to it at machine precision.
inline BinaryPattern make_stripes(const TubularDomain& tube, int count, double fraction = 0.5) {
    if (count < 1) throw InvalidCount("band count must be at least 1");
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw CannotBalanceMass("material fraction must lie strictly between 0 and 1");
    const double delta = tube.delta;
    const double period = 2.0 * delta / count;
    std::vector<double> centers(static_cast<std::size_t>(count), 0.0);
    for (int i = 0; i < count; ++i) centers[std::size_t(i)] = -delta + (i + 0.5) * period;

    BinaryPattern pat{tube, {}};
    auto area_of_width = [&](double w) {
        double a = 0.0;
        for (double c : centers) a += pat.band_area(c - 0.5 * w, c + 0.5 * w);
        return a;
    };
    const double target = fraction * tube.area();
    double lo = 0.0, hi = period * (1.0 - 1e-12);
    if (area_of_width(hi) < target)
        throw CannotBalanceMass("requested fraction does not fit the band layout");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (area_of_width(mid) < target ? lo : hi) = mid;
    }
    double w = 0.5 * (lo + hi);
    for (double c : centers) {
        pat.interfaces.push_back(c - 0.5 * w);
        pat.interfaces.push_back(c + 0.5 * w);
    }
    pat.validate();
    return pat;
}

namespace detail {

// Energy of one band period on a circle tube. The period [R, R+p] carries
// the radial weight rho + r; the band [a, b] is centred at x with width
// chosen so it holds exactly half the period's weighted mass, which keeps
// the phase transport local to the period. Cost = eps * (interface weight)
// + (1/eps) * integral of |S| where S is the signed mass imbalance between
// the band phase and its complement, a piecewise quadratic in r.
inline double band_period_cost(double rho, double R, double p, double x, double eps) {
    double c = R + 0.5 * p;
    double w = p * (rho + c) / (2.0 * (rho + x));
    double a = x - 0.5 * w, b = x + 0.5 * w;
    double Sa = -(a - R) * (rho + 0.5 * (a + R));
    double Sb = Sa + (b - a) * (rho + 0.5 * (a + b));
    double T = abs_quadratic_integral(0.0, -(rho + R), -0.5, a - R);
    T += abs_quadratic_integral(Sa, rho + a, 0.5, b - a);
    T += abs_quadratic_integral(Sb, -(rho + b), -0.5, R + p - b);
    return eps * ((rho + a) + (rho + b)) + T / eps;
}

}  // namespace detail

// Curvature-adapted bands on a circle tube: keep the equal periods of the
// plain layout, but inside each period shift the band to the offset that
// minimizes the period's own energy (interface weight plus local phase
// transport), with the band width rebalanced so it always holds half the
// period's weighted mass. The offset is found by golden-section search on
// the exact one-period cost. With the matched width eps = delta / (2 count)
// (the default), this halves the curvature excess of the equal layout.
inline BinaryPattern make_adapted_stripes(const TubularDomain& tube, int count,
                                          double eps = 0.0) {
    if (count < 1) throw InvalidCount("band count must be at least 1");
    if (tube.curve.kind() != ClosedCurve::Kind::Circle)
        throw MethodDomainMismatch("adapted bands require a circle tube");
    const double rho = tube.curve.circle_radius();
    const double delta = tube.delta;
    const double p = 2.0 * delta / count;
    if (eps <= 0.0) eps = delta / (2.0 * count);
    const double gr = 0.6180339887498949;
    BinaryPattern pat{tube, {}};
    for (int j = 0; j < count; ++j) {
        double R = -delta + j * p;
        double c = R + 0.5 * p;
        double lo = c - 0.25 * p, hi = c + 0.25 * p;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = detail::band_period_cost(rho, R, p, x1, eps);
        double f2 = detail::band_period_cost(rho, R, p, x2, eps);
        for (int it = 0; it < 160; ++it) {
            if (f1 < f2) {
                hi = x2; x2 = x1; f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = detail::band_period_cost(rho, R, p, x1, eps);
            } else {
                lo = x1; x1 = x2; f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = detail::band_period_cost(rho, R, p, x2, eps);
            }
        }
        double x = 0.5 * (lo + hi);
        double w = p * (rho + c) / (2.0 * (rho + x));
        pat.interfaces.push_back(x - 0.5 * w);
        pat.interfaces.push_back(x + 0.5 * w);
    }
    pat.validate();
    return pat;
}

// Total interface length: the sum of offset-curve lengths at every
// interface radius (analytic; no rasterization error).
inline double perimeter(const BinaryPattern& pat) {
    pat.validate();
    double total = 0.0;
    for (double r : pat.interfaces) total += pat.tube.curve.offset_length(r);
    return total;
}

// A pattern sampled onto a grid: phase flag per interior cell.
struct PatternGrid {
    std::shared_ptr<const Grid> grid;
    std::vector<char> u;  // interior-rank indexed
};

inline PatternGrid rasterize_pattern(const BinaryPattern& pat, double h) {
    pat.validate();
    Domain dom(pat.tube);
    auto grid = std::make_shared<Grid>(rasterize(dom, h));
    std::vector<char> u(grid->interior.size(), 0);
    for (std::size_t k = 0; k < grid->interior.size(); ++k) {
        int f = grid->interior[k];
        Vec2 x = grid->center(f / grid->ny, f % grid->ny);
        auto tc = tube_coordinates(pat.tube, x);
        if (tc && pat.material_at(tc->r)) u[k] = 1;
    }
    return {grid, std::move(u)};
}

// Grid-based interface length: counts phase-change edges between interior
// cells and scales by pi/4 * h. Axis-aligned edge counting overestimates
// isotropic boundaries by 4/pi (the Cauchy-Crofton anisotropy), so the
// correction makes the estimate asymptotically unbiased for smooth curved
// interfaces; residual error reflects the interface's anisotropy.
inline double perimeter_grid(const BinaryPattern& pat, double h) {
    auto pg = rasterize_pattern(pat, h);
    const Grid& g = *pg.grid;
    long edges = 0;
    for (std::size_t k = 0; k < g.interior.size(); ++k) {
        int f = g.interior[k], i = f / g.ny, j = f % g.ny;
        // count each edge once: look at +x and +y neighbors only
        for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
            int ii = i + di, jj = j + dj;
            if (ii >= g.nx || jj >= g.ny) continue;
            int rf = g.rank[std::size_t(ii) * std::size_t(g.ny) + std::size_t(jj)];
            if (rf < 0) continue;
            if (pg.u[k] != pg.u[std::size_t(rf)]) ++edges;
        }
    }
    return double(edges) * h * (pi / 4.0);
}

enum class TransportMethod { ExactFlow, RadialOracle, OneDOracle };

struct MkOptions {
    double h = 1.0 / 64.0;  // rasterization pitch for the exact flow
    int sector_fold = 8;    // circle tubes solve one sector and scale up
};

// Result of a Monge-Kantorovich evaluation. The oracles return the exact
// distance with an empty plan; the exact flow also returns the optimal plan
// whose move indices point into supply_cells/demand_cells (interior flat
// cell ids of the rasterization).
struct MkResult {
    double distance = 0.0;
    TransportPlan plan;
    std::vector<int> supply_cells, demand_cells;
    double cell_mass = 0.0;
    int sector_fold = 1;
};

namespace detail {

// Chord metric on the circle quotient identified modulo 2*pi/fold: points
// are supplied in polar form (x = radius, y = angle) so each evaluation is
// one cosine. Valid for measures with the same rotational symmetry.
struct SectorChordCost {
    double period;
    double operator()(const Vec2& a, const Vec2& b) const {
        double dphi = a.y - b.y;
        dphi -= period * std::round(dphi / period);
        double c2 = a.x * a.x + b.x * b.x - 2.0 * a.x * b.x * std::cos(dphi);
        return std::sqrt(std::max(0.0, c2));
    }
};

}  // namespace detail

inline MkResult mk_distance(const BinaryPattern& pat, TransportMethod method,
                            const MkOptions& opt = {}) {
    pat.validate();
    if (pat.interfaces.empty()) throw EmptyMeasure("pattern has no material phase");
    const TubularDomain& tube = pat.tube;
    const bool circle = tube.curve.kind() == ClosedCurve::Kind::Circle;

    if (method == TransportMethod::RadialOracle) {
        if (!circle) throw MethodDomainMismatch("radial oracle requires a circle tube");
        MkResult out;
        out.distance =
            w1_radial_circle_tube(tube.curve.circle_radius(), tube.delta, pat.interfaces);
        return out;
    }

    if (method == TransportMethod::OneDOracle) {
        // flat cross-section reduction: measures on r in (-delta, delta)
        // with unit weight, scaled by the centerline length
        std::vector<double> xs;
        xs.push_back(-tube.delta);
        for (double r : pat.interfaces) xs.push_back(r);
        xs.push_back(tube.delta);
        std::vector<double> ru, rv;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            bool material = (i % 2 == 1);
            ru.push_back(material ? 1.0 : 0.0);
            rv.push_back(material ? 0.0 : 1.0);
        }
        MkResult out;
        out.distance = tube.curve.length() * w1_density_line(Density1D::piecewise_constant(xs, ru),
                                                             Density1D::piecewise_constant(xs, rv));
        return out;
    }

    // exact flow on the rasterized pattern
    auto pg = rasterize_pattern(pat, opt.h);
    const Grid& g = *pg.grid;
    MkResult out;
    out.cell_mass = opt.h * opt.h;

    FlowProblem pb;
    if (circle && opt.sector_fold > 1) {
        out.sector_fold = opt.sector_fold;
        Vec2 c = tube.curve.circle_center();
        double wedge = 2.0 * pi / opt.sector_fold;
        for (std::size_t k = 0; k < g.interior.size(); ++k) {
            int f = g.interior[k];
            Vec2 x = g.center(f / g.ny, f % g.ny);
            double phi = std::atan2(x.y - c.y, x.x - c.x);
            if (phi < 0.0) phi += 2.0 * pi;
            if (phi >= wedge) continue;
            Vec2 polar{std::hypot(x.x - c.x, x.y - c.y), phi};
            if (pg.u[k]) {
                pb.supply_pos.push_back(polar);
                pb.supply_mass.push_back(out.cell_mass);
                out.supply_cells.push_back(f);
            } else {
                pb.demand_pos.push_back(polar);
                pb.demand_mass.push_back(out.cell_mass);
                out.demand_cells.push_back(f);
            }
        }
        detail::SectorChordCost cost{wedge};
        // transport stays within one band period; start the pruning radius
        // there and let the certificate loop widen it if needed
        double radius =
            2.0 * tube.delta / double(std::max<std::size_t>(pat.bands(), 1)) + 4.0 * opt.h;
        out.plan = mincost_flow_pruned(pb, radius, cost);
        out.distance = out.plan.cost * opt.sector_fold;
        return out;
    }

    for (std::size_t k = 0; k < g.interior.size(); ++k) {
        int f = g.interior[k];
        Vec2 x = g.center(f / g.ny, f % g.ny);
        if (pg.u[k]) {
            pb.supply_pos.push_back(x);
            pb.supply_mass.push_back(out.cell_mass);
            out.supply_cells.push_back(f);
        } else {
            pb.demand_pos.push_back(x);
            pb.demand_mass.push_back(out.cell_mass);
            out.demand_cells.push_back(f);
        }
    }
    double radius =
        2.0 * tube.delta / double(std::max<std::size_t>(pat.bands(), 1)) + 4.0 * opt.h;
    out.plan = mincost_flow_pruned(pb, radius);
    out.distance = out.plan.cost;
    return out;
}

// Energy breakdown at scale eps. F = eps * perimeter + (1/eps) * transport
// when the pattern is admissible, infinite otherwise (the marker, not an
// exception); the perimeter and transport entries stay measurable either
// way. G and H are exact arithmetic combinations of the recorded fields.
struct EnergyBreakdown {
    double eps = 0.0;
    double perimeter_term = 0.0;  // eps * total interface length
    double transport_term = 0.0;  // (1/eps) * d(u, 1-u)
    double F = 0.0;
    double area = 0.0;  // |Omega| = 2*delta*L
    double G = 0.0;     // (F - area) / eps^2
    double H = 0.0;     // (F - area) / (eps * log eps)
    bool admissible = false;
};

inline TransportMethod default_method(const BinaryPattern& pat) {
    return pat.tube.curve.kind() == ClosedCurve::Kind::Circle ? TransportMethod::RadialOracle
                                                              : TransportMethod::OneDOracle;
}

inline EnergyBreakdown energy_suite(const BinaryPattern& pat, double eps,
                                    std::optional<TransportMethod> method = std::nullopt,
                                    const MkOptions& opt = {}) {
    if (!(eps > 0.0)) throw InvalidCount("eps must be positive");
    pat.validate();
    EnergyBreakdown out;
    out.eps = eps;
    out.area = pat.tube.area();
    out.admissible = pat.admissible();
    double per = perimeter(pat);
    out.perimeter_term = eps * per;
    double d = pat.interfaces.empty()
                   ? 0.0
                   : mk_distance(pat, method.value_or(default_method(pat)), opt).distance;
    out.transport_term = d / eps;
    if (out.admissible) {
        out.F = out.perimeter_term + out.transport_term;
        out.G = (out.F - out.area) / (eps * eps);
        out.H = (out.F - out.area) / (eps * std::log(eps));
    } else {
        out.F = std::numeric_limits<double>::infinity();
        out.G = std::numeric_limits<double>::infinity();
        out.H = std::numeric_limits<double>::infinity();
    }
    return out;
}

// Flat-geometry energy density of period-2w stripes at scale eps: the
// interface term contributes eps/w and the transport term w/(4 eps) per
// unit area.
inline double flat_energy_density(double w, double eps) {
    return eps / w + w / (4.0 * eps);
}

// Minimizer of the flat energy density over the stripe half-period w:
// coarse log grid, then golden-section refinement. The exact optimum is
// w = 2 eps with density 1.
inline double optimal_width(double eps) {
    if (!(eps > 0.0)) throw InvalidCount("eps must be positive");
    double best_w = eps, best_e = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 240; ++i) {
        double w = eps * std::pow(10.0, -3.0 + 6.0 * i / 240.0);
        double e = flat_energy_density(w, eps);
        if (e < best_e) {
            best_e = e;
            best_w = w;
        }
    }
    double lo = best_w / 1.3, hi = best_w * 1.3;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = flat_energy_density(x1, eps), f2 = flat_energy_density(x2, eps);
    for (int it = 0; it < 200; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = flat_energy_density(x1, eps);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = flat_energy_density(x2, eps);
        }
    }
    return 0.5 * (lo + hi);
}

// Energy ladder for band patterns over a list of scales, with the band
// count tied to the scale by k = delta/(2 eps) (rounded). `adapted` swaps
// in the curvature-adapted layout (circle tubes only).
inline std::vector<EnergyBreakdown> recovery_ladder(const TubularDomain& tube,
                                                    const std::vector<double>& eps_list,
                                                    std::optional<TransportMethod> method = {},
                                                    bool adapted = false,
                                                    const MkOptions& opt = {}) {
    std::vector<EnergyBreakdown> out;
    for (double eps : eps_list) {
        int k = std::max(1, int(std::lround(tube.delta / (2.0 * eps))));
        BinaryPattern pat = adapted ? make_adapted_stripes(tube, k, eps) : make_stripes(tube, k);
        out.push_back(energy_suite(pat, eps, method, opt));
    }
    return out;
}

}  // namespace stripes
