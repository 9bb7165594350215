#pragma once

// Closed planar curves, tubular domains (a curve thickened by a half-width
// delta), tube coordinates, and rasterization onto uniform cell grids.
//
// Conventions used throughout the library:
//   * curves are parameterized counterclockwise by arc length s in [0, L);
//   * the normal n is the tangent rotated -90 degrees, i.e. OUTWARD for a
//     counterclockwise convex curve; the signed tube offset r increases
//     along n, so r = +delta is the outer edge of the tube;
//   * curvature is signed, positive for a counterclockwise circle, and with
//     this frame the offset curve gamma + r n has speed |1 + r kappa|.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "core.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(FewerThanFourPoints);
STRIPES_DEFINE_ERROR(SelfIntersecting);
STRIPES_DEFINE_ERROR(CurvatureBoundViolated);
STRIPES_DEFINE_ERROR(SelfOverlap);
STRIPES_DEFINE_ERROR(NonPositiveDelta);
STRIPES_DEFINE_ERROR(SpacingTooCoarse);
STRIPES_DEFINE_ERROR(OffsetTooLarge);
STRIPES_DEFINE_ERROR(NotACircle);
STRIPES_DEFINE_ERROR(NotAnEllipse);
STRIPES_DEFINE_ERROR(NotASpline);

struct CurveSample {
    Vec2 point;
    Vec2 tangent;    // unit
    Vec2 normal;     // unit, outward (tangent rotated -90 degrees)
    double curvature = 0.0;
};

// A C^2 closed curve: analytic circle/ellipse or a periodic cubic spline.
// Immutable after construction; arc-length evaluation everywhere.
class ClosedCurve {
  public:
    enum class Kind { Circle, Ellipse, Spline };

    static ClosedCurve circle(Vec2 center, double radius) {
        ClosedCurve c;
        c.kind_ = Kind::Circle;
        c.center_ = center;
        c.radius_ = radius;
        c.length_ = 2.0 * pi * radius;
        c.max_curvature_ = 1.0 / radius;
        return c;
    }

    static ClosedCurve ellipse(double a, double b) {
        ClosedCurve c;
        c.kind_ = Kind::Ellipse;
        c.ea_ = a;
        c.eb_ = b;
        c.build_tables(kTableSize);
        return c;
    }

    // Periodic cubic spline through >= 4 pairwise-distinct points (uniform
    // parameter, arc-length reparameterized via a sampled lookup table).
    // Points are reordered to counterclockwise orientation if needed.
    static ClosedCurve from_points(std::vector<Vec2> points) {
        if (points.size() < 4)
            throw FewerThanFourPoints("periodic spline needs at least 4 control points, got " +
                                      std::to_string(points.size()));
        double area2 = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            area2 += points[i].cross(points[(i + 1) % points.size()]);
        if (area2 < 0.0)
            std::reverse(points.begin(), points.end());
        ClosedCurve c;
        c.kind_ = Kind::Spline;
        c.pts_ = std::move(points);
        c.solve_spline();
        c.build_tables(kTableSize);
        c.check_simple();
        return c;
    }

    Kind kind() const { return kind_; }
    double length() const { return length_; }
    double max_curvature() const { return max_curvature_; }

    // Center and radius, defined for exact circles only.
    Vec2 circle_center() const {
        if (kind_ != Kind::Circle) throw NotACircle("circle accessor on a non-circle curve");
        return center_;
    }
    double circle_radius() const {
        if (kind_ != Kind::Circle) throw NotACircle("circle accessor on a non-circle curve");
        return radius_;
    }

    // Semi-axes, defined for exact ellipses only.
    double ellipse_a() const {
        if (kind_ != Kind::Ellipse) throw NotAnEllipse("ellipse accessor on a non-ellipse curve");
        return ea_;
    }
    double ellipse_b() const {
        if (kind_ != Kind::Ellipse) throw NotAnEllipse("ellipse accessor on a non-ellipse curve");
        return eb_;
    }

    // Control points, defined for splines only.
    const std::vector<Vec2>& spline_points() const {
        if (kind_ != Kind::Spline) throw NotASpline("spline accessor on a non-spline curve");
        return pts_;
    }

    // Evaluate position/frame/curvature at arc length s (wraps modulo L).
    CurveSample at(double s) const {
        s = wrap(s, length_);
        if (kind_ == Kind::Circle) {
            double phi = s / radius_;
            Vec2 rad{std::cos(phi), std::sin(phi)};
            CurveSample out;
            out.point = center_ + radius_ * rad;
            out.tangent = {-rad.y, rad.x};
            out.normal = rad;
            out.curvature = 1.0 / radius_;
            return out;
        }
        return eval_param(param_of_arclength(s));
    }

    // Length of the offset curve {gamma(s) + r n(s)}: integral of |1 + r kappa|.
    double offset_length(double r) const {
        if (std::abs(r) >= 1.0 / max_curvature_)
            throw OffsetTooLarge("offset " + std::to_string(r) +
                                 " reaches the focal set (1/max|kappa| = " +
                                 std::to_string(1.0 / max_curvature_) + ")");
        if (kind_ == Kind::Circle) return 2.0 * pi * (radius_ + r);
        // Trapezoid over the parameter table: integral |1 + r kappa(u)| |gamma'(u)| du.
        double acc = 0.0;
        for (std::size_t k = 0; k < speed_.size(); ++k) {
            double f0 = std::abs(1.0 + r * kappa_[k]) * speed_[k];
            double f1 = std::abs(1.0 + r * kappa_[k + 1 == speed_.size() ? 0 : k + 1]) *
                        speed_[k + 1 == speed_.size() ? 0 : k + 1];
            acc += 0.5 * (f0 + f1) * du_;
        }
        return acc;
    }

  private:
    static constexpr std::size_t kTableSize = 1024;

    Kind kind_ = Kind::Circle;
    double length_ = 0.0;
    double max_curvature_ = 0.0;
    // circle
    Vec2 center_;
    double radius_ = 1.0;
    // ellipse
    double ea_ = 1.0, eb_ = 1.0;
    // spline: control points and per-coordinate second derivatives (periodic)
    std::vector<Vec2> pts_;
    std::vector<Vec2> m2_;
    // lookup tables over the native parameter u in [0, u_max): cumulative arc
    // length, speed |gamma'|, signed curvature
    double du_ = 0.0, umax_ = 0.0;
    std::vector<double> cum_;    // cum_[k] = arc length at u = k*du_, size tableSize+1
    std::vector<double> speed_;  // size tableSize
    std::vector<double> kappa_;  // size tableSize

    // --- parameter-space evaluation -------------------------------------
    void derivatives(double u, Vec2& p, Vec2& d1, Vec2& d2) const {
        if (kind_ == Kind::Ellipse) {
            double c = std::cos(u), s = std::sin(u);
            p = {ea_ * c, eb_ * s};
            d1 = {-ea_ * s, eb_ * c};
            d2 = {-ea_ * c, -eb_ * s};
            return;
        }
        // spline, uniform parameter: piece i covers u in [i, i+1)
        std::size_t n = pts_.size();
        double uw = wrap(u, double(n));
        std::size_t i = std::min<std::size_t>(std::size_t(uw), n - 1);
        double t = uw - double(i);
        const Vec2& p0 = pts_[i];
        const Vec2& p1 = pts_[(i + 1) % n];
        const Vec2& M0 = m2_[i];
        const Vec2& M1 = m2_[(i + 1) % n];
        double q = 1.0 - t;
        p = (q * q * q / 6.0) * M0 + (t * t * t / 6.0) * M1 + q * (p0 - (1.0 / 6.0) * M0) +
            t * (p1 - (1.0 / 6.0) * M1);
        d1 = (-q * q / 2.0) * M0 + (t * t / 2.0) * M1 + (p1 - p0) - (1.0 / 6.0) * (M1 - M0);
        d2 = q * M0 + t * M1;
    }

    CurveSample eval_param(double u) const {
        Vec2 p, d1, d2;
        derivatives(u, p, d1, d2);
        double sp = d1.norm();
        CurveSample out;
        out.point = p;
        out.tangent = d1 / sp;
        out.normal = out.tangent.perp_cw();
        out.curvature = d1.cross(d2) / (sp * sp * sp);
        return out;
    }

    double param_of_arclength(double s) const {
        // binary search in the cumulative table, then linear interpolation
        auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        std::size_t k = (it == cum_.begin()) ? 0 : std::size_t(it - cum_.begin()) - 1;
        if (k >= cum_.size() - 1) k = cum_.size() - 2;
        double seg = cum_[k + 1] - cum_[k];
        double f = seg > 0.0 ? (s - cum_[k]) / seg : 0.0;
        return (double(k) + f) * du_;
    }

    void solve_spline() {
        // Periodic cubic spline with uniform parameter spacing 1:
        //   M[i-1] + 4 M[i] + M[i+1] = 6 (p[i-1] - 2 p[i] + p[i+1])   (cyclic)
        // solved per coordinate by the Sherman-Morrison cyclic reduction.
        std::size_t n = pts_.size();
        m2_.assign(n, Vec2{});
        auto solve_cyclic = [n](const std::vector<double>& rhs) {
            // diag 4, off-diag 1, cyclic corners 1
            const double alpha = 1.0, beta = 1.0, b = 4.0;
            double gamma = -b;
            std::vector<double> diag(n, b), r = rhs, u(n, 0.0);
            diag[0] = b - gamma;
            diag[n - 1] = b - alpha * beta / gamma;
            u[0] = gamma;
            u[n - 1] = alpha;
            auto thomas = [&](std::vector<double> d, std::vector<double> rr) {
                std::vector<double> cp(n, 0.0);
                cp[0] = 1.0 / d[0];
                rr[0] = rr[0] / d[0];
                for (std::size_t i = 1; i < n; ++i) {
                    double m = d[i] - cp[i - 1];
                    cp[i] = 1.0 / m;
                    rr[i] = (rr[i] - rr[i - 1]) / m;
                }
                for (std::size_t i = n - 1; i-- > 0;) rr[i] -= cp[i] * rr[i + 1];
                return rr;
            };
            // note: cp holds 1/m with super-diagonal 1; forward pass uses c=1
            std::vector<double> x = thomas(diag, r);
            std::vector<double> z = thomas(diag, u);
            double fact = (x[0] + beta * x[n - 1] / gamma) /
                          (1.0 + z[0] + beta * z[n - 1] / gamma);
            for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
            return x;
        };
        std::vector<double> rx(n), ry(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& pm = pts_[(i + n - 1) % n];
            const Vec2& p0 = pts_[i];
            const Vec2& pp = pts_[(i + 1) % n];
            rx[i] = 6.0 * (pm.x - 2.0 * p0.x + pp.x);
            ry[i] = 6.0 * (pm.y - 2.0 * p0.y + pp.y);
        }
        std::vector<double> mx = solve_cyclic(rx), my = solve_cyclic(ry);
        for (std::size_t i = 0; i < n; ++i) m2_[i] = {mx[i], my[i]};
    }

    void build_tables(std::size_t table) {
        umax_ = (kind_ == Kind::Ellipse) ? 2.0 * pi : double(pts_.size());
        du_ = umax_ / double(table);
        cum_.assign(table + 1, 0.0);
        speed_.assign(table, 0.0);
        kappa_.assign(table, 0.0);
        double prev_speed = 0.0;
        for (std::size_t k = 0; k <= table; ++k) {
            Vec2 p, d1, d2;
            derivatives(double(k) * du_, p, d1, d2);
            double sp = d1.norm();
            if (sp < 1e-12) throw SelfIntersecting("degenerate tangent on curve");
            if (k < table) {
                speed_[k] = sp;
                kappa_[k] = d1.cross(d2) / (sp * sp * sp);
            }
            if (k > 0) cum_[k] = cum_[k - 1] + 0.5 * (prev_speed + sp) * du_;
            prev_speed = sp;
        }
        length_ = cum_[table];
        max_curvature_ = 0.0;
        for (double ka : kappa_) max_curvature_ = std::max(max_curvature_, std::abs(ka));
    }

    void check_simple() const {
        // proper segment-crossing test on a 256-sample polyline
        constexpr std::size_t m = 256;
        std::vector<Vec2> poly(m);
        for (std::size_t k = 0; k < m; ++k)
            poly[k] = at(length_ * double(k) / double(m)).point;
        auto crosses = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
            auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
                double v = (q - p).cross(r - p);
                return v > 0 ? 1 : (v < 0 ? -1 : 0);
            };
            int o1 = orient(a, b, c), o2 = orient(a, b, d);
            int o3 = orient(c, d, a), o4 = orient(c, d, b);
            return o1 != o2 && o3 != o4 && o1 && o2 && o3 && o4;
        };
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 2; j < m; ++j) {
                if (i == 0 && j == m - 1) continue;  // adjacent around the wrap
                if (crosses(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m]))
                    throw SelfIntersecting("control polygon self-intersects at sampling resolution");
            }
        }
    }
};

// Construct a periodic spline curve through the given points.
inline ClosedCurve curve_from_points(const std::vector<Vec2>& points) {
    return ClosedCurve::from_points(points);
}

// Frame of a curve at arc length s.
inline CurveSample curve_geometry(const ClosedCurve& curve, double s) { return curve.at(s); }

// Length of the offset curve at signed offset r.
inline double offset_length(const ClosedCurve& curve, double r) { return curve.offset_length(r); }

// A curve thickened by half-width delta, validated against the curvature
// bound and against global self-overlap of the thickened strip.
struct TubularDomain {
    ClosedCurve curve;
    double delta = 0.0;

    // |Omega| = 2*delta*L exactly: the area Jacobian is 1 + r*kappa, the odd
    // term integrates to zero in r, and the total turning of a simple closed
    // counterclockwise curve contributes nothing at symmetric limits.
    double area() const { return 2.0 * delta * curve.length(); }
};

inline TubularDomain make_tube(const ClosedCurve& curve, double delta) {
    if (delta <= 0.0) throw NonPositiveDelta("tube half-width must be positive");
    double bound = 1.0 / curve.max_curvature();
    if (delta >= bound)
        throw CurvatureBoundViolated("half-width " + std::to_string(delta) +
                                     " >= 1/max|kappa| = " + std::to_string(bound));
    // Global overlap: pairs of samples farther apart than pi/max|kappa| along
    // the curve are not protected by the curvature bound, so their chord must
    // exceed the tube diameter.
    constexpr std::size_t m = 256;
    double L = curve.length();
    std::vector<Vec2> poly(m);
    for (std::size_t k = 0; k < m; ++k) poly[k] = curve.at(L * double(k) / double(m)).point;
    double protect = pi / curve.max_curvature();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double arc = L * double(j - i) / double(m);
            arc = std::min(arc, L - arc);
            if (arc <= protect) continue;
            if ((poly[i] - poly[j]).norm() <= 2.0 * delta)
                throw SelfOverlap("tube of half-width " + std::to_string(delta) +
                                  " self-overlaps (distant curve segments closer than 2*delta)");
        }
    }
    return TubularDomain{curve, delta};
}

struct TubeCoords {
    double s = 0.0;  // arc length of the nearest curve point
    double r = 0.0;  // signed offset along the outward normal, |r| < delta
};

// Arc length of the curve point nearest to x (coarse scan + Newton on the
// orthogonality condition f(s) = (x - gamma(s)) . t(s) = 0).
inline double nearest_curve_arclength(const ClosedCurve& c, Vec2 x) {
    double L = c.length();
    if (c.kind() == ClosedCurve::Kind::Circle) {
        CurveSample c0 = c.at(0.0);
        Vec2 center = c0.point - (1.0 / c0.curvature) * c0.normal;
        Vec2 d = x - center;
        if (d.norm() < 1e-300) return 0.0;
        return wrap(std::atan2(d.y, d.x), 2.0 * pi) / c0.curvature;
    }
    constexpr int coarse = 256;
    double best = 0.0, bestd = 1e300;
    for (int k = 0; k < coarse; ++k) {
        double sk = L * double(k) / coarse;
        double d2 = (x - c.at(sk).point).norm2();
        if (d2 < bestd) {
            bestd = d2;
            best = sk;
        }
    }
    auto refine = [&](double s0) {
        for (int it = 0; it < 20; ++it) {
            CurveSample cs = c.at(s0);
            Vec2 dx = x - cs.point;
            double f = dx.dot(cs.tangent);
            // d/ds[(x-gamma).t] = -|t|^2 + (x-gamma).t' with t' = -kappa n
            double fp = -1.0 - cs.curvature * dx.dot(cs.normal);
            if (std::abs(fp) < 1e-14) break;
            double step = f / fp;
            s0 -= step;
            if (std::abs(step) < 1e-10) break;
        }
        return wrap(s0, L);
    };
    double s = refine(best);
    // guard against landing in a neighboring valley: also polish from the
    // flanking coarse samples and keep the closest result
    double ds = L / coarse;
    for (double cand : {refine(best - ds), refine(best + ds)}) {
        if ((x - c.at(cand).point).norm2() < (x - c.at(s).point).norm2()) s = cand;
    }
    return s;
}

// Invert the tube map x = gamma(s) + r n(s); nullopt when x lies outside.
inline std::optional<TubeCoords> tube_coordinates(const TubularDomain& tube, Vec2 x) {
    double s = nearest_curve_arclength(tube.curve, x);
    CurveSample cs = tube.curve.at(s);
    double r = (x - cs.point).dot(cs.normal);
    if (std::abs(r) >= tube.delta) return std::nullopt;
    return TubeCoords{s, r};
}

// --- analytic regions beyond tubes (used by tests and the variational and
// --- trace demonstrations): discs and axis-aligned rectangles --------------

struct Disc {
    Vec2 center;
    double radius = 1.0;
};

struct Rect {
    Vec2 lo, hi;
};

// Value-semantic sum type of the supported domains.
class Domain {
  public:
    enum class Kind { Tube, Disc, Rect };

    Domain(TubularDomain t) : kind_(Kind::Tube), tube_(std::move(t)) {}
    Domain(Disc d) : kind_(Kind::Disc), disc_(d) {}
    Domain(Rect r) : kind_(Kind::Rect), rect_(r) {}

    Kind kind() const { return kind_; }
    const TubularDomain& tube() const { return *tube_; }
    const Disc& disc() const { return disc_; }
    const Rect& rect() const { return rect_; }

    bool contains(Vec2 x) const {
        switch (kind_) {
            case Kind::Tube: return tube_coordinates(*tube_, x).has_value();
            case Kind::Disc: return (x - disc_.center).norm() < disc_.radius;
            case Kind::Rect:
                return x.x > rect_.lo.x && x.x < rect_.hi.x && x.y > rect_.lo.y &&
                       x.y < rect_.hi.y;
        }
        return false;
    }

    // Outward unit normal of the domain boundary nearest to x (analytic).
    Vec2 outward_normal(Vec2 x) const {
        switch (kind_) {
            case Kind::Tube: {
                // nearest curve frame; boundary component chosen by sign of r
                CurveSample cs = tube_->curve.at(nearest_curve_arclength(tube_->curve, x));
                double r = (x - cs.point).dot(cs.normal);
                return r >= 0.0 ? cs.normal : -1.0 * cs.normal;
            }
            case Kind::Disc: {
                Vec2 d = x - disc_.center;
                double n = d.norm();
                return n > 1e-300 ? d / n : Vec2{1.0, 0.0};
            }
            case Kind::Rect: {
                // distance to each side; nearest wins, x-axis on ties
                double dl = x.x - rect_.lo.x, dr = rect_.hi.x - x.x;
                double db = x.y - rect_.lo.y, dt = rect_.hi.y - x.y;
                double mx = std::min(dl, dr), my = std::min(db, dt);
                if (mx <= my) return dl <= dr ? Vec2{-1.0, 0.0} : Vec2{1.0, 0.0};
                return db <= dt ? Vec2{0.0, -1.0} : Vec2{0.0, 1.0};
            }
        }
        return {1.0, 0.0};
    }

    std::pair<Vec2, Vec2> bbox() const {
        switch (kind_) {
            case Kind::Tube: {
                const ClosedCurve& c = tube_->curve;
                double L = c.length();
                Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
                for (int k = 0; k < 512; ++k) {
                    Vec2 p = c.at(L * double(k) / 512.0).point;
                    lo.x = std::min(lo.x, p.x);
                    lo.y = std::min(lo.y, p.y);
                    hi.x = std::max(hi.x, p.x);
                    hi.y = std::max(hi.y, p.y);
                }
                Vec2 m{tube_->delta, tube_->delta};
                return {lo - m, hi + m};
            }
            case Kind::Disc: {
                Vec2 m{disc_.radius, disc_.radius};
                return {disc_.center - m, disc_.center + m};
            }
            case Kind::Rect: return {rect_.lo, rect_.hi};
        }
        return {{}, {}};
    }

    // Narrowest feature scale; rasterization requires h < min_feature()/4.
    double min_feature() const {
        switch (kind_) {
            case Kind::Tube: return tube_->delta;
            case Kind::Disc: return disc_.radius;
            case Kind::Rect:
                return 0.5 * std::min(rect_.hi.x - rect_.lo.x, rect_.hi.y - rect_.lo.y);
        }
        return 0.0;
    }

    double area_analytic() const {
        switch (kind_) {
            case Kind::Tube: return tube_->area();
            case Kind::Disc: return pi * disc_.radius * disc_.radius;
            case Kind::Rect: return (rect_.hi.x - rect_.lo.x) * (rect_.hi.y - rect_.lo.y);
        }
        return 0.0;
    }

  private:
    Kind kind_;
    std::optional<TubularDomain> tube_;
    Disc disc_{};
    Rect rect_{};
};

// Uniform cell grid over a domain: interior mask by cell-center membership,
// boundary cells (mask cells with an exposed 4-neighbor side) with analytic
// outward normals, and precomputed second-order difference stencils.
struct Grid {
    double h = 0.0;
    Vec2 origin;  // lower-left corner of cell (0,0)
    int nx = 0, ny = 0;

    std::vector<std::uint8_t> mask;     // nx*ny, flat index = i*ny + j
    std::vector<std::int32_t> interior; // flat indices of mask cells, ascending
    std::vector<std::int32_t> rank;     // flat -> position in `interior`, or -1

    struct BoundaryCell {
        std::int32_t flat = 0;
        Vec2 n;            // outward unit normal (analytic)
        double w = 0.0;    // boundary length carried by the cell
    };
    std::vector<BoundaryCell> boundary;

    // Difference stencils (one per interior cell and axis); defective cells
    // (no admissible second-order stencil) have all-zero coefficients.
    struct Stencil {
        std::int32_t idx[3] = {0, 0, 0};
        double c[3] = {0.0, 0.0, 0.0};
    };
    std::vector<Stencil> sx, sy;
    std::uint32_t defective = 0;

    int flat(int i, int j) const { return i * ny + j; }
    Vec2 center(int i, int j) const {
        return {origin.x + (double(i) + 0.5) * h, origin.y + (double(j) + 0.5) * h};
    }
    Vec2 center_flat(int f) const { return center(f / ny, f % ny); }
    bool in_mask(int i, int j) const {
        return i >= 0 && i < nx && j >= 0 && j < ny && mask[std::size_t(flat(i, j))];
    }
    std::size_t cell_count() const { return interior.size(); }
    double mask_area() const { return double(interior.size()) * h * h; }
};

namespace detail {

inline void build_stencils(Grid& g) {
    auto make = [&](int i, int j, int di, int dj, Grid::Stencil& st) {
        bool m1 = g.in_mask(i - di, j - dj), p1 = g.in_mask(i + di, j + dj);
        bool p2 = g.in_mask(i + 2 * di, j + 2 * dj), m2 = g.in_mask(i - 2 * di, j - 2 * dj);
        double ih = 1.0 / g.h;
        if (m1 && p1) {  // central
            st.idx[0] = g.flat(i - di, j - dj);
            st.idx[1] = g.flat(i + di, j + dj);
            st.idx[2] = g.flat(i, j);
            st.c[0] = -0.5 * ih;
            st.c[1] = 0.5 * ih;
            st.c[2] = 0.0;
            return true;
        }
        if (p1 && p2) {  // one-sided forward, second order
            st.idx[0] = g.flat(i, j);
            st.idx[1] = g.flat(i + di, j + dj);
            st.idx[2] = g.flat(i + 2 * di, j + 2 * dj);
            st.c[0] = -1.5 * ih;
            st.c[1] = 2.0 * ih;
            st.c[2] = -0.5 * ih;
            return true;
        }
        if (m1 && m2) {  // one-sided backward
            st.idx[0] = g.flat(i, j);
            st.idx[1] = g.flat(i - di, j - dj);
            st.idx[2] = g.flat(i - 2 * di, j - 2 * dj);
            st.c[0] = 1.5 * ih;
            st.c[1] = -2.0 * ih;
            st.c[2] = 0.5 * ih;
            return true;
        }
        st.idx[0] = st.idx[1] = st.idx[2] = g.flat(i, j);
        st.c[0] = st.c[1] = st.c[2] = 0.0;
        return false;
    };
    g.sx.resize(g.interior.size());
    g.sy.resize(g.interior.size());
    g.defective = 0;
    for (std::size_t k = 0; k < g.interior.size(); ++k) {
        int f = g.interior[k];
        int i = f / g.ny, j = f % g.ny;
        bool okx = make(i, j, 1, 0, g.sx[k]);
        bool oky = make(i, j, 0, 1, g.sy[k]);
        if (!okx || !oky) ++g.defective;
    }
}

template <typename Fn>
inline void parallel_rows(int nx, int threads, Fn&& fn) {
    if (threads <= 1 || nx < 4 * threads) {
        for (int i = 0; i < nx; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < nx; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Rasterize a domain at spacing h.  Cell centers decide membership; boundary
// cells get analytic outward normals and the exposure-corrected length weight
// h / max(|n1|, |n2|) so staircase quadrature converges to the true boundary
// measure.  `threads` parallelizes rows; results are schedule-independent.
inline Grid rasterize(const Domain& domain, double h, int threads = 1) {
    if (h <= 0.0 || h >= domain.min_feature() / 4.0)
        throw SpacingTooCoarse("need h < " + std::to_string(domain.min_feature() / 4.0) +
                               " to resolve the domain, got " + std::to_string(h));
    auto [lo, hi] = domain.bbox();
    // snap the origin to the lattice h*Z^2 so symmetric domains get symmetric
    // masks and refinements nest
    Grid g;
    g.h = h;
    g.origin = {std::floor((lo.x - 2.0 * h) / h) * h, std::floor((lo.y - 2.0 * h) / h) * h};
    g.nx = int(std::ceil((hi.x + 2.0 * h - g.origin.x) / h)) + 1;
    g.ny = int(std::ceil((hi.y + 2.0 * h - g.origin.y) / h)) + 1;
    g.mask.assign(std::size_t(g.nx) * std::size_t(g.ny), 0);
    detail::parallel_rows(g.nx, threads, [&](int i) {
        for (int j = 0; j < g.ny; ++j)
            if (domain.contains(g.center(i, j))) g.mask[std::size_t(g.flat(i, j))] = 1;
    });
    g.rank.assign(g.mask.size(), -1);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j)
            if (g.mask[std::size_t(g.flat(i, j))]) {
                g.rank[std::size_t(g.flat(i, j))] = std::int32_t(g.interior.size());
                g.interior.push_back(g.flat(i, j));
            }
    for (int f : g.interior) {
        int i = f / g.ny, j = f % g.ny;
        if (g.in_mask(i - 1, j) && g.in_mask(i + 1, j) && g.in_mask(i, j - 1) &&
            g.in_mask(i, j + 1))
            continue;
        Grid::BoundaryCell bc;
        bc.flat = f;
        bc.n = domain.outward_normal(g.center(i, j));
        bc.w = h / std::max(std::abs(bc.n.x), std::abs(bc.n.y));
        g.boundary.push_back(bc);
    }
    detail::build_stencils(g);
    return g;
}

}  // namespace stripes
