#pragma once

// SVG rendering of line fields (unoriented segments, no arrowheads) and
// stripe patterns (filled bands). Output bytes are deterministic for fixed
// inputs: fixed-precision coordinates, fixed palettes, no timestamps.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "stripes/copolymer.hpp"
#include "stripes/fields.hpp"
#include "stripes/linefield.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(EmptyField);
STRIPES_DEFINE_ERROR(InvalidRenderSpec);

struct RenderSpec {
    int stride = 1;            // glyph decimation: draw cells with i,j ≡ 0 (mod stride)
    double stroke_width = 1.2;  // glyph stroke width in pixels
    double width_px = 800.0;    // image width; height follows the aspect ratio
    bool heatmap = false;       // paint |div P| cell backgrounds under the glyphs
    double heatmap_max = 0.0;   // color scale ceiling; 0 = max over cells
    std::string glyph_color = "#111111";
    std::string stripe_fill_a = "#2c3e50";  // material bands
    std::string stripe_fill_b = "#ecf0f1";  // complement

    void validate() const {
        if (stride < 1) throw InvalidRenderSpec("stride must be >= 1");
        if (stroke_width <= 0.0) throw InvalidRenderSpec("stroke width must be positive");
        if (width_px <= 0.0) throw InvalidRenderSpec("image width must be positive");
        if (heatmap_max < 0.0) throw InvalidRenderSpec("heatmap ceiling must be >= 0");
    }
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// linear white -> crimson ramp for t in [0,1]
inline std::string heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    int r = int(std::lround(255.0 + t * (192.0 - 255.0)));
    int g = int(std::lround(255.0 + t * (57.0 - 255.0)));
    int b = int(std::lround(255.0 + t * (43.0 - 255.0)));
    char buf[10];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

struct SvgFrame {
    Vec2 lo;        // world coordinates of the lower-left corner
    double scale;   // pixels per world unit
    double height;  // image height in pixels

    Vec2 to_px(Vec2 w) const { return {(w.x - lo.x) * scale, height - (w.y - lo.y) * scale}; }
};

inline SvgFrame make_frame(Vec2 lo, Vec2 hi, double width_px) {
    SvgFrame fr;
    fr.lo = lo;
    fr.scale = width_px / (hi.x - lo.x);
    fr.height = (hi.y - lo.y) * fr.scale;
    return fr;
}

inline std::string svg_open(double width, double height) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
    s += svg_num(width) + "\" height=\"" + svg_num(height) + "\" viewBox=\"0 0 " +
         svg_num(width) + " " + svg_num(height) + "\">\n";
    return s;
}

}  // namespace detail

// One unoriented line segment per strided interior cell, centered at the cell
// center with direction θ (from the double angle q) and length 0.8·stride·h.
// Optional |div P| heatmap painted as cell rectangles under the glyphs.
inline std::string render_field_svg(const ProjectionField& field, const RenderSpec& spec = {}) {
    spec.validate();
    if (!field.grid || field.q.empty()) throw EmptyField("field has no cells to render");
    const Grid& g = *field.grid;
    Vec2 lo = g.origin;
    Vec2 hi{g.origin.x + g.nx * g.h, g.origin.y + g.ny * g.h};
    detail::SvgFrame fr = detail::make_frame(lo, hi, spec.width_px);
    std::string svg = detail::svg_open(spec.width_px, fr.height);

    if (spec.heatmap) {
        VectorGridField div = divergence(field);
        double vmax = spec.heatmap_max;
        if (vmax <= 0.0)
            for (const Vec2& v : div.v) vmax = std::max(vmax, v.norm());
        if (vmax <= 0.0) vmax = 1.0;
        double cell = g.h * fr.scale;
        for (std::size_t k = 0; k < g.interior.size(); ++k) {
            int f = g.interior[k];
            Vec2 c = fr.to_px(g.center_flat(f));
            svg += "<rect x=\"" + detail::svg_num(c.x - 0.5 * cell) + "\" y=\"" +
                   detail::svg_num(c.y - 0.5 * cell) + "\" width=\"" + detail::svg_num(cell) +
                   "\" height=\"" + detail::svg_num(cell) + "\" fill=\"" +
                   detail::heat_color(div.v[k].norm() / vmax) + "\"/>\n";
        }
    }

    double len = 0.8 * spec.stride * g.h * fr.scale;
    svg += "<g stroke=\"" + spec.glyph_color + "\" stroke-width=\"" +
           detail::svg_num(spec.stroke_width) + "\" stroke-linecap=\"round\">\n";
    for (std::size_t k = 0; k < g.interior.size(); ++k) {
        int f = g.interior[k];
        int i = f / g.ny, j = f % g.ny;
        if (i % spec.stride != 0 || j % spec.stride != 0) continue;
        Directions dir = convert_q(field.q[k]);
        Vec2 c = fr.to_px(g.center_flat(f));
        // pixel frame flips y, so the world direction (mx, my) draws as (mx, −my)
        Vec2 d{dir.m.x, -dir.m.y};
        Vec2 a{c.x - 0.5 * len * d.x, c.y - 0.5 * len * d.y};
        Vec2 b{c.x + 0.5 * len * d.x, c.y + 0.5 * len * d.y};
        svg += "<line x1=\"" + detail::svg_num(a.x) + "\" y1=\"" + detail::svg_num(a.y) +
               "\" x2=\"" + detail::svg_num(b.x) + "\" y2=\"" + detail::svg_num(b.y) + "\"/>\n";
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

namespace detail {

// closed offset loop of the tube spine at signed offset r, as an SVG subpath
inline std::string offset_subpath(const ClosedCurve& c, double r, const SvgFrame& fr,
                                  bool reverse, int samples = 256) {
    std::string d;
    double L = c.length();
    for (int k = 0; k < samples; ++k) {
        int idx = reverse ? samples - 1 - k : k;
        CurveSample cs = c.at(L * double(idx) / double(samples));
        Vec2 p = fr.to_px(cs.point + r * cs.normal);
        d += (k == 0 ? "M" : "L") + svg_num(p.x) + " " + svg_num(p.y);
    }
    d += "Z";
    return d;
}

}  // namespace detail

// Filled stripe pattern: the tube is painted in the complement color, then
// each material band [a,b] is an even-odd ring between the offset loops at
// radii a and b. Band radii land exactly on the pattern's interfaces.
inline std::string render_pattern_svg(const BinaryPattern& pattern,
                                      const RenderSpec& spec = {}) {
    spec.validate();
    pattern.validate();
    Domain dom(pattern.tube);
    auto [lo, hi] = dom.bbox();
    detail::SvgFrame fr = detail::make_frame(lo, hi, spec.width_px);
    std::string svg = detail::svg_open(spec.width_px, fr.height);
    const ClosedCurve& c = pattern.tube.curve;
    double delta = pattern.tube.delta;
    svg += "<path fill-rule=\"evenodd\" fill=\"" + spec.stripe_fill_b + "\" d=\"" +
           detail::offset_subpath(c, delta, fr, false) +
           detail::offset_subpath(c, -delta, fr, true) + "\"/>\n";
    for (std::size_t i = 0; i + 1 < pattern.interfaces.size(); i += 2) {
        svg += "<path fill-rule=\"evenodd\" fill=\"" + spec.stripe_fill_a + "\" d=\"" +
               detail::offset_subpath(c, pattern.interfaces[i + 1], fr, false) +
               detail::offset_subpath(c, pattern.interfaces[i], fr, true) + "\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace stripes
