#pragma once

// JSON / CSV serialization of curves, domains, grids, fields, patterns and
// reports, plus atomic text-file writes (temp file + rename). JSON encoding
// uses shortest round-trip number formatting, so field data survives an
// export/import cycle losslessly; grids travel as domain + spacing and are
// re-rasterized (deterministically) on load instead of shipping stencils.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stripes/copolymer.hpp"
#include "stripes/fields.hpp"
#include "stripes/geometry.hpp"
#include "stripes/linefield.hpp"
#include "stripes/variational.hpp"

namespace stripes {

STRIPES_DEFINE_ERROR(ParseError);
STRIPES_DEFINE_ERROR(IoError);

using Json = nlohmann::json;

namespace detail {

inline const Json& need(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing key \"") + key + "\"");
    return *it;
}

inline double need_num(const Json& j, const char* key) {
    const Json& v = need(j, key);
    if (!v.is_number()) throw ParseError(std::string("key \"") + key + "\" must be a number");
    return v.get<double>();
}

inline Vec2 vec2_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ParseError(std::string(what) + " must be a [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known,
                           const char* what) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok)
            throw ParseError(std::string("unknown key \"") + it.key() + "\" in " + what);
    }
}

}  // namespace detail

// ---------------------------------------------------------------- curves ---

inline Json curve_to_json(const ClosedCurve& c) {
    Json j;
    switch (c.kind()) {
        case ClosedCurve::Kind::Circle: {
            j["kind"] = "circle";
            j["center"] = {c.circle_center().x, c.circle_center().y};
            j["radius"] = c.circle_radius();
            break;
        }
        case ClosedCurve::Kind::Ellipse: {
            j["kind"] = "ellipse";
            j["a"] = c.ellipse_a();
            j["b"] = c.ellipse_b();
            break;
        }
        case ClosedCurve::Kind::Spline: {
            j["kind"] = "spline";
            Json pts = Json::array();
            for (const Vec2& p : c.spline_points()) pts.push_back({p.x, p.y});
            j["points"] = std::move(pts);
            break;
        }
    }
    return j;
}

inline ClosedCurve curve_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("curve must be a JSON object");
    std::string kind = detail::need(j, "kind").get<std::string>();
    if (kind == "circle") {
        detail::reject_unknown(j, {"kind", "center", "radius"}, "circle curve");
        return ClosedCurve::circle(detail::vec2_from_json(detail::need(j, "center"), "center"),
                                   detail::need_num(j, "radius"));
    }
    if (kind == "ellipse") {
        detail::reject_unknown(j, {"kind", "a", "b"}, "ellipse curve");
        return ClosedCurve::ellipse(detail::need_num(j, "a"), detail::need_num(j, "b"));
    }
    if (kind == "spline") {
        detail::reject_unknown(j, {"kind", "points"}, "spline curve");
        const Json& pts = detail::need(j, "points");
        if (!pts.is_array()) throw ParseError("spline points must be an array");
        std::vector<Vec2> points;
        for (const Json& p : pts) points.push_back(detail::vec2_from_json(p, "spline point"));
        return ClosedCurve::from_points(std::move(points));
    }
    throw ParseError("unknown curve kind \"" + kind + "\"");
}

// ---------------------------------------------------------------- domains ---

inline Json tube_to_json(const TubularDomain& t) {
    return Json{{"curve", curve_to_json(t.curve)}, {"delta", t.delta}};
}

inline TubularDomain tube_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("tube must be a JSON object");
    detail::reject_unknown(j, {"curve", "delta"}, "tube");
    return make_tube(curve_from_json(detail::need(j, "curve")), detail::need_num(j, "delta"));
}

inline Json domain_to_json(const Domain& d) {
    switch (d.kind()) {
        case Domain::Kind::Tube: return tube_to_json(d.tube());
        case Domain::Kind::Disc:
            return Json{{"kind", "disc"},
                        {"center", {d.disc().center.x, d.disc().center.y}},
                        {"radius", d.disc().radius}};
        case Domain::Kind::Rect:
            return Json{{"kind", "rect"},
                        {"lo", {d.rect().lo.x, d.rect().lo.y}},
                        {"hi", {d.rect().hi.x, d.rect().hi.y}}};
    }
    throw Error("unreachable domain kind");
}

inline Domain domain_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("domain must be a JSON object");
    if (j.contains("curve")) return Domain(tube_from_json(j));
    std::string kind = detail::need(j, "kind").get<std::string>();
    if (kind == "disc") {
        detail::reject_unknown(j, {"kind", "center", "radius"}, "disc domain");
        return Domain(Disc{detail::vec2_from_json(detail::need(j, "center"), "center"),
                           detail::need_num(j, "radius")});
    }
    if (kind == "rect") {
        detail::reject_unknown(j, {"kind", "lo", "hi"}, "rect domain");
        Rect r{detail::vec2_from_json(detail::need(j, "lo"), "lo"),
               detail::vec2_from_json(detail::need(j, "hi"), "hi")};
        if (r.hi.x <= r.lo.x || r.hi.y <= r.lo.y)
            throw ParseError("rect needs lo < hi per axis");
        return Domain(r);
    }
    throw ParseError("unknown domain kind \"" + kind + "\"");
}

// ------------------------------------------------------------------ grids ---

// Header + row-major 0/1 mask. Import re-rasterizes from domain + h, which
// reproduces the mask bit-for-bit (rasterization is deterministic).
inline Json grid_to_json(const Grid& g) {
    Json j;
    j["h"] = g.h;
    j["origin"] = {g.origin.x, g.origin.y};
    j["nx"] = g.nx;
    j["ny"] = g.ny;
    std::string mask(g.mask.size(), '0');
    for (std::size_t k = 0; k < g.mask.size(); ++k)
        if (g.mask[k]) mask[k] = '1';
    j["mask"] = std::move(mask);
    return j;
}

// ----------------------------------------------------------------- fields ---

// Field file: domain + spacing header, grid echo, and the row-major list of
// q pairs over interior cells (ascending flat index).
inline Json field_to_json(const Domain& domain, const ProjectionField& f) {
    if (!f.grid) throw FieldShapeMismatch("field has no grid");
    Json j;
    j["domain"] = domain_to_json(domain);
    j["h"] = f.grid->h;
    j["cells"] = f.q.size();
    Json q = Json::array();
    for (const Vec2& v : f.q) q.push_back({v.x, v.y});
    j["q"] = std::move(q);
    return j;
}

inline std::pair<Domain, ProjectionField> field_from_json(const Json& j, int threads = 1) {
    if (!j.is_object()) throw ParseError("field must be a JSON object");
    detail::reject_unknown(j, {"domain", "h", "cells", "q"}, "field");
    Domain domain = domain_from_json(detail::need(j, "domain"));
    double h = detail::need_num(j, "h");
    auto grid = std::make_shared<Grid>(rasterize(domain, h, threads));
    const Json& q = detail::need(j, "q");
    if (!q.is_array()) throw ParseError("field q must be an array");
    if (q.size() != grid->interior.size())
        throw FieldShapeMismatch("field has " + std::to_string(q.size()) +
                                 " cells but the grid has " +
                                 std::to_string(grid->interior.size()));
    ProjectionField f;
    f.grid = std::move(grid);
    f.q.reserve(q.size());
    for (const Json& p : q) f.q.push_back(detail::vec2_from_json(p, "q pair"));
    return {std::move(domain), std::move(f)};
}

// --------------------------------------------------------------- patterns ---

inline Json pattern_to_json(const BinaryPattern& p) {
    return Json{{"tube", tube_to_json(p.tube)}, {"interfaces", p.interfaces}};
}

// Accepts explicit interfaces or the {"bands": k} shorthand (equal widths).
inline BinaryPattern pattern_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("pattern must be a JSON object");
    detail::reject_unknown(j, {"tube", "interfaces", "bands", "fraction"}, "pattern");
    TubularDomain tube = tube_from_json(detail::need(j, "tube"));
    if (j.contains("interfaces") && j.contains("bands"))
        throw ParseError("pattern takes either interfaces or bands, not both");
    if (j.contains("bands")) {
        double fraction = j.contains("fraction") ? detail::need_num(j, "fraction") : 0.5;
        return make_stripes(tube, detail::need(j, "bands").get<int>(), fraction);
    }
    const Json& ifc = detail::need(j, "interfaces");
    if (!ifc.is_array()) throw ParseError("interfaces must be an array");
    BinaryPattern pat{std::move(tube), {}};
    for (const Json& r : ifc) {
        if (!r.is_number()) throw ParseError("interfaces must be numbers");
        pat.interfaces.push_back(r.get<double>());
    }
    pat.validate();
    return pat;
}

// ---------------------------------------------------------------- reports ---

inline Json residual_report_to_json(const ResidualReport& r, double h) {
    return Json{{"l2", r.l2}, {"linf", r.linf}, {"trace", r.trace}, {"h", h}};
}

inline Json minimize_params_to_json(const MinimizeParams& p) {
    return Json{{"lambda", p.lambda},
                {"step", p.step},
                {"max_iters", p.max_iters},
                {"grad_tol", p.grad_tol},
                {"seed", p.seed},
                {"stall_window", p.stall_window},
                {"stall_rtol", p.stall_rtol},
                {"coarse_cells", p.coarse_cells},
                {"heal_steps", p.heal_steps},
                {"coarse_sweeps", p.coarse_sweeps},
                {"flow_budget", p.flow_budget},
                {"threads", p.threads}};
}

inline Json minimize_report_to_json(const MinimizeReport& r, const MinimizeParams& p) {
    return Json{{"params", minimize_params_to_json(p)},
                {"objective", r.objective},
                {"residual_l2", r.residual_l2},
                {"boundary", r.boundary},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"stalled", r.stalled},
                {"flow_time", r.flow_time},
                {"trace", r.trace}};
}

inline Json tubularity_report_to_json(const TubularityReport& r, const TubularityParams& p) {
    return Json{{"params",
                 Json{{"minimize", minimize_params_to_json(p.minimize)},
                      {"restarts", p.restarts},
                      {"obstruction_floor", p.obstruction_floor},
                      {"iter_budget", p.iter_budget},
                      {"flow_budget", p.flow_budget},
                      {"chain_rungs", p.chain_rungs},
                      {"warm_iters", p.warm_iters}}},
                {"hs", r.hs},
                {"objectives", r.objectives},
                {"ratios", r.ratios},
                {"verdict", r.verdict}};
}

inline Json energy_to_json(const EnergyBreakdown& e) {
    return Json{{"eps", e.eps},
                {"perimeter_term", e.perimeter_term},
                {"transport_term", e.transport_term},
                {"F", e.F},
                {"area", e.area},
                {"G", e.G},
                {"H", e.H},
                {"admissible", e.admissible}};
}

// ------------------------------------------------------------------- CSVs ---

namespace detail {
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

// two-column ladder study: h (or any abscissa) vs value
inline std::string ladder_csv(const std::vector<double>& hs, const std::vector<double>& values,
                              const char* head = "h,value") {
    if (hs.size() != values.size()) throw Error("ladder columns differ in length");
    std::string out(head);
    out += '\n';
    for (std::size_t i = 0; i < hs.size(); ++i)
        out += detail::csv_num(hs[i]) + "," + detail::csv_num(values[i]) + "\n";
    return out;
}

inline std::string trace_csv(const std::vector<double>& trace) {
    std::string out("iter,objective\n");
    for (std::size_t i = 0; i < trace.size(); ++i)
        out += std::to_string(i) + "," + detail::csv_num(trace[i]) + "\n";
    return out;
}

inline std::string energy_ladder_csv(const std::vector<EnergyBreakdown>& ladder) {
    std::string out("eps,F,G,H,perimeter,transport\n");
    for (const EnergyBreakdown& e : ladder)
        out += detail::csv_num(e.eps) + "," + detail::csv_num(e.F) + "," + detail::csv_num(e.G) +
               "," + detail::csv_num(e.H) + "," + detail::csv_num(e.perimeter_term) + "," +
               detail::csv_num(e.transport_term) + "\n";
    return out;
}

// ------------------------------------------------------------ file system ---

// Atomic write: temp file in the same directory, then rename over the target;
// no partial artifact is ever visible under the final name.
inline void write_text_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(content.data(), std::streamsize(content.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("cannot rename " + tmp + " to " + path);
    }
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json read_json(const std::string& path) {
    Json j = Json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON in " + path);
    return j;
}

}  // namespace stripes
