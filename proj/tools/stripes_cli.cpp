// Command-line driver: domain rasterization, exact solutions, descent,
// tubularity studies, stripe patterns, copolymer energies, and SVG rendering.
// One JSON config per run (unknown keys rejected), a handful of overriding
// flags, atomic output files, and a one-line JSON summary on stdout.
// Exit codes: 0 success, 1 computation error, 2 usage/config error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stripes/io.hpp"
#include "stripes/render.hpp"

namespace fs = std::filesystem;
using namespace stripes;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> h;
    std::optional<int> threads;
};

// distinguishes bad configuration (exit 2) from computation failures (exit 1)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Json load_config(const CommonFlags& fl) {
    if (!fs::exists(fl.config_path)) throw ConfigError("config not found: " + fl.config_path);
    try {
        return read_json(fl.config_path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

void prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output dir: " + dir);
}

std::string out_path(const CommonFlags& fl, const Json& cfg, const char* key,
                     const char* fallback) {
    std::string name = fallback;
    if (cfg.contains("outputs")) {
        const Json& outs = cfg["outputs"];
        if (!outs.is_object()) throw ConfigError("outputs must be an object");
        if (outs.contains(key)) name = outs[key].get<std::string>();
    }
    return (fs::path(fl.out_dir) / name).string();
}

void check_output_keys(const Json& cfg, std::initializer_list<const char*> known) {
    if (!cfg.contains("outputs")) return;
    try {
        detail::reject_unknown(cfg["outputs"], known, "outputs");
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

double config_h(const CommonFlags& fl, const Json& cfg) {
    if (fl.h) return *fl.h;
    try {
        return detail::need_num(cfg, "h");
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

int config_threads(const CommonFlags& fl) { return fl.threads ? *fl.threads : 1; }

MinimizeParams minimize_params_from_json(const Json& j) {
    detail::reject_unknown(j,
                           {"lambda", "step", "max_iters", "grad_tol", "seed", "stall_window",
                            "stall_rtol", "coarse_cells", "heal_steps", "coarse_sweeps",
                            "flow_budget", "threads"},
                           "minimize params");
    MinimizeParams p;
    if (j.contains("lambda")) p.lambda = j["lambda"].get<double>();
    if (j.contains("step")) p.step = j["step"].get<double>();
    if (j.contains("max_iters")) p.max_iters = j["max_iters"].get<int>();
    if (j.contains("grad_tol")) p.grad_tol = j["grad_tol"].get<double>();
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("stall_window")) p.stall_window = j["stall_window"].get<int>();
    if (j.contains("stall_rtol")) p.stall_rtol = j["stall_rtol"].get<double>();
    if (j.contains("coarse_cells")) p.coarse_cells = j["coarse_cells"].get<int>();
    if (j.contains("heal_steps")) p.heal_steps = j["heal_steps"].get<int>();
    if (j.contains("coarse_sweeps")) p.coarse_sweeps = j["coarse_sweeps"].get<double>();
    if (j.contains("flow_budget")) p.flow_budget = j["flow_budget"].get<double>();
    if (j.contains("threads")) p.threads = j["threads"].get<int>();
    return p;
}

RenderSpec render_spec_from_json(const Json& j) {
    detail::reject_unknown(j,
                           {"stride", "stroke_width", "width_px", "heatmap", "heatmap_max",
                            "glyph_color", "stripe_fill_a", "stripe_fill_b"},
                           "render spec");
    RenderSpec s;
    if (j.contains("stride")) s.stride = j["stride"].get<int>();
    if (j.contains("stroke_width")) s.stroke_width = j["stroke_width"].get<double>();
    if (j.contains("width_px")) s.width_px = j["width_px"].get<double>();
    if (j.contains("heatmap")) s.heatmap = j["heatmap"].get<bool>();
    if (j.contains("heatmap_max")) s.heatmap_max = j["heatmap_max"].get<double>();
    if (j.contains("glyph_color")) s.glyph_color = j["glyph_color"].get<std::string>();
    if (j.contains("stripe_fill_a")) s.stripe_fill_a = j["stripe_fill_a"].get<std::string>();
    if (j.contains("stripe_fill_b")) s.stripe_fill_b = j["stripe_fill_b"].get<std::string>();
    s.validate();
    return s;
}

TransportMethod method_from_json(const Json& cfg) {
    if (!cfg.contains("method")) throw ConfigError("energy config needs a method");
    std::string m = cfg["method"].get<std::string>();
    if (m == "exact-flow") return TransportMethod::ExactFlow;
    if (m == "radial-oracle") return TransportMethod::RadialOracle;
    if (m == "1d-oracle") return TransportMethod::OneDOracle;
    throw ConfigError("unknown transport method \"" + m + "\"");
}

void print_summary(const Json& j) { std::cout << j.dump() << "\n"; }

// ------------------------------------------------------------- subcommands --

int cmd_domain(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(cfg, {"domain", "h", "outputs"}, "domain config");
    check_output_keys(cfg, {"grid"});
    Domain dom = domain_from_json(detail::need(cfg, "domain"));
    double h = config_h(fl, cfg);
    prepare_out_dir(fl.out_dir);
    std::string grid_path = out_path(fl, cfg, "grid", "grid.json");

    Grid grid = rasterize(dom, h, config_threads(fl));
    write_text_atomic(grid_path, grid_to_json(grid).dump(2) + "\n");
    print_summary(Json{{"command", "domain"},
                       {"h", h},
                       {"cells", grid.interior.size()},
                       {"boundary", grid.boundary.size()},
                       {"defective", grid.defective},
                       {"grid", grid_path}});
    return 0;
}

int cmd_exact(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(cfg, {"domain", "h", "outputs"}, "exact config");
    check_output_keys(cfg, {"field", "residual"});
    Domain dom = domain_from_json(detail::need(cfg, "domain"));
    if (dom.kind() != Domain::Kind::Tube)
        throw ConfigError("exact solutions exist on tubular domains only");
    double h = config_h(fl, cfg);
    prepare_out_dir(fl.out_dir);
    std::string field_path = out_path(fl, cfg, "field", "field.json");
    std::string res_path = out_path(fl, cfg, "residual", "residual.json");

    auto grid = std::make_shared<Grid>(rasterize(dom, h, config_threads(fl)));
    ProjectionField f = exact_solution(dom.tube(), grid);
    ResidualReport res = residual(f);
    write_text_atomic(field_path, field_to_json(dom, f).dump() + "\n");
    write_text_atomic(res_path, residual_report_to_json(res, h).dump(2) + "\n");
    print_summary(Json{{"command", "exact"},
                       {"h", h},
                       {"l2", res.l2},
                       {"linf", res.linf},
                       {"trace", res.trace},
                       {"field", field_path},
                       {"residual", res_path}});
    return 0;
}

int cmd_minimize(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(cfg, {"domain", "h", "minimize", "init", "outputs"},
                           "minimize config");
    check_output_keys(cfg, {"field", "report", "trace"});
    Domain dom = domain_from_json(detail::need(cfg, "domain"));
    double h = config_h(fl, cfg);
    MinimizeParams params = cfg.contains("minimize")
                                ? minimize_params_from_json(cfg["minimize"])
                                : MinimizeParams{};
    if (fl.seed) params.seed = *fl.seed;
    if (fl.threads) params.threads = *fl.threads;
    std::optional<std::string> init_path;
    if (cfg.contains("init")) {
        init_path = cfg["init"].get<std::string>();
        if (!fs::exists(*init_path)) throw ConfigError("init field not found: " + *init_path);
    }
    prepare_out_dir(fl.out_dir);
    std::string field_path = out_path(fl, cfg, "field", "field.json");
    std::string report_path = out_path(fl, cfg, "report", "report.json");
    std::string trace_path = out_path(fl, cfg, "trace", "trace.csv");

    auto grid = std::make_shared<Grid>(rasterize(dom, h, params.threads));
    std::optional<ProjectionField> init;
    if (init_path) {
        auto [idom, ifield] = field_from_json(read_json(*init_path), params.threads);
        init = std::move(ifield);
    }
    MinimizeReport rep = minimize(dom, grid, params, std::move(init));
    write_text_atomic(field_path, field_to_json(dom, rep.field).dump() + "\n");
    write_text_atomic(report_path, minimize_report_to_json(rep, params).dump(2) + "\n");
    write_text_atomic(trace_path, trace_csv(rep.trace));
    print_summary(Json{{"command", "minimize"},
                       {"h", h},
                       {"objective", rep.objective},
                       {"residual_l2", rep.residual_l2},
                       {"boundary", rep.boundary},
                       {"iterations", rep.iterations},
                       {"converged", rep.converged},
                       {"stalled", rep.stalled},
                       {"field", field_path}});
    return 0;
}

int cmd_tubularity(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(cfg, {"domain", "ladder", "tubularity", "reference", "outputs"},
                           "tubularity config");
    check_output_keys(cfg, {"report", "csv"});
    Domain dom = domain_from_json(detail::need(cfg, "domain"));
    const Json& lad = detail::need(cfg, "ladder");
    if (!lad.is_array() || lad.empty()) throw ConfigError("ladder must be a spacing array");
    std::vector<double> hs;
    for (const Json& v : lad) hs.push_back(v.get<double>());
    TubularityParams params;
    if (cfg.contains("tubularity")) {
        const Json& t = cfg["tubularity"];
        detail::reject_unknown(t,
                               {"minimize", "restarts", "obstruction_floor", "iter_budget",
                                "flow_budget", "chain_rungs", "warm_iters"},
                               "tubularity params");
        if (t.contains("minimize")) params.minimize = minimize_params_from_json(t["minimize"]);
        if (t.contains("restarts")) params.restarts = t["restarts"].get<int>();
        if (t.contains("obstruction_floor"))
            params.obstruction_floor = t["obstruction_floor"].get<double>();
        if (t.contains("iter_budget")) params.iter_budget = t["iter_budget"].get<double>();
        if (t.contains("flow_budget")) params.flow_budget = t["flow_budget"].get<double>();
        if (t.contains("chain_rungs")) params.chain_rungs = t["chain_rungs"].get<bool>();
        if (t.contains("warm_iters")) params.warm_iters = t["warm_iters"].get<int>();
    }
    if (fl.seed) params.minimize.seed = *fl.seed;
    if (fl.threads) params.minimize.threads = *fl.threads;
    std::vector<double> reference;
    if (cfg.contains("reference"))
        for (const Json& v : cfg["reference"]) reference.push_back(v.get<double>());
    prepare_out_dir(fl.out_dir);
    std::string report_path = out_path(fl, cfg, "report", "report.json");
    std::string csv_path = out_path(fl, cfg, "csv", "ladder.csv");

    TubularityReport rep = tubularity_test(dom, hs, params, reference);
    write_text_atomic(report_path, tubularity_report_to_json(rep, params).dump(2) + "\n");
    write_text_atomic(csv_path, ladder_csv(rep.hs, rep.objectives, "h,objective"));
    print_summary(Json{{"command", "tubularity"},
                       {"verdict", rep.verdict},
                       {"objectives", rep.objectives},
                       {"ratios", rep.ratios},
                       {"report", report_path}});
    return 0;
}

BinaryPattern pattern_from_config(const Json& cfg) {
    TubularDomain tube = tube_from_json(detail::need(cfg, "tube"));
    bool adapted = cfg.contains("adapted") && cfg["adapted"].get<bool>();
    if (cfg.contains("interfaces")) {
        if (adapted) throw ConfigError("adapted layout applies to band counts only");
        BinaryPattern pat{std::move(tube), {}};
        for (const Json& r : cfg["interfaces"]) pat.interfaces.push_back(r.get<double>());
        pat.validate();
        return pat;
    }
    int bands = detail::need(cfg, "bands").get<int>();
    if (adapted) {
        double eps = cfg.contains("eps") ? cfg["eps"].get<double>() : 0.0;
        return make_adapted_stripes(tube, bands, eps);
    }
    double fraction = cfg.contains("fraction") ? cfg["fraction"].get<double>() : 0.5;
    return make_stripes(tube, bands, fraction);
}

int cmd_stripes(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(
        cfg, {"tube", "bands", "interfaces", "fraction", "adapted", "eps", "render", "outputs"},
        "stripes config");
    check_output_keys(cfg, {"pattern", "svg"});
    RenderSpec spec =
        cfg.contains("render") ? render_spec_from_json(cfg["render"]) : RenderSpec{};
    prepare_out_dir(fl.out_dir);
    std::string pat_path = out_path(fl, cfg, "pattern", "pattern.json");
    std::string svg_path = out_path(fl, cfg, "svg", "pattern.svg");

    BinaryPattern pat = pattern_from_config(cfg);
    write_text_atomic(pat_path, pattern_to_json(pat).dump(2) + "\n");
    write_text_atomic(svg_path, render_pattern_svg(pat, spec));
    print_summary(Json{{"command", "stripes"},
                       {"bands", pat.interfaces.size() / 2},
                       {"mass_fraction", pat.mass_fraction()},
                       {"admissible", pat.admissible()},
                       {"pattern", pat_path},
                       {"svg", svg_path}});
    return 0;
}

int cmd_energy(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(
        cfg, {"pattern", "tube", "eps", "ladder", "adapted", "method", "options", "outputs"},
        "energy config");
    check_output_keys(cfg, {"energy", "csv"});
    std::optional<TransportMethod> method;
    if (cfg.contains("method")) method = method_from_json(cfg);
    MkOptions opt;
    if (cfg.contains("options")) {
        detail::reject_unknown(cfg["options"], {"h", "sector_fold"}, "transport options");
        if (cfg["options"].contains("h")) opt.h = cfg["options"]["h"].get<double>();
        if (cfg["options"].contains("sector_fold"))
            opt.sector_fold = cfg["options"]["sector_fold"].get<int>();
    }
    prepare_out_dir(fl.out_dir);

    if (cfg.contains("pattern")) {
        if (cfg.contains("ladder") || cfg.contains("adapted"))
            throw ConfigError("a fixed pattern takes a single eps");
        BinaryPattern pat = pattern_from_json(cfg["pattern"]);
        double eps = detail::need_num(cfg, "eps");
        std::string energy_path = out_path(fl, cfg, "energy", "energy.json");
        EnergyBreakdown e = energy_suite(pat, eps, method, opt);
        write_text_atomic(energy_path, energy_to_json(e).dump(2) + "\n");
        print_summary(Json{{"command", "energy"},
                           {"eps", eps},
                           {"F", e.F},
                           {"G", e.G},
                           {"H", e.H},
                           {"admissible", e.admissible},
                           {"energy", energy_path}});
        return 0;
    }
    // recovery ladder: equal or adapted band patterns at each eps
    TubularDomain tube = tube_from_json(detail::need(cfg, "tube"));
    const Json& lad = detail::need(cfg, "ladder");
    if (!lad.is_array() || lad.empty()) throw ConfigError("ladder must be an eps array");
    std::vector<double> eps_list;
    for (const Json& v : lad) eps_list.push_back(v.get<double>());
    bool adapted = cfg.contains("adapted") && cfg["adapted"].get<bool>();
    std::string csv_path = out_path(fl, cfg, "csv", "energy_ladder.csv");
    auto ladder = recovery_ladder(tube, eps_list, method, adapted, opt);
    write_text_atomic(csv_path, energy_ladder_csv(ladder));
    Json gs = Json::array();
    for (const EnergyBreakdown& e : ladder) gs.push_back(e.G);
    print_summary(
        Json{{"command", "energy"}, {"ladder", eps_list}, {"G", gs}, {"csv", csv_path}});
    return 0;
}

int cmd_render(const CommonFlags& fl) {
    Json cfg = load_config(fl);
    detail::reject_unknown(cfg, {"field", "pattern", "render", "outputs"}, "render config");
    check_output_keys(cfg, {"svg"});
    if (cfg.contains("field") == cfg.contains("pattern"))
        throw ConfigError("render takes exactly one of field or pattern");
    RenderSpec spec =
        cfg.contains("render") ? render_spec_from_json(cfg["render"]) : RenderSpec{};
    std::string in_path = (cfg.contains("field") ? cfg["field"] : cfg["pattern"])
                              .get<std::string>();
    if (!fs::exists(in_path)) throw ConfigError("input not found: " + in_path);
    prepare_out_dir(fl.out_dir);
    std::string svg_path = out_path(fl, cfg, "svg", "render.svg");

    std::string svg;
    if (cfg.contains("field")) {
        auto [dom, f] = field_from_json(read_json(in_path), config_threads(fl));
        svg = render_field_svg(f, spec);
    } else {
        svg = render_pattern_svg(pattern_from_json(read_json(in_path)), spec);
    }
    write_text_atomic(svg_path, svg);
    print_summary(Json{{"command", "render"}, {"svg", svg_path}, {"bytes", svg.size()}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stripe pattern toolkit"};
    app.require_subcommand(1);
    CommonFlags fl;
    std::string active;
    for (const char* name : {"domain", "exact", "minimize", "tubularity", "stripes", "energy",
                             "render"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", fl.config_path, "JSON config file")->required();
        sub->add_option("--out", fl.out_dir, "output directory (default .)");
        sub->add_option("--seed", fl.seed, "override the random seed");
        sub->add_option("--h", fl.h, "override the grid spacing");
        sub->add_option("--threads", fl.threads, "cap kernel parallelism");
        sub->callback([&active, name] { active = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (active == "domain") return cmd_domain(fl);
        if (active == "exact") return cmd_exact(fl);
        if (active == "minimize") return cmd_minimize(fl);
        if (active == "tubularity") return cmd_tubularity(fl);
        if (active == "stripes") return cmd_stripes(fl);
        if (active == "energy") return cmd_energy(fl);
        if (active == "render") return cmd_render(fl);
        std::cerr << "unknown command\n";
        return 2;
    } catch (const ConfigError& e) {
        print_summary(Json{{"error", e.what()}, {"command", active}});
        return 2;
    } catch (const ParseError& e) {
        print_summary(Json{{"error", e.what()}, {"command", active}});
        return 2;
    } catch (const std::exception& e) {
        print_summary(Json{{"error", e.what()}, {"command", active}});
        return 1;
    }
}
