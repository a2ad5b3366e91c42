#include "commands.hpp"

#include "critsense/criticality.hpp"
#include "critsense/csv.hpp"
#include "critsense/estimation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

namespace critsense::cli {

namespace {

CsvTable provenance(const RunContext& ctx, std::vector<std::string> header) {
    CsvTable t(std::move(header));
    t.add_comment("critsense " + ctx.command + (ctx.quick ? " --quick" : ""));
    t.add_comment("seed: " + std::to_string(ctx.seed));
    t.add_comment("config: " + ctx.config.dump());
    return t;
}

MethodSet parse_methods(const json& list) {
    MethodSet m{false, false, false};
    for (const auto& e : list) {
        switch (method_from_string(e.get<std::string>())) {
            case Method::moment: m.moment = true; break;
            case Method::classical: m.classical = true; break;
            case Method::quantum: m.quantum = true; break;
        }
    }
    if (!m.moment && !m.classical && !m.quantum) throw std::invalid_argument("methods must not be empty");
    return m;
}

MomentDerivative parse_derivative(const std::string& s) {
    if (s == "stencil") return MomentDerivative::stencil;
    if (s == "grid") return MomentDerivative::grid;
    throw std::invalid_argument("moment_derivative must be stencil or grid");
}

GapOptions parse_gap(const json& c) {
    GapOptions g;
    const auto& levels = c.at("gap_levels");
    if (levels.size() != 2) throw std::invalid_argument("gap_levels needs exactly two entries");
    g.lower_level = levels[0].get<int>();
    g.upper_level = levels[1].get<int>();
    g.coarse_step = c.at("gap_step").get<double>();
    return g;
}

std::vector<std::string> method_columns(const MethodSet& m, const std::string& prefix = "") {
    std::vector<std::string> cols;
    if (m.moment) cols.push_back(prefix + "chi_mom");
    if (m.classical) cols.push_back(prefix + "chi_cl");
    if (m.quantum) cols.push_back(prefix + "chi_q");
    return cols;
}

struct PendingFile {
    std::string name;
    std::string content;
};

CommandOutput commit(const RunContext& ctx, const std::vector<PendingFile>& files, std::vector<std::string> warnings) {
    CommandOutput out;
    out.warnings = std::move(warnings);
    for (const auto& f : files) {
        const auto path = ctx.out_dir / f.name;
        try {
            write_file_atomic(path, f.content);
        } catch (const std::exception& e) {
            throw CliError("io", e.what());
        }
        out.files.push_back(path);
    }
    return out;
}

std::string curve_csv(const RunContext& ctx, const SusceptibilityCurve& c) {
    std::vector<std::string> header{"lambda"};
    for (auto& s : method_columns(c.which)) header.push_back(s);
    header.insert(header.end(), {"mean_jz", "var_jz"});
    auto t = provenance(ctx, header);
    t.add_comment("N=" + std::to_string(c.n_particles) + " delta=" + format_double(c.delta) +
                  " T=" + format_double(c.temperature) + " epsilon0=" + format_double(c.epsilon0));
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> row{c.lambda_grid[i]};
        if (c.which.moment) row.push_back(c.chi_mom[i]);
        if (c.which.classical) row.push_back(c.chi_cl[i]);
        if (c.which.quantum) row.push_back(c.chi_q[i]);
        row.push_back(c.mean[i]);
        row.push_back(c.variance[i]);
        t.add_row(row);
    }
    return t.str();
}

CommandOutput cmd_scan(const RunContext& ctx) {
    const json& c = ctx.config;
    ModelParams p;
    p.n_particles = c.at("n_particles").get<int>();
    p.tunneling = c.at("tunneling").get<double>();
    p.imbalance = c.at("delta").get<double>();
    p.validate();
    const MethodSet methods = parse_methods(c.at("methods"));
    PointOptions po;
    po.epsilon0 = c.at("epsilon0").get<double>();
    po.rank_cutoff = c.at("rank_cutoff").get<double>();
    po.moment_derivative = parse_derivative(c.at("moment_derivative").get<std::string>());
    const std::string mode = c.at("mode").get<std::string>();

    std::vector<PendingFile> files;
    std::vector<std::string> warnings;
    if (mode == "temperature") {
        double lambda;
        const auto& lv = c.at("lambda");
        if (lv.is_number()) {
            lambda = lv.get<double>();
        } else if (lv.get<std::string>() == "critical") {
            ModelParams gp = p;
            gp.imbalance = 0.0;
            lambda = locate_critical_gap(gp, p.n_particles, -1.5, -0.8).lambda_c_N;
        } else {
            throw std::invalid_argument("lambda must be a number or \"critical\"");
        }
        const auto temps = c.at("temperatures").get<std::vector<double>>();
        if (temps.empty()) throw std::invalid_argument("temperatures must not be empty");
        const auto curve = scan_temperature(p, lambda, temps, methods, po, ctx.threads);
        std::vector<std::string> header{"T"};
        for (auto& s : method_columns(methods)) header.push_back(s);
        header.push_back("rank");
        auto t = provenance(ctx, header);
        t.add_comment("N=" + std::to_string(p.n_particles) + " delta=" + format_double(p.imbalance) +
                      " lambda=" + format_double(lambda));
        for (std::size_t i = 0; i < temps.size(); ++i) {
            const auto& pt = curve.points[i];
            std::vector<std::string> row{format_double(temps[i])};
            if (methods.moment) row.push_back(format_double(pt.chi_mom));
            if (methods.classical) row.push_back(format_double(pt.chi_cl));
            if (methods.quantum) row.push_back(format_double(pt.chi_q));
            row.push_back(std::to_string(pt.rank));
            t.add_row(row);
        }
        files.push_back({"scan_temperature.csv", t.str()});
        return commit(ctx, files, warnings);
    }
    if (mode != "lambda") throw std::invalid_argument("mode must be lambda or temperature");

    ScanConfig sc;
    sc.params = p;
    sc.lambda_grid = uniform_grid(c.at("lambda_min").get<double>(), c.at("lambda_max").get<double>(),
                                  c.at("lambda_step").get<double>());
    sc.temperature = c.at("temperature").get<double>();
    sc.epsilon0 = po.epsilon0;
    sc.rank_cutoff = po.rank_cutoff;
    sc.moment_derivative = po.moment_derivative;
    sc.which = methods;
    sc.threads = ctx.threads;
    const auto curve = scan_lambda(sc);
    files.push_back({"scan.csv", curve_csv(ctx, curve)});

    auto peaks = provenance(ctx, {"method", "pass", "peak_lambda", "peak_value", "interior"});
    for (Method m : {Method::moment, Method::classical, Method::quantum}) {
        if (!methods.contains(m)) continue;
        const auto pk = find_peak(curve.lambda_grid, curve.values(m));
        peaks.add_row({std::string(to_string(m)), "coarse", format_double(pk.location), format_double(pk.value),
                       pk.interior ? "1" : "0"});
        if (!pk.interior) warnings.push_back(std::string(to_string(m)) + " peak on the edge of the lambda grid");
    }
    if (c.at("refine").get<bool>()) {
        const Method rm = method_from_string(c.at("refine_method").get<std::string>());
        if (!methods.contains(rm)) throw std::invalid_argument("refine_method must be one of the scanned methods");
        const double centre = find_peak(curve.lambda_grid, curve.values(rm)).location;
        ScanConfig fine = sc;
        fine.lambda_grid = uniform_grid(centre - c.at("refine_half_width").get<double>(),
                                        centre + c.at("refine_half_width").get<double>(),
                                        c.at("refine_step").get<double>());
        const auto refined = scan_lambda(fine);
        files.push_back({"scan_refined.csv", curve_csv(ctx, refined)});
        for (Method m : {Method::moment, Method::classical, Method::quantum}) {
            if (!methods.contains(m)) continue;
            const auto pk = find_peak(refined.lambda_grid, refined.values(m));
            peaks.add_row({std::string(to_string(m)), "refined", format_double(pk.location), format_double(pk.value),
                           pk.interior ? "1" : "0"});
        }
    }
    files.push_back({"scan_peaks.csv", peaks.str()});
    return commit(ctx, files, warnings);
}

void add_fit_row(CsvTable& t, const std::string& name, const PowerLawFit& f, double expected) {
    t.add_row({name, format_double(f.exponent), format_double(f.prefactor), format_double(f.r_squared),
               std::to_string(f.points_used), format_double(expected)});
}

CommandOutput cmd_scaling(const RunContext& ctx) {
    const json& c = ctx.config;
    const auto n_list = c.at("n_list").get<std::vector<int>>();
    if (n_list.empty()) throw std::invalid_argument("n_list must not be empty");
    ModelParams p;
    p.tunneling = c.at("tunneling").get<double>();
    ScalingOptions o;
    o.temperature = c.at("temperature").get<double>();
    o.gap_delta = c.at("gap_delta").get<double>();
    o.bracket_lo = c.at("bracket_lo").get<double>();
    o.bracket_hi = c.at("bracket_hi").get<double>();
    o.gap = parse_gap(c);
    o.delta.delta_min = c.at("delta_min").get<double>();
    o.delta.delta_max = c.at("delta_max").get<double>();
    o.delta.delta_points = c.at("delta_points").get<int>();
    o.delta.window_lo = c.at("window_lo").get<double>();
    o.delta.window_hi = c.at("window_hi").get<double>();
    o.delta.coarse_step = c.at("coarse_step").get<double>();
    o.delta.refine.half_width = c.at("refine_half_width").get<double>();
    o.delta.refine.step = c.at("refine_step").get<double>();
    o.delta.epsilon0 = c.at("epsilon0").get<double>();
    o.delta.rank_cutoff = c.at("rank_cutoff").get<double>();
    o.delta.moment_derivative = parse_derivative(c.at("moment_derivative").get<std::string>());
    o.methods = parse_methods(c.at("methods"));
    o.threads = ctx.threads;

    const auto study = scaling_study(n_list, p, o);
    std::vector<std::string> warnings;

    std::vector<std::string> header{"N", "lambda_c_N", "gap_at_min"};
    const std::string tags[3] = {"mom", "cl", "q"};
    for (Method m : {Method::moment, Method::classical, Method::quantum}) {
        if (!o.methods.contains(m)) continue;
        const auto& tag = tags[method_index(m)];
        header.insert(header.end(), {"delta_star_" + tag, "peak_" + tag, "peak_ok_" + tag, "chi_" + tag,
                                     "chi_" + tag + "_per_N"});
    }
    auto table = provenance(ctx, header);
    for (const auto& r : study.rows) {
        std::vector<std::string> row{std::to_string(r.n_particles), format_double(r.lambda_c_N),
                                     format_double(r.gap_at_min)};
        for (Method m : {Method::moment, Method::classical, Method::quantum}) {
            if (!o.methods.contains(m)) continue;
            const auto i = method_index(m);
            row.insert(row.end(), {format_double(r.delta_star[i]), format_double(r.peak_location[i]),
                                   r.within_tolerance[i] ? "1" : "0", format_double(r.chi[i]),
                                   format_double(r.chi[i] / r.n_particles)});
            if (!r.within_tolerance[i]) {
                warnings.push_back("N=" + std::to_string(r.n_particles) + ": " + std::string(to_string(m)) +
                                   " peak not within tolerance of lambda_c(N)");
            }
        }
        table.add_row(row);
    }

    auto fits = provenance(ctx, {"quantity", "exponent", "prefactor", "r_squared", "points_used", "expected_exponent"});
    if (study.rows.size() < 3) {
        fits.add_comment("fit refused: power-law fits need at least 3 values of N");
        warnings.push_back("fit refused: power-law fits need at least 3 values of N");
    } else {
        for (Method m : {Method::moment, Method::classical, Method::quantum}) {
            const auto& f = study.fit[method_index(m)];
            if (f) add_fit_row(fits, "chi_" + tags[method_index(m)] + "_per_N", *f, exponents::susceptibility_per_particle);
        }
        if (study.shift_fit) add_fit_row(fits, "lambda_c_shift", *study.shift_fit, exponents::critical_shift);
    }
    return commit(ctx, {{"scaling_table.csv", table.str()}, {"scaling_fits.csv", fits.str()}}, warnings);
}

CommandOutput cmd_critical_point(const RunContext& ctx) {
    const json& c = ctx.config;
    const auto n_list = c.at("n_list").get<std::vector<int>>();
    if (n_list.empty()) throw std::invalid_argument("n_list must not be empty");
    ModelParams p;
    p.tunneling = c.at("tunneling").get<double>();
    p.imbalance = c.at("delta").get<double>();
    const auto gap = parse_gap(c);
    auto t = provenance(ctx, {"N", "lambda_c_N", "gap_at_min", "bracket_lo", "bracket_hi", "shift"});
    std::vector<double> ns, shifts;
    for (int n : n_list) {
        const auto r = locate_critical_gap(p, n, c.at("bracket_lo").get<double>(), c.at("bracket_hi").get<double>(), gap);
        t.add_row(std::vector<double>{static_cast<double>(n), r.lambda_c_N, r.gap_at_min, r.bracket_lo, r.bracket_hi,
                                      lambda_critical - r.lambda_c_N});
        ns.push_back(n);
        shifts.push_back(lambda_critical - r.lambda_c_N);
    }
    std::vector<PendingFile> files{{"critical_points.csv", t.str()}};
    std::vector<std::string> warnings;
    if (ns.size() >= 3 && std::all_of(shifts.begin(), shifts.end(), [](double s) { return s > 0.0; })) {
        auto f = provenance(ctx, {"quantity", "exponent", "prefactor", "r_squared", "points_used", "expected_exponent"});
        add_fit_row(f, "lambda_c_shift", fit_power_law(ns, shifts), exponents::critical_shift);
        files.push_back({"critical_fit.csv", f.str()});
    } else {
        warnings.push_back("shift fit skipped: needs at least 3 values of N with lambda_c(N) < -1");
    }
    return commit(ctx, files, warnings);
}

OrderParameterFamily parse_family(const json& j) {
    OrderParameterFamily f;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k == "kind") {
            const auto kind = it.value().get<std::string>();
            if (kind == "tanh") {
                f.kind = OrderParameterFamily::Kind::tanh;
            } else if (kind == "sqrt") {
                f.kind = OrderParameterFamily::Kind::sqrt;
            } else {
                throw ConfigError("family.kind must be tanh or sqrt");
            }
        } else if (k == "critical") {
            f.critical = it.value().get<double>();
        } else if (k == "offset") {
            f.offset = it.value().get<double>();
        } else if (k == "scale") {
            f.scale = it.value().get<double>();
        } else if (k == "smoothing") {
            f.smoothing = it.value().get<double>();
        } else if (k == "sigma") {
            f.sigma = it.value().get<double>();
        } else if (k == "asymmetry") {
            f.asymmetry = it.value().get<double>();
        } else {
            throw ConfigError("unknown config key 'family." + k + "'");
        }
    }
    if (!(f.sigma > 0.0)) throw ConfigError("family.sigma must be > 0");
    return f;
}

struct SeriesSetup {
    MeasurementSeries series;
    std::optional<OrderParameterFamily> family;
    AnalysisOptions analysis;
    BootstrapOptions boot;
};

SeriesSetup series_setup(const RunContext& ctx) {
    const json& c = ctx.config;
    SeriesSetup s;
    const auto input = c.at("input_csv").get<std::string>();
    if (!input.empty()) {
        try {
            s.series = read_series_csv(input);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw CliError("io", e.what());
        }
    } else {
        s.family = parse_family(c.at("family"));
        const auto grid = uniform_grid(c.at("a_min").get<double>(), c.at("a_max").get<double>(), c.at("a_step").get<double>());
        const int n = c.at("n_samples").get<int>();
        if (n < 1) throw std::invalid_argument("n_samples must be >= 1");
        s.series = synth_family(*s.family, grid, static_cast<std::size_t>(n), ctx.seed);
    }
    s.analysis.chi_cl_histogram.bin_width = c.at("chi_cl_bin_width").get<double>();
    s.analysis.fit_histogram.bin_width = c.at("fit_bin_width").get<double>();
    const auto scale = c.at("fit_scale").get<std::string>();
    if (scale != "linear" && scale != "log") throw std::invalid_argument("fit_scale must be linear or log");
    s.analysis.fit.scale = scale == "log" ? FitScale::log : FitScale::linear;
    s.analysis.fit.equal_amplitudes = c.at("equal_amplitudes").get<bool>();

    s.boot.n_replicas = c.at("n_replicas").get<int>();
    if (s.boot.n_replicas < 100) throw std::invalid_argument("n_replicas must be >= 100");
    s.boot.replica_bins = static_cast<std::size_t>(c.at("replica_bins").get<int>());
    s.boot.max_failure_fraction = c.at("max_failure_fraction").get<double>();
    s.boot.seed = replica_seed(ctx.seed, 0xB007ULL);
    s.boot.threads = ctx.threads;
    s.boot.analysis = s.analysis;
    s.boot.keep_replicas = false;
    return s;
}

std::string replicas_csv(const RunContext& ctx, const SeriesAnalysis& a, const BootstrapResult& b) {
    auto t = provenance(ctx, {"a_s", "bin_lo", "bin_hi", "count"});
    t.add_comment("estimator: " + std::string(to_string(b.estimator)) + " background: " +
                  std::string(to_string(b.background_kind)));
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const auto& h = b.points[i].histogram;
        for (std::size_t k = 0; k < h.counts.size(); ++k) {
            const double lo = h.lo + static_cast<double>(k) * h.bin_width;
            t.add_row(std::vector<double>{a.scattering_lengths[i], lo, lo + h.bin_width, h.counts[k]});
        }
    }
    return t.str();
}

std::string display_histograms_csv(const RunContext& ctx, const MeasurementSeries& series, const SeriesAnalysis& a) {
    const HistogramSpec spec{ctx.config.at("display_bin_width").get<double>(), -1.0, 1.0};
    auto t = provenance(ctx, {"a_s", "z_lo", "z_hi", "h", "fit"});
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto h = build_histogram(series.records[i], spec);
        const auto model = mixture_bin_masses(a.fits[i], h);
        for (std::size_t k = 0; k < h.bins(); ++k) {
            t.add_row(std::vector<double>{series.scattering_lengths[i], h.left_edge(k), h.left_edge(k + 1), h.mass[k],
                                          model[k]});
        }
    }
    return t.str();
}

void note_failures(std::vector<std::string>& warnings, const BootstrapResult& b) {
    if (b.failures > 0 || b.redraws > 0) {
        warnings.push_back(std::string(to_string(b.estimator)) + ": " + std::to_string(b.redraws) + " replicas redrawn, " +
                           std::to_string(b.failures) + " lost");
    }
}

CommandOutput cmd_pipeline(const RunContext& ctx) {
    auto s = series_setup(ctx);
    const auto a = analyze_series(s.series, s.analysis);
    const auto bm = bootstrap(a, Estimator::chi_mom, s.boot);
    const auto bc = bootstrap(a, Estimator::chi_cl, s.boot);

    std::vector<std::string> header{"a_s",     "zbar",         "sigma_z",        "amp_plus",  "amp_minus",
                                    "fit_converged", "chi_mom", "chi_mom_err", "chi_mom_centre", "chi_cl",
                                    "chi_cl_err", "chi_cl_centre", "one_sided"};
    if (s.family) header.push_back("chi_mom_true");
    auto t = provenance(ctx, header);
    t.add_comment("replicas: " + std::to_string(s.boot.n_replicas) + " chi_mom background: exponential, chi_cl background: none");
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < a.scattering_lengths.size(); ++i) {
        const auto& f = a.fits[i];
        std::vector<std::string> row{format_double(a.scattering_lengths[i]), format_double(f.separation),
                                     format_double(f.width), format_double(f.amp_plus), format_double(f.amp_minus),
                                     f.converged ? "1" : "0", format_double(a.chi_mom[i].value),
                                     format_double(bm.points[i].width), format_double(bm.points[i].centre),
                                     format_double(a.chi_cl[i].value), format_double(bc.points[i].width),
                                     format_double(bc.points[i].centre), a.chi_mom[i].one_sided ? "1" : "0"};
        if (s.family) row.push_back(format_double(s.family->chi_mom(a.scattering_lengths[i])));
        t.add_row(row);
        if (!f.converged) warnings.push_back("double-Gaussian fit did not converge at a_s=" + format_double(a.scattering_lengths[i]));
    }
    note_failures(warnings, bm);
    note_failures(warnings, bc);

    std::vector<PendingFile> files{{"pipeline_results.csv", t.str()},
                                   {"display_histograms.csv", display_histograms_csv(ctx, s.series, a)}};
    if (ctx.config.at("save_replicas").get<bool>()) {
        files.push_back({"replicas_chi_mom.csv", replicas_csv(ctx, a, bm)});
        files.push_back({"replicas_chi_cl.csv", replicas_csv(ctx, a, bc)});
    }
    return commit(ctx, files, warnings);
}

CommandOutput cmd_bootstrap(const RunContext& ctx) {
    auto s = series_setup(ctx);
    const auto estimator = estimator_from_string(ctx.config.at("estimator").get<std::string>());
    const auto bg_name = ctx.config.at("background").get<std::string>();
    const auto background = bg_name == "auto" ? default_background(estimator) : background_from_string(bg_name);
    const auto a = analyze_series(s.series, s.analysis);
    const auto b = bootstrap(a, estimator, s.boot, background);

    auto t = provenance(ctx, {"a_s", "estimate", "centre", "width", "amplitude", "background_amplitude",
                              "background_decay", "degenerate"});
    t.add_comment("estimator: " + std::string(to_string(estimator)) + " background: " + std::string(to_string(background)) +
                  " replicas: " + std::to_string(b.n_replicas) + " failures: " + std::to_string(b.failures));
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const auto& p = b.points[i];
        t.add_row({format_double(a.scattering_lengths[i]), format_double(p.estimate), format_double(p.centre),
                   format_double(p.width), format_double(p.fit.amplitude), format_double(p.fit.background_amplitude),
                   format_double(p.fit.background_decay), p.fit.degenerate ? "1" : "0"});
    }
    std::vector<std::string> warnings;
    note_failures(warnings, b);
    const std::string tag(to_string(estimator));
    return commit(ctx, {{"bootstrap_" + tag + ".csv", t.str()}, {"replicas_" + tag + ".csv", replicas_csv(ctx, a, b)}},
                  warnings);
}

std::string json_error(const std::string& kind, const std::string& message) {
    return json{{"error", kind}, {"message", message}}.dump();
}

}  // namespace

CommandOutput run_command(const RunContext& ctx) {
    std::error_code ec;
    if (!std::filesystem::is_directory(ctx.out_dir, ec)) {
        throw CliError("io", "output directory does not exist: " + ctx.out_dir.string());
    }
    try {
        if (ctx.command == "scan") return cmd_scan(ctx);
        if (ctx.command == "scaling") return cmd_scaling(ctx);
        if (ctx.command == "critical-point") return cmd_critical_point(ctx);
        if (ctx.command == "pipeline") return cmd_pipeline(ctx);
        if (ctx.command == "bootstrap") return cmd_bootstrap(ctx);
    } catch (const CliError&) {
        throw;
    } catch (const ConfigError& e) {
        throw CliError("config", e.what());
    } catch (const json::exception& e) {
        throw CliError("config", e.what());
    } catch (const std::invalid_argument& e) {
        throw CliError("config", e.what());
    } catch (const std::exception& e) {
        throw CliError("compute", e.what());
    }
    throw CliError("usage", "unknown command '" + ctx.command + "'");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fidelity susceptibilities of the bosonic Josephson junction and the estimation pipeline", "critsense"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "critsense 0.1.0");

    struct Flags {
        std::string config;
        std::string out;
        std::uint64_t seed = 1;
        unsigned threads = 0;
        bool quick = false;
    };
    std::vector<std::pair<CLI::App*, std::string>> subs;
    Flags flags;
    for (const auto& sc : schemas()) {
        auto* sub = app.add_subcommand(sc.name, sc.summary);
        sub->add_option("--config", flags.config, "JSON config file");
        sub->add_option("--out", flags.out, "output directory (must exist)")->required();
        sub->add_option("--seed", flags.seed, "RNG seed (u64)")->capture_default_str();
        sub->add_option("--threads", flags.threads, "worker threads, 0 = all")->capture_default_str();
        sub->add_flag("--quick", flags.quick, "reduced grids and replicas");
        sub->footer(keys_help(sc.name));
        subs.emplace_back(sub, sc.name);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        out << (parsed.empty() ? app.help() : parsed.front()->help());
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << "critsense 0.1.0\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json_error("usage", e.what()) << "\n";
        return 2;
    }

    RunContext ctx;
    for (auto& [sub, name] : subs) {
        if (sub->parsed()) ctx.command = name;
    }
    ctx.out_dir = flags.out;
    ctx.seed = flags.seed;
    ctx.threads = flags.threads;
    ctx.quick = flags.quick;
    try {
        json user;
        if (!flags.config.empty()) user = load_config_file(flags.config);
        ctx.config = resolve_config(ctx.command, user, ctx.quick);
        const auto result = run_command(ctx);
        for (const auto& w : result.warnings) err << "warning: " << w << "\n";
        for (const auto& f : result.files) out << f.string() << "\n";
        return 0;
    } catch (const CliError& e) {
        err << json_error(e.kind(), e.what()) << "\n";
        return e.exit_code();
    } catch (const ConfigError& e) {
        err << json_error("config", e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << json_error("compute", e.what()) << "\n";
        return 1;
    }
}

}  // namespace critsense::cli
