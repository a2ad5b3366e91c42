#include "config.hpp"

#include <fstream>
#include <sstream>

namespace critsense::cli {

namespace {

json null() { return json(); }

const json all_methods = json::array({"moment", "classical", "quantum"});

json default_family() {
    return json{{"kind", "tanh"},  {"critical", -1.75}, {"offset", 0.5}, {"scale", 0.2},
                {"smoothing", 0.6}, {"sigma", 0.1},      {"asymmetry", 0.0}};
}

std::vector<KeySpec> series_keys() {
    return {
        {"input_csv", "string", "", null(), "measurement CSV (columns scattering_length_a0, z); empty = synthesise from family"},
        {"family", "object", default_family(), null(),
         "synthetic order parameter {kind: tanh|sqrt, critical, offset, scale, smoothing, sigma, asymmetry}"},
        {"a_min", "number", -2.35, null(), "first scattering length of the synthetic grid (a0)"},
        {"a_max", "number", -1.15, null(), "last scattering length of the synthetic grid (a0)"},
        {"a_step", "number", 0.05, null(), "synthetic grid spacing (a0)"},
        {"n_samples", "int", 1000000, 100000, "samples per scattering length"},
        {"chi_cl_bin_width", "number", 0.05, null(), "histogram bin width for chi_cl"},
        {"fit_bin_width", "number", 0.05, null(), "histogram bin width for the double-Gaussian fits"},
        {"display_bin_width", "number", 0.08, null(), "bin width of the emitted display histograms"},
        {"fit_scale", "string", "linear", null(), "double-Gaussian residuals: linear | log"},
        {"equal_amplitudes", "bool", false, null(), "constrain A+ = A-"},
        {"n_replicas", "int", 3000, 100, "bootstrap replicas"},
        {"replica_bins", "int", 100, null(), "bins of the per-point replica histogram"},
        {"max_failure_fraction", "number", 0.1, null(), "abort when more replicas than this fraction fail"},
        {"save_replicas", "bool", false, null(), "also write the replica histograms"},
    };
}

std::vector<CommandSchema> build_schemas() {
    std::vector<CommandSchema> s;
    s.push_back({"scan",
                 "susceptibility curves chi(lambda) at fixed T, or chi(T) at fixed lambda",
                 {
                     {"mode", "string", "lambda", null(), "lambda | temperature"},
                     {"n_particles", "int", 1000, 200, "N"},
                     {"tunneling", "number", 1.0, null(), "Omega (energy unit)"},
                     {"delta", "number", 2e-3, null(), "imbalance delta / Omega"},
                     {"temperature", "number", 0.0, null(), "T / Omega for mode=lambda"},
                     {"lambda_min", "number", -1.6, null(), "first lambda of the coarse grid"},
                     {"lambda_max", "number", -0.4, null(), "last lambda of the coarse grid"},
                     {"lambda_step", "number", 2e-3, 1e-2, "coarse grid step"},
                     {"refine", "bool", true, null(), "rescan around the coarse peak"},
                     {"refine_method", "string", "quantum", null(), "method whose peak centres the refinement"},
                     {"refine_half_width", "number", 0.05, null(), "half width of the refinement window"},
                     {"refine_step", "number", 2e-4, 1e-3, "refinement grid step"},
                     {"temperatures", "number[]", json::array({0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}),
                      null(), "T / Omega values for mode=temperature"},
                     {"lambda", "number|string", "critical", null(),
                      "lambda for mode=temperature: a number, or \"critical\" for the gap minimum"},
                     {"methods", "string[]", all_methods, null(), "subset of moment, classical, quantum"},
                     {"moment_derivative", "string", "stencil", null(), "stencil | grid"},
                     {"epsilon0", "number", 1e-4, null(), "fidelity offset scale"},
                     {"rank_cutoff", "number", 1e-12, null(), "drop thermal states below this Boltzmann factor"},
                 }});
    s.push_back({"scaling",
                 "critical point, optimized delta and chi(lambda_c(N)) versus N, with power-law fits",
                 {
                     {"n_list", "int[]", json::array({200, 300, 500, 700, 1000}), json::array({60, 80, 100, 130}), "values of N"},
                     {"tunneling", "number", 1.0, null(), "Omega"},
                     {"temperature", "number", 0.0, null(), "T / Omega"},
                     {"gap_delta", "number", 0.0, null(), "delta used when locating the gap minimum"},
                     {"bracket_lo", "number", -1.5, null(), "lower end of the gap search"},
                     {"bracket_hi", "number", -0.8, null(), "upper end of the gap search"},
                     {"gap_levels", "int[]", json::array({0, 2}), null(), "levels [lower, upper] of the gap"},
                     {"gap_step", "number", 2e-3, null(), "coarse step of the gap search"},
                     {"delta_min", "number", 1e-6, null(), "smallest delta of the log grid"},
                     {"delta_max", "number", 1e-1, null(), "largest delta of the log grid"},
                     {"delta_points", "int", 25, 9, "points of the log delta grid"},
                     {"window_lo", "number", -1.6, null(), "lambda window for peak search"},
                     {"window_hi", "number", -0.4, null(), "lambda window for peak search"},
                     {"coarse_step", "number", 2e-3, 1e-2, "coarse lambda step of the peak search"},
                     {"refine_half_width", "number", 0.05, null(), "refinement half width"},
                     {"refine_step", "number", 2e-4, 1e-3, "refinement lambda step"},
                     {"methods", "string[]", all_methods, null(), "subset of moment, classical, quantum"},
                     {"moment_derivative", "string", "stencil", null(), "stencil | grid"},
                     {"epsilon0", "number", 1e-4, null(), "fidelity offset scale"},
                     {"rank_cutoff", "number", 1e-12, null(), "drop thermal states below this Boltzmann factor"},
                 }});
    s.push_back({"critical-point",
                 "finite-size critical point lambda_c(N) from the minimum of E_upper - E_lower",
                 {
                     {"n_list", "int[]", json::array({200, 300, 500, 700, 1000}), json::array({50, 100, 200}), "values of N"},
                     {"tunneling", "number", 1.0, null(), "Omega"},
                     {"delta", "number", 0.0, null(), "imbalance delta / Omega"},
                     {"bracket_lo", "number", -1.5, null(), "lower end of the search"},
                     {"bracket_hi", "number", -0.8, null(), "upper end of the search"},
                     {"gap_levels", "int[]", json::array({0, 2}), null(), "levels [lower, upper] of the gap"},
                     {"gap_step", "number", 2e-3, null(), "coarse step"},
                 }});
    auto pipeline = series_keys();
    s.push_back({"pipeline", "synthetic or measured series -> fits -> chi_mom, chi_cl -> bootstrap error bars",
                 pipeline});
    auto boot = series_keys();
    boot.push_back({"estimator", "string", "chi_cl", null(), "chi_mom | chi_cl"});
    boot.push_back({"background", "string", "auto", null(), "none | exponential | auto (exponential for chi_mom)"});
    s.push_back({"bootstrap", "bootstrap one estimator and write its replica histograms and fits", boot});
    return s;
}

bool matches(const std::string& type, const json& v) {
    if (const auto bar = type.find('|'); bar != std::string::npos) {
        return matches(type.substr(0, bar), v) || matches(type.substr(bar + 1), v);
    }
    if (type == "int") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "bool") return v.is_boolean();
    if (type == "string") return v.is_string();
    if (type == "object") return v.is_object();
    if (type.size() > 2 && type.substr(type.size() - 2) == "[]") {
        if (!v.is_array()) return false;
        const std::string inner = type.substr(0, type.size() - 2);
        for (const auto& e : v) {
            if (!matches(inner, e)) return false;
        }
        return true;
    }
    return false;
}

}  // namespace

const std::vector<CommandSchema>& schemas() {
    static const std::vector<CommandSchema> s = build_schemas();
    return s;
}

const CommandSchema& schema(const std::string& command) {
    for (const auto& s : schemas()) {
        if (s.name == command) return s;
    }
    throw ConfigError("unknown command '" + command + "'");
}

json resolve_config(const std::string& command, const json& user, bool quick) {
    const auto& sc = schema(command);
    if (!user.is_null() && !user.is_object()) throw ConfigError("config must be a JSON object");
    json out = json::object();
    for (const auto& k : sc.keys) out[k.name] = (quick && !k.quick_value.is_null()) ? k.quick_value : k.default_value;
    if (user.is_null()) return out;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const KeySpec* spec = nullptr;
        for (const auto& k : sc.keys) {
            if (k.name == it.key()) spec = &k;
        }
        if (!spec) throw ConfigError("unknown config key '" + it.key() + "' for command " + command);
        if (!matches(spec->type, it.value())) throw ConfigError("config key '" + it.key() + "' must be of type " + spec->type);
        out[it.key()] = it.value();
    }
    return out;
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
}

std::string keys_help(const std::string& command) {
    const auto& sc = schema(command);
    std::ostringstream out;
    out << "Config keys (JSON object given with --config):\n";
    for (const auto& k : sc.keys) {
        out << "  " << k.name << " (" << k.type << ", default " << k.default_value.dump();
        if (!k.quick_value.is_null()) out << ", --quick " << k.quick_value.dump();
        out << ")\n      " << k.help << "\n";
    }
    return out.str();
}

}  // namespace critsense::cli
