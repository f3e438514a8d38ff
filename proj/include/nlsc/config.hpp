#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsc/littlewood_paley.hpp"
#include "nlsc/model.hpp"
#include "nlsc/serialize.hpp"

namespace nlsc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key=value run configuration. Every run writes back the fully
/// resolved version (defaults materialized) so outputs are reproducible from
/// the emitted file alone.
struct RunConfig {
    // discretization and model parameters
    int d = 2;
    int m = 64;
    double lambda = 1.0;
    double nu = 0.1;
    double sigma = 0.5;
    double dt = 0.0;       // 0: resolved automatically at setup
    double t_burn = -1.0;  // <0: resolved automatically at setup
    double t_avg = 1000.0;
    std::uint64_t seed = 1;
    int seed_replicates = 1;

    // forcing
    double k_lo = 0.5;
    double k_hi = 2.0;
    int forcing_count = 0;  // 0: every annulus mode
    double eps_wa_target = 1.0;

    // diagnostics
    int n_batches = 50;
    double sample_dt = 0.1;
    std::string cutoff = "smooth";      // smooth | sharp
    std::string scheme = "etd2";        // etd2 | etd1 (first-order cubic term)
    std::string pi_h_form = "consistent";  // consistent | literal
    bool linear = false;
    bool dealias = true;
    bool relax = false;
    std::vector<int> balance_levels = {-1, 0, 1, 2};

    // execution and output
    std::string out_dir = "out";
    int threads = 0;  // 0: NLSC_THREADS env or hardware concurrency

    // sweep
    std::vector<double> sweep_nu, sweep_sigma, sweep_lambda;
    std::string sweep_mode = "zip";  // zip | product

    // spectrum fit window
    double spectrum_fit_lo = 1.0;
    double spectrum_fit_hi = 8.0;

    void validate() const {
        if (d != 2 && d != 3) throw ConfigError("config: d must be 2 or 3");
        if (!is_power_of_two(m) || m < 8) throw ConfigError("config: m must be a power of two >= 8");
        if (!(lambda > 0.0)) throw ConfigError("config: lambda must be positive");
        if (!(nu > 0.0)) throw ConfigError("config: nu must be positive");
        if (!(sigma > 0.0)) throw ConfigError("config: sigma must be positive");
        if (!(t_avg > 0.0)) throw ConfigError("config: t_avg must be positive");
        if (!(k_lo > 0.0 && k_hi > k_lo)) throw ConfigError("config: need 0 < k_lo < k_hi");
        if (n_batches < 2) throw ConfigError("config: n_batches must be >= 2");
        if (!(sample_dt > 0.0)) throw ConfigError("config: sample_dt must be positive");
        if (seed_replicates < 1) throw ConfigError("config: seed_replicates must be >= 1");
        if (cutoff != "smooth" && cutoff != "sharp")
            throw ConfigError("config: cutoff must be smooth or sharp");
        if (scheme != "etd2" && scheme != "etd1")
            throw ConfigError("config: scheme must be etd2 or etd1");
        if (pi_h_form != "consistent" && pi_h_form != "literal")
            throw ConfigError("config: pi_h_form must be consistent or literal");
        if (sweep_mode != "zip" && sweep_mode != "product")
            throw ConfigError("config: sweep_mode must be zip or product");
    }

    CutoffKind cutoff_kind() const {
        return cutoff == "sharp" ? CutoffKind::Sharp : CutoffKind::Smooth;
    }

    SimParams sim_params() const {
        SimParams p;
        p.d = d;
        p.m = m;
        p.lambda = lambda;
        p.nu = nu;
        p.sigma = sigma;
        p.dt = dt;
        p.t_burn = t_burn;
        p.t_avg = t_avg;
        p.seed = seed;
        return p;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if constexpr (std::is_same_v<T, int>)
            out.push_back(std::stoi(item));
        else
            out.push_back(std::stod(item));
    }
    return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, int>)
            out += std::to_string(v[i]);
        else
            out += format_double(v[i]);
    }
    return out;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    auto as_bool = [&](const std::string& v) { return v == "1" || v == "true" || v == "yes"; };
    if (key == "d") c.d = std::stoi(value);
    else if (key == "m") c.m = std::stoi(value);
    else if (key == "lambda") c.lambda = std::stod(value);
    else if (key == "nu") c.nu = std::stod(value);
    else if (key == "sigma") c.sigma = std::stod(value);
    else if (key == "dt") c.dt = std::stod(value);
    else if (key == "t_burn") c.t_burn = std::stod(value);
    else if (key == "t_avg") c.t_avg = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "seed_replicates") c.seed_replicates = std::stoi(value);
    else if (key == "k_lo") c.k_lo = std::stod(value);
    else if (key == "k_hi") c.k_hi = std::stod(value);
    else if (key == "forcing_count") c.forcing_count = std::stoi(value);
    else if (key == "eps_wa_target") c.eps_wa_target = std::stod(value);
    else if (key == "n_batches") c.n_batches = std::stoi(value);
    else if (key == "sample_dt") c.sample_dt = std::stod(value);
    else if (key == "cutoff") c.cutoff = value;
    else if (key == "scheme") c.scheme = value;
    else if (key == "pi_h_form") c.pi_h_form = value;
    else if (key == "linear") c.linear = as_bool(value);
    else if (key == "dealias") c.dealias = as_bool(value);
    else if (key == "relax") c.relax = as_bool(value);
    else if (key == "balance_levels") c.balance_levels = detail::parse_list<int>(value);
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "threads") c.threads = std::stoi(value);
    else if (key == "sweep_nu") c.sweep_nu = detail::parse_list<double>(value);
    else if (key == "sweep_sigma") c.sweep_sigma = detail::parse_list<double>(value);
    else if (key == "sweep_lambda") c.sweep_lambda = detail::parse_list<double>(value);
    else if (key == "sweep_mode") c.sweep_mode = value;
    else if (key == "spectrum_fit_lo") c.spectrum_fit_lo = std::stod(value);
    else if (key == "spectrum_fit_hi") c.spectrum_fit_hi = std::stod(value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto pos = line.find('=');
        if (pos == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        try {
            apply_config_entry(c, detail::trim(line.substr(0, pos)),
                               detail::trim(line.substr(pos + 1)));
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: bad value on line " + std::to_string(lineno));
        }
    }
    return c;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully resolved flat mirror; parsing it back reproduces the exact run.
inline std::string config_to_flat(const RunConfig& c) {
    std::ostringstream out;
    out << "d = " << c.d << "\n";
    out << "m = " << c.m << "\n";
    out << "lambda = " << format_double(c.lambda) << "\n";
    out << "nu = " << format_double(c.nu) << "\n";
    out << "sigma = " << format_double(c.sigma) << "\n";
    out << "dt = " << format_double(c.dt) << "\n";
    out << "t_burn = " << format_double(c.t_burn) << "\n";
    out << "t_avg = " << format_double(c.t_avg) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "seed_replicates = " << c.seed_replicates << "\n";
    out << "k_lo = " << format_double(c.k_lo) << "\n";
    out << "k_hi = " << format_double(c.k_hi) << "\n";
    out << "forcing_count = " << c.forcing_count << "\n";
    out << "eps_wa_target = " << format_double(c.eps_wa_target) << "\n";
    out << "n_batches = " << c.n_batches << "\n";
    out << "sample_dt = " << format_double(c.sample_dt) << "\n";
    out << "cutoff = " << c.cutoff << "\n";
    out << "scheme = " << c.scheme << "\n";
    out << "pi_h_form = " << c.pi_h_form << "\n";
    out << "linear = " << (c.linear ? 1 : 0) << "\n";
    out << "dealias = " << (c.dealias ? 1 : 0) << "\n";
    out << "relax = " << (c.relax ? 1 : 0) << "\n";
    out << "balance_levels = " << detail::join_list(c.balance_levels) << "\n";
    out << "out_dir = " << c.out_dir << "\n";
    out << "threads = " << c.threads << "\n";
    if (!c.sweep_nu.empty()) out << "sweep_nu = " << detail::join_list(c.sweep_nu) << "\n";
    if (!c.sweep_sigma.empty()) out << "sweep_sigma = " << detail::join_list(c.sweep_sigma) << "\n";
    if (!c.sweep_lambda.empty())
        out << "sweep_lambda = " << detail::join_list(c.sweep_lambda) << "\n";
    out << "sweep_mode = " << c.sweep_mode << "\n";
    out << "spectrum_fit_lo = " << format_double(c.spectrum_fit_lo) << "\n";
    out << "spectrum_fit_hi = " << format_double(c.spectrum_fit_hi) << "\n";
    return out.str();
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["d"] = c.d;
    j["m"] = c.m;
    j["lambda"] = c.lambda;
    j["nu"] = c.nu;
    j["sigma"] = c.sigma;
    j["dt"] = c.dt;
    j["t_burn"] = c.t_burn;
    j["t_avg"] = c.t_avg;
    j["seed"] = c.seed;
    j["seed_replicates"] = c.seed_replicates;
    j["k_lo"] = c.k_lo;
    j["k_hi"] = c.k_hi;
    j["forcing_count"] = c.forcing_count;
    j["eps_wa_target"] = c.eps_wa_target;
    j["n_batches"] = c.n_batches;
    j["sample_dt"] = c.sample_dt;
    j["cutoff"] = c.cutoff;
    j["scheme"] = c.scheme;
    j["pi_h_form"] = c.pi_h_form;
    j["linear"] = c.linear;
    j["dealias"] = c.dealias;
    j["relax"] = c.relax;
    j["balance_levels"] = c.balance_levels;
    j["out_dir"] = c.out_dir;
    j["threads"] = c.threads;
    j["sweep_nu"] = c.sweep_nu;
    j["sweep_sigma"] = c.sweep_sigma;
    j["sweep_lambda"] = c.sweep_lambda;
    j["sweep_mode"] = c.sweep_mode;
    j["spectrum_fit_lo"] = c.spectrum_fit_lo;
    j["spectrum_fit_hi"] = c.spectrum_fit_hi;
    return j;
}

inline std::string config_hash(const RunConfig& c) { return content_hash(config_to_flat(c)); }

}  // namespace nlsc
