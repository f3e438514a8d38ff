#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nlsc/config.hpp"
#include "nlsc/diagnostics.hpp"
#include "nlsc/integrator.hpp"
#include "nlsc/reports.hpp"

namespace nlsc {

inline int resolve_threads(const RunConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    if (const char* env = std::getenv("NLSC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Grid, ensemble, filter, and the resolved time parameters of one run.
struct RunSetup {
    RunConfig cfg;  // with dt and t_burn materialized
    TorusGrid grid;
    ForcingEnsemble ens;
    std::shared_ptr<LPFilter> filter;
};

inline RunSetup make_setup(RunConfig cfg) {
    cfg.validate();
    cfg.sim_params().validate();
    RunSetup s{cfg, make_grid(cfg.d, cfg.m, cfg.lambda), {}, nullptr};
    Rng forcing_rng(cfg.seed ^ 0x666f726365ULL);  // decoupled from trajectory streams
    s.ens = build_forcing(s.grid, cfg.k_lo, cfg.k_hi, cfg.forcing_count, cfg.eps_wa_target,
                          forcing_rng);
    s.filter = std::make_shared<LPFilter>(s.grid, cfg.cutoff_kind());
    if (s.cfg.dt <= 0.0) s.cfg.dt = auto_dt(s.grid, s.ens, cfg.nu, cfg.sigma);
    if (s.cfg.t_burn < 0.0) s.cfg.t_burn = auto_t_burn(cfg.nu, cfg.k_lo);
    return s;
}

inline DiagnosticsConfig diagnostics_config(const RunSetup& s) {
    DiagnosticsConfig d;
    d.sample_dt = s.cfg.sample_dt;
    d.n_batches = s.cfg.n_batches;
    d.balance_levels = s.cfg.balance_levels;
    d.pi_h_form =
        s.cfg.pi_h_form == "literal" ? PiHForm::PaperLiteral : PiHForm::DerivativeConsistent;
    d.linear_mode = s.cfg.linear;
    return d;
}

struct RunOutputs {
    FluxCurve curve;
    BalanceReport balance;
    CascadeIndicators indicators;
    std::vector<SpectrumBand> spectrum;
    std::vector<long> forced_modes;
    std::vector<StationaryEstimate> forced_power;
    long guard_trips = 0;
    long n_samples = 0;
    nlohmann::json manifest;
};

/// Burn one trajectory in, then sample the averaging window.
inline void run_trajectory(const RunSetup& s, std::uint64_t seed, TrajectorySampler& sampler,
                           long* guard_trips, TrajectoryState* final_state = nullptr) {
    IntegratorOptions opt;
    opt.nonlinear = !s.cfg.linear;
    opt.strict_guard = !s.cfg.relax;
    opt.order = s.cfg.scheme == "etd1" ? 1 : 2;
    StochasticIntegrator integ(s.grid, s.ens, s.cfg.nu, s.cfg.sigma, s.cfg.dt, opt);
    auto state = make_initial_state(s.grid, seed);
    const double t_end = s.cfg.t_burn + s.cfg.t_avg;
    while (state.t < s.cfg.t_burn) integ.step(state);
    while (state.t < t_end) {
        integ.step(state);
        sampler.maybe_sample(state);
    }
    if (guard_trips) *guard_trips = integ.guard_trips();
    if (final_state) *final_state = std::move(state);
}

/// Runs seed_replicates trajectories (parallel up to the thread budget),
/// merges their batch summaries in seed order, and assembles every report.
inline RunOutputs run_simulation(const RunSetup& s, TrajectoryState* final_state = nullptr) {
    const int reps = s.cfg.seed_replicates;
    auto dcfg = diagnostics_config(s);
    std::vector<std::unique_ptr<TrajectorySampler>> samplers;
    for (int r = 0; r < reps; ++r)
        samplers.push_back(std::make_unique<TrajectorySampler>(s.grid, *s.filter, s.ens, s.cfg.nu,
                                                               s.cfg.sigma, s.cfg.t_avg, dcfg));
    std::vector<long> trips(reps, 0);
    std::vector<std::exception_ptr> errors(reps);

    const int budget = std::min(resolve_threads(s.cfg), reps);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= reps) return;
            try {
                run_trajectory(s, s.cfg.seed + static_cast<std::uint64_t>(r), *samplers[r],
                               &trips[r], r == 0 ? final_state : nullptr);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    if (budget <= 1) {
        worker();
    } else {
        for (int i = 0; i < budget; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (int r = 1; r < reps; ++r) samplers[0]->merge(*samplers[r]);
    const TrajectorySampler& all = *samplers[0];

    RunOutputs out;
    out.curve = make_flux_curve(all);
    out.balance = make_balance_report(all);
    out.indicators = make_indicators(all);
    out.spectrum = make_spectrum(all);
    out.forced_modes = all.forced_modes();
    for (const auto& acc : all.forced_power_) out.forced_power.push_back(acc.finalize());
    for (long tr : trips) out.guard_trips += tr;
    out.n_samples = all.n_samples();

    out.manifest["config"] = config_to_json(s.cfg);
    out.manifest["config_hash"] = config_hash(s.cfg);
    out.manifest["forcing"] = forcing_to_json(s.ens);
    out.manifest["forcing_hash"] = content_hash(out.manifest["forcing"].dump());
    out.manifest["eps_wa"] = s.ens.eps_wa;
    out.manifest["eps_ke"] = s.ens.eps_ke;
    out.manifest["drive_ratio"] = s.cfg.sim_params().drive_ratio();
    out.manifest["guard_trips"] = out.guard_trips;
    out.manifest["n_samples_merged"] = out.n_samples;
    out.manifest["seeds"] = nlohmann::json::array();
    for (int r = 0; r < reps; ++r)
        out.manifest["seeds"].push_back(s.cfg.seed + static_cast<std::uint64_t>(r));
    return out;
}

// ---- minimal static SVG plots ------------------------------------------

struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> points;
};

/// Log-log line plot; series points with non-positive coordinates are
/// dropped. Good enough for reading off spectra and flux curves.
inline void write_svg_loglog(const std::string& path, const std::string& title,
                             const std::vector<SvgSeries>& series) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& sr : series)
        for (auto [x, y] : sr.points) {
            if (x <= 0.0 || y <= 0.0) continue;
            x0 = std::min(x0, std::log10(x));
            x1 = std::max(x1, std::log10(x));
            y0 = std::min(y0, std::log10(y));
            y1 = std::max(y1, std::log10(y));
        }
    if (x0 > x1 || y0 > y1) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    if (x1 - x0 < 1e-9) x1 = x0 + 1.0;
    if (y1 - y0 < 1e-9) y1 = y0 + 1.0;
    const double W = 640, H = 480, L = 70, B = 50, T = 30, R = 20;
    auto px = [&](double lx) { return L + (lx - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double ly) { return H - B - (ly - y0) / (y1 - y0) * (H - B - T); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='18' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    out << "<rect x='" << L << "' y='" << T << "' width='" << W - L - R << "' height='"
        << H - B - T << "' fill='none' stroke='black'/>\n";
    for (int ex = static_cast<int>(std::ceil(x0)); ex <= static_cast<int>(std::floor(x1)); ++ex) {
        out << "<line x1='" << px(ex) << "' y1='" << T << "' x2='" << px(ex) << "' y2='" << H - B
            << "' stroke='#dddddd'/>\n";
        out << "<text x='" << px(ex) << "' y='" << H - B + 16
            << "' text-anchor='middle' font-size='11'>1e" << ex << "</text>\n";
    }
    for (int ey = static_cast<int>(std::ceil(y0)); ey <= static_cast<int>(std::floor(y1)); ++ey) {
        out << "<line x1='" << L << "' y1='" << py(ey) << "' x2='" << W - R << "' y2='" << py(ey)
            << "' stroke='#dddddd'/>\n";
        out << "<text x='" << L - 6 << "' y='" << py(ey) + 4
            << "' text-anchor='end' font-size='11'>1e" << ey << "</text>\n";
    }
    int legend_y = T + 16;
    for (const auto& sr : series) {
        out << "<polyline fill='none' stroke='" << sr.color << "' stroke-width='1.5' points='";
        for (auto [x, y] : sr.points) {
            if (x <= 0.0 || y <= 0.0) continue;
            out << px(std::log10(x)) << "," << py(std::log10(y)) << " ";
        }
        out << "'/>\n";
        out << "<text x='" << W - R - 6 << "' y='" << legend_y
            << "' text-anchor='end' font-size='12' fill='" << sr.color << "'>" << sr.label
            << "</text>\n";
        legend_y += 16;
    }
    out << "</svg>\n";
}

// ---- output emission ------------------------------------------------------

inline void write_run_outputs(const std::string& dir, const RunSetup& s, const RunOutputs& out,
                              const TrajectoryState* final_state = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_flux_curve_csv(dir + "/flux_curve.csv", out.curve);
    write_balance_csv(dir + "/balance.csv", out.balance);
    write_spectrum_csv(dir + "/spectrum.csv", out.spectrum);
    write_indicators_csv(dir + "/indicators.csv", out.indicators);
    {
        std::ofstream f(dir + "/manifest.json");
        f << out.manifest.dump(1) << "\n";
    }
    {
        std::ofstream f(dir + "/resolved_config.txt");
        f << config_to_flat(s.cfg);
    }
    if (final_state) save_checkpoint(dir + "/checkpoint.json", *final_state, config_hash(s.cfg));

    SvgSeries sp{"E_density", "#1f77b4", {}};
    for (const auto& b : out.spectrum) sp.points.push_back({b.k_shell, b.density.mean});
    write_svg_loglog(dir + "/spectrum.svg", "shell spectrum", {sp});
}

// ---- parameter sweep --------------------------------------------------

struct SweepPoint {
    double nu = 0.0, sigma = 0.0, lambda = 0.0;
    bool failed = false;
    std::string error;
    RunOutputs outputs;
};

inline std::vector<std::array<double, 3>> sweep_grid(const RunConfig& cfg) {
    auto nus = cfg.sweep_nu.empty() ? std::vector<double>{cfg.nu} : cfg.sweep_nu;
    auto sigmas = cfg.sweep_sigma.empty() ? std::vector<double>{cfg.sigma} : cfg.sweep_sigma;
    auto lambdas = cfg.sweep_lambda.empty() ? std::vector<double>{cfg.lambda} : cfg.sweep_lambda;
    std::vector<std::array<double, 3>> points;
    if (cfg.sweep_mode == "product") {
        for (double nu : nus)
            for (double sg : sigmas)
                for (double lm : lambdas) points.push_back({nu, sg, lm});
    } else {
        const size_t n = std::max({nus.size(), sigmas.size(), lambdas.size()});
        for (size_t i = 0; i < n; ++i)
            points.push_back({nus[std::min(i, nus.size() - 1)],
                              sigmas[std::min(i, sigmas.size() - 1)],
                              lambdas[std::min(i, lambdas.size() - 1)]});
    }
    if (points.empty()) throw ConfigError("sweep: empty parameter grid");
    return points;
}

/// Runs every (nu, sigma, lambda) point, points in parallel, aggregation in
/// configured order. Per-point failures are recorded and the sweep continues.
inline std::vector<SweepPoint> run_sweep(const RunConfig& base) {
    auto points = sweep_grid(base);
    std::vector<SweepPoint> results(points.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            auto& r = results[i];
            r.nu = points[i][0];
            r.sigma = points[i][1];
            r.lambda = points[i][2];
            try {
                RunConfig cfg = base;
                cfg.nu = r.nu;
                cfg.sigma = r.sigma;
                cfg.lambda = r.lambda;
                cfg.threads = 1;
                cfg.dt = 0.0;      // re-resolve per point
                cfg.t_burn = -1.0;
                auto setup = make_setup(cfg);
                r.outputs = run_simulation(setup);
            } catch (const std::exception& e) {
                r.failed = true;
                r.error = e.what();
            }
        }
    };
    const int budget = std::min<size_t>(resolve_threads(base), points.size());
    std::vector<std::thread> pool;
    if (budget <= 1) {
        worker();
    } else {
        for (int i = 0; i < budget; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

inline void write_regime_table_csv(const std::string& path, const std::vector<SweepPoint>& sweep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "idx,nu,sigma,lambda,nu_over_sigma2,eps_wa,eps_ke,wa_residual,wa_pass,"
           "weak_l2,weak_l4,weak_pe,eps_h,eps_star_wa,low_frac_min_shell,high_frac_max_shell,"
           "error\n";
    for (size_t i = 0; i < sweep.size(); ++i) {
        const auto& p = sweep[i];
        out << i << "," << format_double(p.nu) << "," << format_double(p.sigma) << ","
            << format_double(p.lambda) << "," << format_double(p.nu / (p.sigma * p.sigma)) << ",";
        if (p.failed) {
            out << ",,,,,,,,,,," << p.error << "\n";
            continue;
        }
        const auto& o = p.outputs;
        const auto& ind = o.indicators;
        out << format_double(o.manifest["eps_wa"].get<double>()) << ","
            << format_double(o.manifest["eps_ke"].get<double>()) << ","
            << format_double(o.balance.wa_residual.mean) << "," << (o.balance.wa_pass ? 1 : 0)
            << "," << format_double(ind.weak_l2.mean) << "," << format_double(ind.weak_l4.mean)
            << "," << format_double(ind.weak_pe.mean) << "," << format_double(ind.eps_h.mean)
            << "," << format_double(ind.eps_star_wa.mean) << ","
            << format_double(ind.low_dissipation_fraction.empty()
                                 ? 0.0
                                 : ind.low_dissipation_fraction.front().value.mean)
            << ","
            << format_double(ind.high_dissipation_fraction.empty()
                                 ? 0.0
                                 : ind.high_dissipation_fraction.back().value.mean)
            << ",\n";
    }
}

}  // namespace nlsc
