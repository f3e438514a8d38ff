#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsc/diagnostics.hpp"
#include "nlsc/serialize.hpp"

namespace nlsc {

/// Time-averaged (1/sigma) E[Pi] per dyadic shell with standard errors.
struct FluxCurve {
    std::vector<double> shells;  // N values, strictly increasing
    std::vector<StationaryEstimate> pi_wa, pi_ke, pi_h;
};

struct ShellBalance {
    double N = 0.0;
    StationaryEstimate flux;        // (1/sigma) E Pi
    StationaryEstimate dissipation; // (nu/sigma^2) E || . ||^2 (projected)
    double injection = 0.0;         // deterministic forcing term
    StationaryEstimate residual;    // accumulated per-sample identity residual
    StationaryEstimate paper_gap;   // literal-form minus direct-form terms (H only)
    bool pass = false;              // |residual| <= 3 stderr with >= 10 batches
};

struct BalanceReport {
    // stationary wave-action balance, normalized by sigma^2
    StationaryEstimate wa_lhs;  // (nu/sigma^2) E ||D^{1/2} u||^2
    double wa_rhs = 0.0;        // eps_wa
    StationaryEstimate wa_residual;
    double wa_rel_residual = 0.0;
    bool wa_pass = false;

    // stationary Hamiltonian balance with the directly computed potential
    // dissipation and the full Ito correction of the paired real noise
    StationaryEstimate h_residual;
    StationaryEstimate h_residual_paper;  // literal coefficients, for comparison
    double h_rel_residual = 0.0;
    bool h_pass = false;

    StationaryEstimate ke_dissipation_ratio;  // (nu/sigma^2) E||grad D^{1/2}u||^2 / eps_ke

    std::vector<ShellBalance> wa_shells, ke_shells, h_shells;
};

struct IndicatorProfilePoint {
    double N = 0.0;
    StationaryEstimate value;
};

struct CascadeIndicators {
    StationaryEstimate weak_l2;   // sigma E ||u||_{L^4}^2
    StationaryEstimate weak_l4;   // (nu/sigma) E ||u||_{L^4}^4
    StationaryEstimate weak_pe;   // (nu/sigma) E ||u||_{L^4}^2 ||grad u||_{L^4}^2
    std::vector<IndicatorProfilePoint> low_dissipation_fraction;   // per shell, / eps_wa
    std::vector<IndicatorProfilePoint> high_dissipation_fraction;  // per shell, / eps_ke
    std::vector<IndicatorProfilePoint> eps_star_wa_profile;        // (nu/s^2) E||D^{1/2}u_{<=N}||^2
    StationaryEstimate eps_star_wa;  // small-N plateau proxy (lowest shell value)
    StationaryEstimate eps_star_ke;  // large-N proxy (highest shell value)
    StationaryEstimate eps_h;        // eps_ke + (sigma/2) sum_j E fint |u|^2 |g_j|^2
};

struct SpectrumBand {
    double k_shell = 0.0;  // geometric center of (N, 2N]
    long mode_count = 0;
    StationaryEstimate density;  // (2 pi lambda)^{-2d} sum over the band of E|u_hat|^2
};

inline FluxCurve make_flux_curve(const TrajectorySampler& s) {
    FluxCurve out;
    const double inv_sigma = 1.0 / s.sigma();
    for (size_t li = 0; li < s.config().curve_levels.size(); ++li) {
        out.shells.push_back(dyadic_scale(s.config().curve_levels[li]));
        auto scale = [&](StationaryEstimate e) {
            e.mean *= inv_sigma;
            e.stderr_val *= inv_sigma;
            return e;
        };
        out.pi_wa.push_back(scale(s.shells_[li].pi_wa.finalize()));
        out.pi_ke.push_back(scale(s.shells_[li].pi_ke.finalize()));
        out.pi_h.push_back(scale(s.shells_[li].pi_h.finalize()));
    }
    return out;
}

inline BalanceReport make_balance_report(const TrajectorySampler& s) {
    const double nu = s.nu(), sigma = s.sigma();
    const double s2 = sigma * sigma;
    const auto& ens = s.ensemble();
    BalanceReport rep;

    auto scaled = [](StationaryEstimate e, double c) {
        e.mean *= c;
        e.stderr_val *= c;
        return e;
    };

    rep.wa_lhs = scaled(s.wa_diss.finalize(), nu / s2);
    rep.wa_rhs = ens.eps_wa;
    rep.wa_residual = s.r_wa_global.finalize();
    rep.wa_rel_residual = std::abs(rep.wa_residual.mean) / ens.eps_wa;
    rep.wa_pass = rep.wa_residual.n_batches >= 10 && rep.wa_residual.consistent_with(0.0);

    rep.h_residual = s.r_h_global.finalize();
    rep.h_residual_paper = s.r_h_paper.finalize();
    rep.h_rel_residual = std::abs(rep.h_residual.mean) / ens.eps_ke;
    rep.h_pass = rep.h_residual.n_batches >= 10 && rep.h_residual.consistent_with(0.0);

    rep.ke_dissipation_ratio = scaled(s.ke_diss.finalize(), nu / (s2 * ens.eps_ke));

    const auto& levels = s.config().curve_levels;
    for (size_t li = 0; li < levels.size(); ++li) {
        const bool is_balance =
            std::find(s.config().balance_levels.begin(), s.config().balance_levels.end(),
                      levels[li]) != s.config().balance_levels.end();
        if (!is_balance) continue;
        const auto& sh = s.shells_[li];
        const double N = dyadic_scale(levels[li]);

        ShellBalance wa;
        wa.N = N;
        wa.flux = scaled(sh.pi_wa.finalize(), 1.0 / sigma);
        wa.dissipation = scaled(sh.hi_wa.finalize(), nu / s2);
        wa.injection = s.injection_hi_wa()[li];
        wa.residual = sh.r_wa.finalize();
        wa.pass = wa.residual.n_batches >= 10 && wa.residual.consistent_with(0.0);
        rep.wa_shells.push_back(wa);

        ShellBalance ke;
        ke.N = N;
        ke.flux = scaled(sh.pi_ke.finalize(), 1.0 / sigma);
        ke.dissipation = scaled(sh.lo_ke.finalize(), nu / s2);
        ke.injection = s.injection_lo_ke()[li];
        ke.residual = sh.r_ke.finalize();
        ke.pass = ke.residual.n_batches >= 10 && ke.residual.consistent_with(0.0);
        rep.ke_shells.push_back(ke);

        ShellBalance h;
        h.N = N;
        h.flux = scaled(sh.pi_h.finalize(), 1.0 / sigma);
        h.dissipation = scaled(sh.lo_ke.finalize(), nu / s2);
        h.injection = s.injection_lo_ke()[li];
        h.residual = sh.r_h.finalize();
        h.paper_gap = sh.h_paper_gap.finalize();
        h.pass = h.residual.n_batches >= 10 && h.residual.consistent_with(0.0);
        rep.h_shells.push_back(h);
    }
    return rep;
}

inline CascadeIndicators make_indicators(const TrajectorySampler& s) {
    const double nu = s.nu(), sigma = s.sigma();
    const double s2 = sigma * sigma;
    const auto& ens = s.ensemble();
    CascadeIndicators out;

    auto scaled = [](StationaryEstimate e, double c) {
        e.mean *= c;
        e.stderr_val *= c;
        return e;
    };
    out.weak_l2 = scaled(s.l4_half.finalize(), sigma);
    out.weak_l4 = scaled(s.l4_quartic.finalize(), nu / sigma);
    out.weak_pe = scaled(s.weak_pe_product.finalize(), nu / sigma);

    const auto& levels = s.config().curve_levels;
    for (size_t li = 0; li < levels.size(); ++li) {
        const double N = dyadic_scale(levels[li]);
        auto lo = scaled(s.shells_[li].lo_wa.finalize(), nu / s2);
        auto hi = scaled(s.shells_[li].hi_ke.finalize(), nu / s2);
        out.eps_star_wa_profile.push_back({N, lo});
        out.low_dissipation_fraction.push_back({N, scaled(lo, 1.0 / ens.eps_wa)});
        out.high_dissipation_fraction.push_back({N, scaled(hi, 1.0 / ens.eps_ke)});
    }
    if (!out.eps_star_wa_profile.empty()) {
        out.eps_star_wa = out.eps_star_wa_profile.front().value;
        auto hi_top = s.shells_.back().hi_ke.finalize();
        out.eps_star_ke = scaled(hi_top, nu / s2);
    }

    // eps_H = eps_ke + (sigma/2) sum_j E fint |u|^2 |g_j|^2; for single-mode
    // profiles the sum collapses to (sum_j |a_j|^2) E ||u||^2.
    double amp2 = 0.0;
    for (const auto& p : ens.profiles) amp2 += std::norm(p.amplitude);
    out.eps_h = scaled(s.l2_sq.finalize(), 0.5 * sigma * amp2);
    out.eps_h.mean += ens.eps_ke;
    return out;
}

inline std::vector<SpectrumBand> make_spectrum(const TrajectorySampler& s) {
    std::vector<SpectrumBand> out;
    for (size_t b = 0; b < s.spectrum_levels().size(); ++b) {
        if (s.spectrum_counts()[b] == 0) continue;
        SpectrumBand band;
        const double N = dyadic_scale(s.spectrum_levels()[b]);
        band.k_shell = N * std::sqrt(2.0);
        band.mode_count = s.spectrum_counts()[b];
        band.density = s.spectrum_[b].finalize();
        out.push_back(band);
    }
    return out;
}

/// Least-squares slope of log(density) vs log(k) over [k_lo, k_hi].
struct SlopeFit {
    double slope = 0.0;
    double ci95 = 0.0;
    int n_points = 0;
};

inline SlopeFit fit_spectrum_slope(const std::vector<SpectrumBand>& bands, double k_lo,
                                   double k_hi) {
    std::vector<double> xs, ys;
    for (const auto& b : bands) {
        if (b.k_shell < k_lo || b.k_shell > k_hi || b.density.mean <= 0.0) continue;
        xs.push_back(std::log(b.k_shell));
        ys.push_back(std::log(b.density.mean));
    }
    SlopeFit fit;
    fit.n_points = static_cast<int>(xs.size());
    if (fit.n_points < 2) return fit;
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    fit.slope = sxy / sxx;
    if (fit.n_points > 2) {
        double ss = 0.0;
        for (size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - my - fit.slope * (xs[i] - mx);
            ss += r * r;
        }
        fit.ci95 = 1.96 * std::sqrt(ss / (fit.n_points - 2) / sxx);
    }
    return fit;
}

// ---- CSV emission -----------------------------------------------------

inline void write_flux_curve_csv(const std::string& path, const FluxCurve& c) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "N,pi_wa,pi_wa_err,pi_ke,pi_ke_err,pi_h,pi_h_err\n";
    for (size_t i = 0; i < c.shells.size(); ++i)
        out << format_double(c.shells[i]) << "," << format_double(c.pi_wa[i].mean) << ","
            << format_double(c.pi_wa[i].stderr_val) << "," << format_double(c.pi_ke[i].mean) << ","
            << format_double(c.pi_ke[i].stderr_val) << "," << format_double(c.pi_h[i].mean) << ","
            << format_double(c.pi_h[i].stderr_val) << "\n";
}

inline void write_balance_csv(const std::string& path, const BalanceReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "identity,N,term,value,stderr,pass\n";
    auto row = [&](const std::string& id, const std::string& N, const std::string& term,
                   double value, double err, int pass) {
        out << id << "," << N << "," << term << "," << format_double(value) << ","
            << format_double(err) << "," << (pass < 0 ? "" : (pass ? "1" : "0")) << "\n";
    };
    row("wa_balance", "", "lhs", r.wa_lhs.mean, r.wa_lhs.stderr_val, -1);
    row("wa_balance", "", "injection", r.wa_rhs, 0.0, -1);
    row("wa_balance", "", "residual", r.wa_residual.mean, r.wa_residual.stderr_val, r.wa_pass);
    row("h_balance", "", "residual", r.h_residual.mean, r.h_residual.stderr_val, r.h_pass);
    row("h_balance", "", "residual_paper_form", r.h_residual_paper.mean,
        r.h_residual_paper.stderr_val, -1);
    row("h_balance", "", "ke_dissipation_ratio", r.ke_dissipation_ratio.mean,
        r.ke_dissipation_ratio.stderr_val, -1);
    auto shell_rows = [&](const std::string& id, const std::vector<ShellBalance>& shells) {
        for (const auto& sh : shells) {
            const std::string N = format_double(sh.N);
            row(id, N, "flux", sh.flux.mean, sh.flux.stderr_val, -1);
            row(id, N, "dissipation", sh.dissipation.mean, sh.dissipation.stderr_val, -1);
            row(id, N, "injection", sh.injection, 0.0, -1);
            row(id, N, "residual", sh.residual.mean, sh.residual.stderr_val, sh.pass);
            if (id == "h_flux_balance")
                row(id, N, "paper_form_gap", sh.paper_gap.mean, sh.paper_gap.stderr_val, -1);
        }
    };
    shell_rows("wa_flux_balance", r.wa_shells);
    shell_rows("ke_flux_balance", r.ke_shells);
    shell_rows("h_flux_balance", r.h_shells);
}

inline void write_spectrum_csv(const std::string& path, const std::vector<SpectrumBand>& bands) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "k_shell,E_density,err\n";
    for (const auto& b : bands)
        out << format_double(b.k_shell) << "," << format_double(b.density.mean) << ","
            << format_double(b.density.stderr_val) << "\n";
}

inline void write_indicators_csv(const std::string& path, const CascadeIndicators& ind) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "metric,N,value,stderr\n";
    auto row = [&](const std::string& name, const std::string& N, const StationaryEstimate& e) {
        out << name << "," << N << "," << format_double(e.mean) << ","
            << format_double(e.stderr_val) << "\n";
    };
    row("weak_l2", "", ind.weak_l2);
    row("weak_l4", "", ind.weak_l4);
    row("weak_pe", "", ind.weak_pe);
    row("eps_star_wa", "", ind.eps_star_wa);
    row("eps_star_ke", "", ind.eps_star_ke);
    row("eps_h", "", ind.eps_h);
    for (const auto& p : ind.low_dissipation_fraction)
        row("low_dissipation_fraction", format_double(p.N), p.value);
    for (const auto& p : ind.high_dissipation_fraction)
        row("high_dissipation_fraction", format_double(p.N), p.value);
    for (const auto& p : ind.eps_star_wa_profile)
        row("eps_star_wa_profile", format_double(p.N), p.value);
}

}  // namespace nlsc
