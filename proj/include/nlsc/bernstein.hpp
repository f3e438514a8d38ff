#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsc/field.hpp"
#include "nlsc/littlewood_paley.hpp"

namespace nlsc {

/// Plain (non-volume-averaged) L^p norm, ||f||_{L^p} = (int |f|^p dx)^{1/p}.
/// The frequency-interpolation inequalities compare plain norms; B5's
/// (N/lambda)^{d(1/p-1/q)} gain is stated for these.
inline double plain_lp_norm(const SpectralField& u, double p) {
    const double avg = volume_lp_norm_dealiased(u, p);
    return avg * std::pow(u.grid.volume(), 1.0 / p);
}

/// Plain L^p norm of the gradient vector field.
inline double plain_grad_lp_norm(const SpectralField& u, double p) {
    auto fine = pad_spectrum(u, 2);
    const long n = fine.grid.n_points();
    std::vector<double> grad2(static_cast<size_t>(n), 0.0);
    for (int a = 0; a < fine.grid.d; ++a) {
        auto da = inverse_transform(spectral_derivative(fine, a));
        for (long i = 0; i < n; ++i) grad2[i] += std::norm(da.values[i]);
    }
    double acc = 0.0;
    for (double v : grad2) acc += std::pow(v, p / 2.0);
    const double avg = std::pow(acc / static_cast<double>(n), 1.0 / p);
    return avg * std::pow(u.grid.volume(), 1.0 / p);
}

/// |nabla|^s u: multiplier |k|^s, zero mode mapped to zero.
inline SpectralField fractional_derivative(const SpectralField& u, double s) {
    SpectralField out = u;
    for (size_t i = 0; i < out.coeff.size(); ++i) {
        const double k2 = u.grid.k2[i];
        out.coeff[i] *= (k2 > 0.0) ? std::pow(k2, 0.5 * s) : 0.0;
    }
    return out;
}

struct BernsteinEntry {
    std::string name;
    double ratio = 0.0;
};

struct BernsteinReport {
    std::vector<BernsteinEntry> entries;
    double max_ratio() const {
        double r = 0.0;
        for (const auto& e : entries) r = std::max(r, e.ratio);
        return r;
    }
    bool pass(double C) const { return max_ratio() <= C; }
};

/// Evaluates both sides of the five frequency-localization inequalities at
/// scale N = 2^level and returns the left/right ratios:
///   B1: ||u_{<=N}||_p <= C ||u||_p
///   B2: ||grad u_{<=N}||_p <= C N ||u||_p
///   B3: ||u_N||_p <= C ||u||_p
///   B4: ||N^s u_N||_p ~ |||nabla|^s u_N||_p (both directions), s in {-1, 1}
///   B5: ||u_N||_q <= C (N/lambda)^{d(1/p - 1/q)} ||u_N||_p
/// Degenerate 0/0 ratios (empty shells) are reported as 0.
inline BernsteinReport bernstein_suite(const LPFilter& f, const SpectralField& u, int level,
                                       double p, double q,
                                       const std::vector<double>& s_values = {-1.0, 1.0}) {
    if (p < 1.0 || q < p) throw std::invalid_argument("bernstein_suite: need q >= p >= 1");
    const double N = dyadic_scale(level);
    BernsteinReport rep;
    auto ratio = [](double lhs, double rhs) { return rhs > 0.0 ? lhs / rhs : 0.0; };

    const double u_p = plain_lp_norm(u, p);
    auto low = lp_project_low(f, u, level);
    auto shell = lp_shell(f, u, level);
    const double shell_p = plain_lp_norm(shell, p);

    rep.entries.push_back({"B1", ratio(plain_lp_norm(low, p), u_p)});
    rep.entries.push_back({"B2", ratio(plain_grad_lp_norm(low, p), N * u_p)});
    rep.entries.push_back({"B3", ratio(shell_p, u_p)});
    for (double s : s_values) {
        const double frac_p = plain_lp_norm(fractional_derivative(shell, s), p);
        const double ns = std::pow(N, s);
        rep.entries.push_back({"B4[s=" + std::to_string(static_cast<int>(s)) + ",fwd]",
                               ratio(frac_p, ns * shell_p)});
        rep.entries.push_back({"B4[s=" + std::to_string(static_cast<int>(s)) + ",rev]",
                               ratio(ns * shell_p, frac_p)});
    }
    const double gain = std::pow(N / u.grid.lambda, u.grid.d * (1.0 / p - 1.0 / q));
    rep.entries.push_back({"B5", ratio(plain_lp_norm(shell, q), gain * shell_p)});
    return rep;
}

}  // namespace nlsc
