#pragma once

#include <cmath>
#include <vector>

#include "nlsc/field.hpp"
#include "nlsc/littlewood_paley.hpp"
#include "nlsc/model.hpp"

namespace nlsc {

/// Which form of the Hamiltonian flux's order-sigma term to evaluate. The
/// derivative-consistent form conjugates the |v|^2 v factor so that
/// d/dt H[P_{<=N} u] = -sigma Pi_H(N) holds under the conservative flow and
/// Pi_H vanishes identically once P_{<=N} resolves the whole field; the
/// literal form keeps the product unconjugated and fails both checks.
enum class PiHForm { DerivativeConsistent, PaperLiteral };

/// Pi_WA(N) = Im fint conj(P_{>=N} u) P_{>=N}(|u|^2 u) dx, with
/// P_{>=N} = Id - P_{<=N}. `w` must hold the dealiased coefficients of
/// |u|^2 u. Positive values drain wave action out of the high frequencies.
inline double flux_wa(const LPFilter& f, const SpectralField& u, const SpectralField& w,
                      int level) {
    const auto& psi = f.lowpass(level);
    double im = 0.0;
    for (size_t i = 0; i < u.coeff.size(); ++i) {
        const double hi = 1.0 - psi[i];
        im += hi * hi * (std::conj(u.coeff[i]) * w.coeff[i]).imag();
    }
    const double vol = u.grid.volume();
    return im / (vol * vol);
}

/// Pi_KE(N) = -Im fint Lap conj(P_{<=N} u) P_{<=N}(|u|^2 u) dx; the Laplacian
/// acts spectrally as -|k|^2.
inline double flux_ke(const LPFilter& f, const SpectralField& u, const SpectralField& w,
                      int level) {
    const auto& psi = f.lowpass(level);
    const auto& k2 = u.grid.k2;
    double im = 0.0;
    for (size_t i = 0; i < u.coeff.size(); ++i)
        im += k2[i] * psi[i] * psi[i] * (std::conj(u.coeff[i]) * w.coeff[i]).imag();
    const double vol = u.grid.volume();
    return im / (vol * vol);
}

/// Pi_H(N): commutator term -Im fint Lap conj(v) (P_{<=N}(|u|^2 u) - |v|^2 v)
/// plus the order-sigma term, v = P_{<=N} u. `cubic` supplies the dealiased
/// evaluation of |v|^2 v (a workspace so samplers can reuse buffers).
inline double flux_h(const LPFilter& f, const SpectralField& u, const SpectralField& w, int level,
                     double sigma, CubicEvaluator& cubic,
                     PiHForm form = PiHForm::DerivativeConsistent) {
    const auto& psi = f.lowpass(level);
    const auto& k2 = u.grid.k2;
    const TorusGrid& g = u.grid;
    const long n = g.n_points();

    std::vector<cd> v(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) v[i] = psi[i] * u.coeff[i];
    std::vector<cd> cv;
    cubic.evaluate(v, cv);

    double term1 = 0.0;
    for (long i = 0; i < n; ++i) {
        const cd commutator = psi[i] * w.coeff[i] - cv[i];
        term1 += k2[i] * (std::conj(v[i]) * commutator).imag();
    }

    double term2 = 0.0;
    if (form == PiHForm::DerivativeConsistent) {
        // sigma Im fint conj(|v|^2 v) P_{<=N}(|u|^2 u) dx
        for (long i = 0; i < n; ++i) term2 += (std::conj(cv[i]) * (psi[i] * w.coeff[i])).imag();
    } else {
        // sigma Im fint P_{<=N}(|u|^2 u) |v|^2 v dx, no conjugation:
        // fint A B dx = vol^{-2d} sum_k A_hat(k) B_hat(-k).
        for (long i = 0; i < n; ++i) {
            auto kap = kappa_of_flat(g, i);
            bool ok = true;
            for (int a = 0; a < g.d; ++a) {
                kap[a] = -kap[a];
                if (std::abs(kap[a]) > g.m / 2 - 1) ok = false;
            }
            if (!ok) continue;  // reflection of the excluded ring carries nothing
            term2 += ((psi[i] * w.coeff[i]) * cv[flat_index(g, kap)]).imag();
        }
    }
    const double vol = g.volume();
    return (term1 + sigma * term2) / (vol * vol);
}

inline double flux_wa(const LPFilter& f, const SpectralField& u, double N) {
    auto w = cubic_nonlinearity(u);
    return flux_wa(f, u, w, level_of_dyadic(N));
}
inline double flux_ke(const LPFilter& f, const SpectralField& u, double N) {
    auto w = cubic_nonlinearity(u);
    return flux_ke(f, u, w, level_of_dyadic(N));
}
inline double flux_h(const LPFilter& f, const SpectralField& u, double N, double sigma,
                     PiHForm form = PiHForm::DerivativeConsistent) {
    auto w = cubic_nonlinearity(u);
    CubicEvaluator cubic(u.grid);
    return flux_h(f, u, w, level_of_dyadic(N), sigma, cubic, form);
}

}  // namespace nlsc
