#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nlsc/field.hpp"
#include "nlsc/forcing.hpp"
#include "nlsc/grid.hpp"

namespace nlsc {

/// Run parameters of the damped driven equation. dt = 0 and t_burn < 0 ask
/// for the automatic defaults derived at setup time.
struct SimParams {
    int d = 2;
    int m = 64;
    double lambda = 1.0;
    double nu = 0.1;
    double sigma = 0.5;
    double dt = 0.0;
    double t_burn = -1.0;
    double t_avg = 1000.0;
    std::uint64_t seed = 1;

    double drive_ratio() const { return nu / (sigma * sigma); }

    void validate() const {
        if (!(nu > 0.0)) throw std::invalid_argument("SimParams: nu must be positive");
        if (!(sigma > 0.0)) throw std::invalid_argument("SimParams: sigma must be positive");
        if (!(t_avg > 0.0)) throw std::invalid_argument("SimParams: t_avg must be positive");
        if (!(lambda > 0.0)) throw std::invalid_argument("SimParams: lambda must be positive");
    }
};

/// Symbol of the dissipation operator D = 1 - Laplacian, D(k) = 1 + |k|^2.
inline std::vector<double> dissipation_symbol(const TorusGrid& g) {
    std::vector<double> D(g.k2.size());
    for (size_t i = 0; i < D.size(); ++i) D[i] = 1.0 + g.k2[i];
    return D;
}

/// WA[u] = (1/2) ||u||^2_{L^2_lambda}.
inline double wave_action(const SpectralField& u) { return 0.5 * l2_volume_sq(u); }

struct HamiltonianSplit {
    double total = 0.0;
    double kinetic = 0.0;    // (1/2) ||grad u||^2_{L^2_lambda}
    double potential = 0.0;  // (sigma/4) ||u||^4_{L^4_lambda}
};

/// Evaluates the cubic term |u|^2 u with exact dealiasing: the retained band
/// is embedded in a grid with twice the modes per dimension, the pointwise
/// product is formed there, and the result is restricted back. With padding
/// factor 2 and the Nyquist ring excluded, no aliased triple interaction can
/// land back inside the retained band.
class CubicEvaluator {
public:
    explicit CubicEvaluator(const TorusGrid& grid, bool dealias = true)
        : coarse_(grid),
          fine_(make_grid(grid.d, dealias ? 2 * grid.m : grid.m, grid.lambda)),
          dealias_(dealias) {
        const long nc = coarse_.n_points();
        scatter_.reserve(static_cast<size_t>(nc));
        for (long flat = 0; flat < nc; ++flat) {
            if (!coarse_.retained[flat]) continue;
            scatter_.push_back({flat, flat_index(fine_, kappa_of_flat(coarse_, flat))});
        }
        buf_.assign(static_cast<size_t>(fine_.n_points()), cd(0.0, 0.0));
    }

    const TorusGrid& fine_grid() const { return fine_; }
    double last_max_abs2() const { return last_max_abs2_; }

    /// out = coefficients of |u|^2 u on the coarse grid; excluded modes stay zero.
    void evaluate(const std::vector<cd>& coeff, std::vector<cd>& out) {
        to_fine_physical(coeff);
        const long nf = fine_.n_points();
        double maxsq = 0.0;
        for (long i = 0; i < nf; ++i) {
            const cd v = buf_[i];
            const double a2 = std::norm(v);
            if (a2 > maxsq) maxsq = a2;
            buf_[i] = a2 * v;
        }
        last_max_abs2_ = maxsq;
        FftPlans::get(fine_.d, fine_.m).forward_inplace(buf_.data());
        const double fscale = std::pow(fine_.spacing(), fine_.d);
        out.assign(coeff.size(), cd(0.0, 0.0));
        for (const auto& [c, f] : scatter_) out[c] = buf_[f] * fscale;
    }

    /// Padded collocation samples of u (band-limited interpolation), kept
    /// valid until the next evaluate/to_fine_physical call.
    const std::vector<cd>& to_fine_physical(const std::vector<cd>& coeff) {
        std::fill(buf_.begin(), buf_.end(), cd(0.0, 0.0));
        for (const auto& [c, f] : scatter_) buf_[f] = coeff[c];
        FftPlans::get(fine_.d, fine_.m).backward_inplace(buf_.data());
        const double bscale = 1.0 / fine_.volume();
        for (auto& v : buf_) v *= bscale;
        return buf_;
    }

private:
    TorusGrid coarse_, fine_;
    bool dealias_;
    std::vector<std::pair<long, long>> scatter_;
    std::vector<cd> buf_;
    double last_max_abs2_ = 0.0;
};

/// Spectral coefficients of |u|^2 u, dealiased by zero padding.
inline SpectralField cubic_nonlinearity(const SpectralField& u) {
    CubicEvaluator eval(u.grid);
    SpectralField out = make_zero_spectral(u.grid);
    eval.evaluate(u.coeff, out.coeff);
    return out;
}

inline HamiltonianSplit hamiltonian(const SpectralField& u, double sigma) {
    HamiltonianSplit h;
    h.kinetic = 0.5 * weighted_l2_volume_sq(u, u.grid.k2);
    const double l4 = volume_lp_norm_dealiased(u, 4.0);
    h.potential = 0.25 * sigma * l4 * l4 * l4 * l4;
    h.total = h.kinetic + h.potential;
    return h;
}

/// Every instantaneous integrand appearing in the stationary dissipation
/// balances, plus the weak-nonlinearity indicators. Raw integrands carry no
/// nu/sigma prefactors unless the name says so.
struct DissipationFunctionals {
    double wa_diss = 0.0;           // nu ||D^{1/2} u||^2
    double ke_diss = 0.0;           // nu ||grad D^{1/2} u||^2
    double l4_quartic = 0.0;        // ||u||^4_{L^4}
    double grad_cross = 0.0;        // ||u grad u||^2_{L^2}
    double pe_direct = 0.0;         // Re fint D conj(u) |u|^2 u dx
    double re_u2_gradbar2 = 0.0;    // Re fint u^2 (grad conj u)^2 dx
    double pe_decomp_defect = 0.0;  // pe_direct - (l4 + 3 grad_cross)
    double ito_pot_quad = 0.0;      // sum_j fint |u|^2 |g_j|^2
    double ito_pot_hess = 0.0;      // sum_j fint (Re(conj(u) g_j))^2
    double weak_l2 = 0.0;           // sigma ||u||^2_{L^4}
    double weak_l4 = 0.0;           // (nu/sigma) ||u||^4_{L^4}
    double weak_pe = 0.0;           // (nu/sigma) ||u||^2_{L^4} ||grad u||^2_{L^4}
};

inline DissipationFunctionals dissipation_functionals(const SpectralField& u,
                                                      const ForcingEnsemble& ens, double nu,
                                                      double sigma) {
    const TorusGrid& g = u.grid;
    DissipationFunctionals out;

    const auto D = dissipation_symbol(g);
    out.wa_diss = nu * weighted_l2_volume_sq(u, D);
    std::vector<double> gradD(D.size());
    for (size_t i = 0; i < D.size(); ++i) gradD[i] = g.k2[i] * D[i];
    out.ke_diss = nu * weighted_l2_volume_sq(u, gradD);

    // Physical-space integrands on the dealiased grid.
    auto fine = pad_spectrum(u, 2);
    auto u_pad = inverse_transform(fine);
    const TorusGrid& fg = fine.grid;
    const long nf = fg.n_points();
    std::vector<cd> grad[3];
    for (int a = 0; a < g.d; ++a) grad[a] = inverse_transform(spectral_derivative(fine, a)).values;

    double l4 = 0.0, cross = 0.0, u2gb2 = 0.0, grad4 = 0.0;
    for (long i = 0; i < nf; ++i) {
        const cd v = u_pad.values[i];
        const double a2 = std::norm(v);
        l4 += a2 * a2;
        double g2 = 0.0;
        cd gb2(0.0, 0.0);
        for (int a = 0; a < g.d; ++a) {
            g2 += std::norm(grad[a][i]);
            const cd gc = std::conj(grad[a][i]);
            gb2 += gc * gc;
        }
        cross += a2 * g2;
        grad4 += g2 * g2;
        u2gb2 += (v * v * gb2).real();
    }
    const double inv_nf = 1.0 / static_cast<double>(nf);
    out.l4_quartic = l4 * inv_nf;
    out.grad_cross = cross * inv_nf;
    out.re_u2_gradbar2 = u2gb2 * inv_nf;
    const double grad_l4_sq = std::sqrt(grad4 * inv_nf);  // ||grad u||^2_{L^4}

    auto w = cubic_nonlinearity(u);
    double pe = 0.0;
    for (size_t i = 0; i < u.coeff.size(); ++i)
        pe += D[i] * (std::conj(u.coeff[i]) * w.coeff[i]).real();
    out.pe_direct = pe / (g.volume() * g.volume());
    out.pe_decomp_defect = out.pe_direct - (out.l4_quartic + 3.0 * out.grad_cross);

    // Ito integrands; |g_j| is constant for single-mode profiles, the
    // Hessian term keeps the full pointwise phase dependence.
    const double l2sq = l2_volume_sq(u);
    for (size_t j = 0; j < ens.profiles.size(); ++j) {
        const auto& p = ens.profiles[j];
        out.ito_pot_quad += std::norm(p.amplitude) * l2sq;
        double acc = 0.0;
        for (long i = 0; i < nf; ++i) {
            const auto x = point_of_flat(fg, i);
            double phase = 0.0;
            for (int a = 0; a < g.d; ++a) phase += (p.kappa[a] / g.lambda) * x[a];
            const cd gj = p.amplitude * cd(std::cos(phase), std::sin(phase));
            const double re = (std::conj(u_pad.values[i]) * gj).real();
            acc += re * re;
        }
        out.ito_pot_hess += acc * inv_nf;
    }

    const double l4_half = std::sqrt(out.l4_quartic);  // ||u||^2_{L^4}
    out.weak_l2 = sigma * l4_half;
    out.weak_l4 = (nu / sigma) * out.l4_quartic;
    out.weak_pe = (nu / sigma) * l4_half * grad_l4_sq;
    return out;
}

}  // namespace nlsc
