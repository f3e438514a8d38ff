#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "nlsc/fft.hpp"
#include "nlsc/grid.hpp"

namespace nlsc {

/// Complex field sampled on the m^d collocation points.
struct PhysicalField {
    TorusGrid grid;
    std::vector<cd> values;
};

/// Fourier coefficients under the convention u_hat(k) = int u e^{-ik.x} dx,
/// indexed by the wavenumber lattice in FFT storage order.
struct SpectralField {
    TorusGrid grid;
    std::vector<cd> coeff;
};

inline PhysicalField make_zero_physical(const TorusGrid& g) {
    return {g, std::vector<cd>(static_cast<size_t>(g.n_points()), cd(0.0, 0.0))};
}
inline SpectralField make_zero_spectral(const TorusGrid& g) {
    return {g, std::vector<cd>(static_cast<size_t>(g.n_points()), cd(0.0, 0.0))};
}

inline void check_shape(const TorusGrid& g, size_t len, const char* what) {
    if (static_cast<long>(len) != g.n_points())
        throw std::invalid_argument(std::string(what) + ": array length does not match m^d");
}

/// u_hat(k) = int u e^{-ik.x} dx by trapezoidal quadrature, exact for
/// band-limited u: (2 pi lambda / m)^d * DFT.
inline SpectralField forward_transform(const PhysicalField& f) {
    check_shape(f.grid, f.values.size(), "forward_transform");
    SpectralField out{f.grid, f.values};
    FftPlans::get(f.grid.d, f.grid.m).forward_inplace(out.coeff.data());
    const double scale = std::pow(f.grid.spacing(), f.grid.d);
    for (auto& c : out.coeff) c *= scale;
    return out;
}

/// u(x) = (2 pi lambda)^{-d} sum_k u_hat(k) e^{ik.x}.
inline PhysicalField inverse_transform(const SpectralField& F) {
    check_shape(F.grid, F.coeff.size(), "inverse_transform");
    PhysicalField out{F.grid, F.coeff};
    FftPlans::get(F.grid.d, F.grid.m).backward_inplace(out.values.data());
    const double scale = 1.0 / F.grid.volume();
    for (auto& v : out.values) v *= scale;
    return out;
}

/// Volume-averaged L^p norm by collocation quadrature on the field's own grid.
inline double volume_lp_norm(const PhysicalField& f, double p) {
    if (p < 1.0) throw std::invalid_argument("volume_lp_norm: p must be >= 1");
    check_shape(f.grid, f.values.size(), "volume_lp_norm");
    double acc = 0.0;
    if (p == 2.0) {
        for (const auto& v : f.values) acc += std::norm(v);
    } else if (p == 4.0) {
        for (const auto& v : f.values) {
            const double a2 = std::norm(v);
            acc += a2 * a2;
        }
    } else {
        for (const auto& v : f.values) acc += std::pow(std::abs(v), p);
    }
    return std::pow(acc / static_cast<double>(f.grid.n_points()), 1.0 / p);
}

/// ||u||^2_{L^2_lambda} = (2 pi lambda)^{-2d} sum_k |u_hat(k)|^2 (Parseval).
inline double l2_volume_sq(const SpectralField& u) {
    double acc = 0.0;
    for (const auto& c : u.coeff) acc += std::norm(c);
    const double v = u.grid.volume();
    return acc / (v * v);
}

/// Volume-averaged pairing <f, g> = avg of conj(f) g = (2 pi lambda)^{-2d} sum conj(f_hat) g_hat.
inline cd spectral_pairing(const SpectralField& f, const SpectralField& g) {
    if (!f.grid.same_as(g.grid)) throw std::invalid_argument("spectral_pairing: grid mismatch");
    cd acc(0.0, 0.0);
    for (size_t i = 0; i < f.coeff.size(); ++i) acc += std::conj(f.coeff[i]) * g.coeff[i];
    const double v = f.grid.volume();
    return acc / (v * v);
}

/// Weighted volume-averaged L^2 square, sum_k w(k) |u_hat(k)|^2 / (2 pi lambda)^{2d}.
inline double weighted_l2_volume_sq(const SpectralField& u, const std::vector<double>& w) {
    check_shape(u.grid, w.size(), "weighted_l2_volume_sq");
    double acc = 0.0;
    for (size_t i = 0; i < u.coeff.size(); ++i) acc += w[i] * std::norm(u.coeff[i]);
    const double v = u.grid.volume();
    return acc / (v * v);
}

/// Zero every coefficient outside the retained (dealiased) band.
inline void zero_excluded_modes(SpectralField& u) {
    for (size_t i = 0; i < u.coeff.size(); ++i)
        if (!u.grid.retained[i]) u.coeff[i] = cd(0.0, 0.0);
}

/// Embed the retained band into a grid with `factor` times the modes per
/// dimension (spectral zero padding; coefficients carry over unchanged under
/// the integral convention).
inline SpectralField pad_spectrum(const SpectralField& u, int factor = 2) {
    const TorusGrid& g = u.grid;
    TorusGrid fine = make_grid(g.d, g.m * factor, g.lambda);
    SpectralField out = make_zero_spectral(fine);
    const long n = g.n_points();
    for (long flat = 0; flat < n; ++flat) {
        if (!g.retained[flat]) continue;
        const auto kap = kappa_of_flat(g, flat);
        out.coeff[flat_index(fine, kap)] = u.coeff[flat];
    }
    return out;
}

/// Restrict a fine-grid spectrum to the retained band of the coarse grid.
inline SpectralField truncate_spectrum(const SpectralField& fine, const TorusGrid& coarse) {
    if (fine.grid.d != coarse.d || fine.grid.lambda != coarse.lambda || fine.grid.m < coarse.m)
        throw std::invalid_argument("truncate_spectrum: incompatible grids");
    SpectralField out = make_zero_spectral(coarse);
    const long n = coarse.n_points();
    for (long flat = 0; flat < n; ++flat) {
        if (!coarse.retained[flat]) continue;
        const auto kap = kappa_of_flat(coarse, flat);
        out.coeff[flat] = fine.coeff[flat_index(fine.grid, kap)];
    }
    return out;
}

/// Collocation samples on the zero-padded grid (band-limited interpolation);
/// quadrature of quartic integrands is exact there with factor 2.
inline PhysicalField padded_physical(const SpectralField& u, int factor = 2) {
    return inverse_transform(pad_spectrum(u, factor));
}

/// Volume-averaged L^p norm evaluated on the dealiased (padded) grid.
inline double volume_lp_norm_dealiased(const SpectralField& u, double p) {
    return volume_lp_norm(padded_physical(u), p);
}

/// Gradient component ik_a u_hat (spectral derivative along axis a).
inline SpectralField spectral_derivative(const SpectralField& u, int axis) {
    SpectralField out = u;
    const auto& ka = u.grid.k_axis[axis];
    for (size_t i = 0; i < out.coeff.size(); ++i) out.coeff[i] *= cd(0.0, ka[i]);
    return out;
}

}  // namespace nlsc
