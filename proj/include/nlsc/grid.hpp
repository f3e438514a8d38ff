#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlsc {

using cd = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846264338327950288;
inline constexpr double two_pi = 2.0 * pi;

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

/// Discretization of the torus T^d_lambda (side length 2*pi*lambda) with m
/// collocation points per dimension. The wavenumber lattice is (Z/lambda)^d,
/// integer index kappa_i in [-m/2, m/2); modes with any |kappa_i| >= m/2 are
/// excluded from the retained band so the cubic product dealiases exactly.
struct TorusGrid {
    int d = 2;
    int m = 0;
    double lambda = 1.0;

    // Precomputed per-mode tables, flat index with the last axis contiguous.
    std::vector<double> k2;               // |k|^2
    std::vector<std::uint8_t> retained;   // 1 if all |kappa_i| <= m/2 - 1
    std::array<std::vector<double>, 3> k_axis;  // k_i = kappa_i / lambda

    long n_points() const {
        long n = 1;
        for (int a = 0; a < d; ++a) n *= m;
        return n;
    }
    double side() const { return two_pi * lambda; }
    double volume() const { return std::pow(side(), d); }
    double spacing() const { return side() / m; }
    /// Largest |kappa| per axis kept in the retained band.
    int kappa_max() const { return m / 2 - 1; }

    bool same_as(const TorusGrid& o) const {
        return d == o.d && m == o.m && lambda == o.lambda;
    }
};

/// Signed integer frequency for a storage index along one axis.
inline int kappa_from_index(int idx, int m) { return idx < m / 2 ? idx : idx - m; }

/// Storage index for a signed integer frequency (must satisfy |kappa| <= m/2).
inline int index_from_kappa(int kappa, int m) { return kappa >= 0 ? kappa : kappa + m; }

inline TorusGrid make_grid(int d, int m, double lambda) {
    if (d != 2 && d != 3) throw std::invalid_argument("TorusGrid: d must be 2 or 3");
    if (!is_power_of_two(m) || m < 4)
        throw std::invalid_argument("TorusGrid: m must be a power of two >= 4");
    if (!(lambda > 0.0)) throw std::invalid_argument("TorusGrid: lambda must be positive");

    TorusGrid g;
    g.d = d;
    g.m = m;
    g.lambda = lambda;
    const long n = g.n_points();
    g.k2.assign(n, 0.0);
    g.retained.assign(n, 1);
    for (int a = 0; a < d; ++a) g.k_axis[a].assign(n, 0.0);

    std::array<int, 3> idx = {0, 0, 0};
    for (long flat = 0; flat < n; ++flat) {
        long rem = flat;
        for (int a = d - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(rem % m);
            rem /= m;
        }
        double k2v = 0.0;
        bool keep = true;
        for (int a = 0; a < d; ++a) {
            const int kap = kappa_from_index(idx[a], m);
            const double kv = kap / lambda;
            g.k_axis[a][flat] = kv;
            k2v += kv * kv;
            if (std::abs(kap) >= m / 2) keep = false;
        }
        g.k2[flat] = k2v;
        g.retained[flat] = keep ? 1 : 0;
    }
    return g;
}

/// Flat storage index of a lattice mode given by its integer frequency vector.
inline long flat_index(const TorusGrid& g, const std::array<int, 3>& kappa) {
    long flat = 0;
    for (int a = 0; a < g.d; ++a) {
        if (std::abs(kappa[a]) > g.m / 2)
            throw std::invalid_argument("flat_index: kappa out of range");
        flat = flat * g.m + index_from_kappa(kappa[a], g.m);
    }
    return flat;
}

/// Integer frequency vector of a flat storage index.
inline std::array<int, 3> kappa_of_flat(const TorusGrid& g, long flat) {
    std::array<int, 3> kap = {0, 0, 0};
    for (int a = g.d - 1; a >= 0; --a) {
        kap[a] = kappa_from_index(static_cast<int>(flat % g.m), g.m);
        flat /= g.m;
    }
    return kap;
}

/// Collocation point of a flat storage index, x_i = 2*pi*lambda*n_i/m.
inline std::array<double, 3> point_of_flat(const TorusGrid& g, long flat) {
    std::array<double, 3> x = {0.0, 0.0, 0.0};
    const double h = g.spacing();
    for (int a = g.d - 1; a >= 0; --a) {
        x[a] = h * static_cast<double>(flat % g.m);
        flat /= g.m;
    }
    return x;
}

}  // namespace nlsc
