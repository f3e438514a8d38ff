#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "nlsc/field.hpp"
#include "nlsc/grid.hpp"

namespace nlsc {

/// Radial cutoff: psi = 1 for r <= 1, 0 for r >= 2, smooth monotone bridge
/// phi(2-r)/(phi(2-r)+phi(r-1)) with phi(t) = e^{-1/t} in between. The
/// plateau branches compare r^2 so lattice points land on exact 0.0 / 1.0.
inline double psi_cutoff_r2(double r2) {
    if (r2 <= 1.0) return 1.0;
    if (r2 >= 4.0) return 0.0;
    const double r = std::sqrt(r2);
    const double a = std::exp(-1.0 / (2.0 - r));  // phi(2-r)
    const double b = std::exp(-1.0 / (r - 1.0));  // phi(r-1)
    return a / (a + b);
}

enum class CutoffKind { Smooth, Sharp };

inline double dyadic_scale(int level) { return std::ldexp(1.0, level); }

/// Level j with N = 2^j; rejects non-dyadic N.
inline int level_of_dyadic(double N) {
    int e = 0;
    const double f = std::frexp(N, &e);
    if (f != 0.5 || !(N > 0.0)) throw std::invalid_argument("level_of_dyadic: N must be 2^j");
    return e - 1;
}

/// Top of the default shell ladder, 2^ceil(log2(m/(2 lambda))).
inline int ladder_top_level(const TorusGrid& g) {
    return static_cast<int>(std::ceil(std::log2(static_cast<double>(g.m) / (2.0 * g.lambda))));
}
inline constexpr int ladder_min_level = -6;

/// Littlewood-Paley multiplier cache for one grid: low-pass tables
/// psi(k / 2^j) and shell tables psi(k / 2^{j+1}) - psi(k / 2^j), built once
/// and read-only afterwards. Shell tables are precomputed differences of the
/// cached low-pass tables so telescoping sums cancel at multiplier level.
class LPFilter {
public:
    LPFilter(const TorusGrid& grid, CutoffKind kind = CutoffKind::Smooth,
             int min_level = ladder_min_level - 2, int max_level = 0)
        : grid_(grid), kind_(kind) {
        if (max_level == 0) max_level = ladder_top_level(grid) + 2;
        min_level_ = min_level;
        max_level_ = max_level;
        for (int j = min_level_; j <= max_level_; ++j) lowpass_.emplace(j, build_lowpass(j));
        for (int j = min_level_; j < max_level_; ++j) {
            const auto& hi = lowpass_.at(j + 1);
            const auto& lo = lowpass_.at(j);
            std::vector<double> diff(hi.size());
            for (size_t i = 0; i < hi.size(); ++i) diff[i] = hi[i] - lo[i];
            shell_.emplace(j, std::move(diff));
        }
    }

    const TorusGrid& grid() const { return grid_; }
    CutoffKind kind() const { return kind_; }
    int min_level() const { return min_level_; }
    int max_level() const { return max_level_; }

    /// Multiplier of P_{<= 2^j}.
    const std::vector<double>& lowpass(int level) const {
        auto it = lowpass_.find(level);
        if (it == lowpass_.end()) throw std::out_of_range("LPFilter: level outside cached range");
        return it->second;
    }
    /// Multiplier of P_{2^j} = P_{<= 2^{j+1}} - P_{<= 2^j}.
    const std::vector<double>& shell(int level) const {
        auto it = shell_.find(level);
        if (it == shell_.end()) throw std::out_of_range("LPFilter: shell level outside cached range");
        return it->second;
    }

    /// True if the shell multiplier vanishes on every retained mode.
    bool shell_is_null(int level) const {
        const auto& s = shell(level);
        for (size_t i = 0; i < s.size(); ++i)
            if (grid_.retained[i] && s[i] != 0.0) return false;
        return true;
    }
    /// True if the low-pass multiplier is exactly 1 on every retained mode.
    bool lowpass_is_identity(int level) const {
        const auto& s = lowpass(level);
        for (size_t i = 0; i < s.size(); ++i)
            if (grid_.retained[i] && s[i] != 1.0) return false;
        return true;
    }

private:
    std::vector<double> build_lowpass(int level) const {
        const long n = grid_.n_points();
        std::vector<double> mult(static_cast<size_t>(n));
        const double N = dyadic_scale(level);
        const double inv_n2 = 1.0 / (N * N);
        for (long i = 0; i < n; ++i) {
            const double r2 = grid_.k2[i] * inv_n2;
            mult[i] = (kind_ == CutoffKind::Smooth) ? psi_cutoff_r2(r2) : (r2 <= 1.0 ? 1.0 : 0.0);
        }
        return mult;
    }

    TorusGrid grid_;
    CutoffKind kind_;
    int min_level_, max_level_;
    std::map<int, std::vector<double>> lowpass_;
    std::map<int, std::vector<double>> shell_;
};

inline SpectralField apply_multiplier(const SpectralField& u, const std::vector<double>& mult) {
    check_shape(u.grid, mult.size(), "apply_multiplier");
    SpectralField out = u;
    for (size_t i = 0; i < out.coeff.size(); ++i) out.coeff[i] *= mult[i];
    return out;
}

/// u_{<= N}: coefficients scaled by psi(k/N).
inline SpectralField lp_project_low(const LPFilter& f, const SpectralField& u, int level) {
    return apply_multiplier(u, f.lowpass(level));
}
inline SpectralField lp_project_low(const LPFilter& f, const SpectralField& u, double N) {
    return lp_project_low(f, u, level_of_dyadic(N));
}

/// u_N = u_{<= 2N} - u_{<= N}, via the cached difference multiplier.
inline SpectralField lp_shell(const LPFilter& f, const SpectralField& u, int level) {
    return apply_multiplier(u, f.shell(level));
}
inline SpectralField lp_shell(const LPFilter& f, const SpectralField& u, double N) {
    return lp_shell(f, u, level_of_dyadic(N));
}

/// u_{>= N} = u - u_{<= N} (the complementary multiplier 1 - psi(k/N)).
inline SpectralField lp_project_high(const LPFilter& f, const SpectralField& u, int level) {
    const auto& mult = f.lowpass(level);
    SpectralField out = u;
    for (size_t i = 0; i < out.coeff.size(); ++i) out.coeff[i] *= (1.0 - mult[i]);
    return out;
}

}  // namespace nlsc
