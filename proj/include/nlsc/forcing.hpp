#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "nlsc/field.hpp"
#include "nlsc/grid.hpp"
#include "nlsc/littlewood_paley.hpp"
#include "nlsc/rng.hpp"
#include "nlsc/serialize.hpp"

namespace nlsc {

/// One forcing profile g(x) = amplitude * e^{i k.x}, a single lattice mode.
struct ForcingProfile {
    std::array<int, 3> kappa = {0, 0, 0};
    cd amplitude;
};

/// The driven mode family {g_j}. Profiles come in phase-complete pairs
/// (g, ig) so the noise they generate under independent real Wiener
/// processes is invariant under a global phase rotation.
struct ForcingEnsemble {
    TorusGrid grid;
    std::vector<ForcingProfile> profiles;
    double k_lo = 0.5, k_hi = 2.0;
    double eps_wa = 0.0;  // (1/2) sum_j fint |g_j|^2
    double eps_ke = 0.0;  // (1/2) sum_j fint |grad g_j|^2

    double mode_k2(size_t j) const {
        double k2 = 0.0;
        for (int a = 0; a < grid.d; ++a) {
            const double kv = profiles[j].kappa[a] / grid.lambda;
            k2 += kv * kv;
        }
        return k2;
    }
};

/// Materialize profile j as a spectral field.
inline SpectralField profile_field(const ForcingEnsemble& ens, size_t j) {
    SpectralField g = make_zero_spectral(ens.grid);
    g.coeff[flat_index(ens.grid, ens.profiles[j].kappa)] =
        ens.profiles[j].amplitude * ens.grid.volume();
    return g;
}

inline void recompute_eps(ForcingEnsemble& ens) {
    ens.eps_wa = 0.0;
    ens.eps_ke = 0.0;
    for (size_t j = 0; j < ens.profiles.size(); ++j) {
        const double a2 = std::norm(ens.profiles[j].amplitude);
        ens.eps_wa += 0.5 * a2;
        ens.eps_ke += 0.5 * a2 * ens.mode_k2(j);
    }
}

/// Select lattice modes in the annulus k_lo <= |k| <= k_hi and assemble the
/// paired ensemble with uniform amplitudes normalized so that eps_wa matches
/// the target exactly. `count` asks for that many profiles (rounded up to
/// even, capped at two per annulus mode); count 0 selects every annulus mode.
/// The rng only randomizes the per-mode phase, which leaves every ensemble
/// statistic unchanged.
inline ForcingEnsemble build_forcing(const TorusGrid& grid, double k_lo, double k_hi, int count,
                                     double eps_wa_target, Rng& rng) {
    if (!(k_lo > 0.0) || !(k_hi > k_lo))
        throw std::invalid_argument("build_forcing: need 0 < k_lo < k_hi");
    if (!(eps_wa_target > 0.0))
        throw std::invalid_argument("build_forcing: eps_wa_target must be positive");

    struct Mode {
        std::array<int, 3> kappa;
        double k2;
    };
    std::vector<Mode> modes;
    const long n = grid.n_points();
    for (long flat = 0; flat < n; ++flat) {
        if (!grid.retained[flat]) continue;
        const double k2 = grid.k2[flat];
        if (k2 < k_lo * k_lo || k2 > k_hi * k_hi || k2 == 0.0) continue;
        modes.push_back({kappa_of_flat(grid, flat), k2});
    }
    if (modes.empty())
        throw std::invalid_argument("build_forcing: annulus contains no lattice modes");
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
        if (a.k2 != b.k2) return a.k2 < b.k2;
        return a.kappa < b.kappa;
    });

    size_t want_modes = modes.size();
    if (count > 0) {
        size_t req = (static_cast<size_t>(count) + 1) / 2;  // odd counts round up
        want_modes = std::min(req, modes.size());
    }
    std::vector<Mode> chosen;
    if (want_modes == modes.size()) {
        chosen = modes;
    } else {
        // Evenly strided subset so the selection still spans the annulus.
        for (size_t i = 0; i < want_modes; ++i)
            chosen.push_back(modes[(i * modes.size()) / want_modes]);
    }

    ForcingEnsemble ens;
    ens.grid = grid;
    ens.k_lo = k_lo;
    ens.k_hi = k_hi;
    const size_t n_profiles = 2 * chosen.size();
    const double amp = std::sqrt(2.0 * eps_wa_target / static_cast<double>(n_profiles));
    for (const auto& mode : chosen) {
        const double theta = two_pi * rng.next_uniform();
        const cd a = amp * cd(std::cos(theta), std::sin(theta));
        ens.profiles.push_back({mode.kappa, a});
        ens.profiles.push_back({mode.kappa, cd(0.0, 1.0) * a});
    }
    recompute_eps(ens);
    return ens;
}

/// Frequency-localization report: the uniform bound on sum_j (||g_j||_{L^4}^2
/// + ||Lap g_j||_{L^2}^2), the low-frequency mass below N_low and the
/// high-frequency gradient mass above N_high. The two tail masses must vanish
/// identically for annulus-supported forcing.
struct ForcingValidation {
    double l4_plus_laplacian = 0.0;
    double low_level_scale = 0.0;   // N_low
    double high_level_scale = 0.0;  // N_high
    double low_mass = 0.0;          // sum_j ||P_{<=N_low} g_j||^2
    double high_grad_mass = 0.0;    // sum_j ||grad P_{>=N_high} g_j||^2
    bool low_mass_zero = false;
    bool high_grad_mass_zero = false;
};

inline ForcingValidation validate_forcing(const ForcingEnsemble& ens) {
    const TorusGrid& g = ens.grid;
    LPFilter filter(g);
    const int low_level =
        static_cast<int>(std::floor(std::log2(ens.k_lo / 2.0)));
    const int high_level = static_cast<int>(std::ceil(std::log2(2.0 * ens.k_hi)));

    ForcingValidation rep;
    rep.low_level_scale = dyadic_scale(low_level);
    rep.high_level_scale = dyadic_scale(high_level);
    std::vector<double> grad_d_sq(g.k2.size());
    for (size_t i = 0; i < g.k2.size(); ++i) grad_d_sq[i] = g.k2[i] * g.k2[i];  // |Lap| symbol^2

    for (size_t j = 0; j < ens.profiles.size(); ++j) {
        auto gj = profile_field(ens, j);
        const double l4 = volume_lp_norm_dealiased(gj, 4.0);
        rep.l4_plus_laplacian += l4 * l4 + weighted_l2_volume_sq(gj, grad_d_sq);
        rep.low_mass += l2_volume_sq(lp_project_low(filter, gj, low_level));
        auto high = lp_project_high(filter, gj, high_level);
        rep.high_grad_mass += weighted_l2_volume_sq(high, g.k2);
    }
    rep.low_mass_zero = rep.low_mass == 0.0;
    rep.high_grad_mass_zero = rep.high_grad_mass == 0.0;
    return rep;
}

inline nlohmann::json forcing_to_json(const ForcingEnsemble& ens) {
    nlohmann::json j;
    j["d"] = ens.grid.d;
    j["m"] = ens.grid.m;
    j["lambda"] = ens.grid.lambda;
    j["k_lo"] = ens.k_lo;
    j["k_hi"] = ens.k_hi;
    j["eps_wa"] = ens.eps_wa;
    j["eps_ke"] = ens.eps_ke;
    j["profiles"] = nlohmann::json::array();
    for (const auto& p : ens.profiles) {
        nlohmann::json pj;
        pj["kappa"] = {p.kappa[0], p.kappa[1], p.kappa[2]};
        pj["amp_re"] = p.amplitude.real();
        pj["amp_im"] = p.amplitude.imag();
        pj["amp_re_hex"] = double_to_hex(p.amplitude.real());
        pj["amp_im_hex"] = double_to_hex(p.amplitude.imag());
        j["profiles"].push_back(pj);
    }
    return j;
}

inline ForcingEnsemble forcing_from_json(const nlohmann::json& j) {
    ForcingEnsemble ens;
    ens.grid = make_grid(j.at("d"), j.at("m"), j.at("lambda"));
    ens.k_lo = j.at("k_lo");
    ens.k_hi = j.at("k_hi");
    for (const auto& pj : j.at("profiles")) {
        ForcingProfile p;
        for (int a = 0; a < 3; ++a) p.kappa[a] = pj.at("kappa")[a];
        p.amplitude = cd(double_from_hex(pj.at("amp_re_hex")), double_from_hex(pj.at("amp_im_hex")));
        ens.profiles.push_back(p);
    }
    recompute_eps(ens);
    return ens;
}

}  // namespace nlsc
