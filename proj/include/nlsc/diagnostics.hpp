#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsc/field.hpp"
#include "nlsc/flux.hpp"
#include "nlsc/forcing.hpp"
#include "nlsc/integrator.hpp"
#include "nlsc/littlewood_paley.hpp"
#include "nlsc/model.hpp"
#include "nlsc/stats.hpp"

namespace nlsc {

struct DiagnosticsConfig {
    std::vector<int> curve_levels;    // flux-curve shells (defaults to the full ladder)
    std::vector<int> balance_levels;  // shells carrying the full balance breakdown
    double sample_dt = 0.1;
    int n_batches = 50;
    PiHForm pi_h_form = PiHForm::DerivativeConsistent;
    bool linear_mode = false;  // identities assembled without nonlinear terms
};

inline std::vector<int> default_curve_levels(const TorusGrid& g) {
    std::vector<int> out;
    for (int j = ladder_min_level; j <= ladder_top_level(g); ++j) out.push_back(j);
    return out;
}

inline std::vector<int> default_balance_levels(const TorusGrid& g) {
    std::vector<int> out;
    for (int j : {-1, 0, 1, 2})
        if (j >= ladder_min_level && j <= ladder_top_level(g)) out.push_back(j);
    return out;
}

/// Streaming per-trajectory measurement of every stationary observable the
/// balance laws and indicators need. Balance residuals are accumulated as
/// their own time series so their error bars carry the cross-correlations of
/// the terms. One instance per trajectory; merge() combines batch summaries
/// across seeds.
class TrajectorySampler {
public:
    struct ShellSeries {
        BatchAccumulator pi_wa, pi_ke, pi_h;          // raw fluxes
        BatchAccumulator lo_wa, hi_wa, lo_ke, hi_ke;  // projected dissipation integrands
        BatchAccumulator v_l2;                        // ||P_{<=N} u||^2
        BatchAccumulator r_wa, r_ke, r_h;             // per-sample balance residuals
        BatchAccumulator h_paper_gap;                 // literal-form minus direct-form terms
        static constexpr size_t count = 12;
        BatchAccumulator& slot(size_t i) {
            BatchAccumulator* arr[count] = {&pi_wa, &pi_ke, &pi_h,  &lo_wa, &hi_wa, &lo_ke,
                                            &hi_ke, &v_l2,  &r_wa,  &r_ke,  &r_h,   &h_paper_gap};
            return *arr[i];
        }
        const BatchAccumulator& slot(size_t i) const {
            return const_cast<ShellSeries*>(this)->slot(i);
        }
    };

    TrajectorySampler(const TorusGrid& grid, const LPFilter& filter, const ForcingEnsemble& ens,
                      double nu, double sigma, double t_avg, DiagnosticsConfig cfg)
        : grid_(grid),
          filter_(&filter),
          ens_(&ens),
          nu_(nu),
          sigma_(sigma),
          cfg_(std::move(cfg)),
          fine_(make_grid(grid.d, 2 * grid.m, grid.lambda)),
          plans_(&FftPlans::get(grid.d, 2 * grid.m)) {
        if (cfg_.curve_levels.empty()) cfg_.curve_levels = default_curve_levels(grid);
        if (cfg_.balance_levels.empty()) cfg_.balance_levels = default_balance_levels(grid);
        for (int bl : cfg_.balance_levels)
            if (std::find(cfg_.curve_levels.begin(), cfg_.curve_levels.end(), bl) ==
                cfg_.curve_levels.end())
                cfg_.curve_levels.push_back(bl);
        std::sort(cfg_.curve_levels.begin(), cfg_.curve_levels.end());

        batch_len_ = t_avg / cfg_.n_batches;
        if (!(batch_len_ > 0.0))
            throw std::invalid_argument("TrajectorySampler: t_avg and n_batches must be positive");

        build_tables();
        const size_t nf = static_cast<size_t>(fine_.n_points());
        fine_buf_.assign(nf, cd(0.0, 0.0));
        u_pad_.assign(nf, cd(0.0, 0.0));
        v_pad_.assign(nf, cd(0.0, 0.0));
        for (int a = 0; a < grid.d; ++a) grad_pad_[a].assign(nf, cd(0.0, 0.0));
        const size_t nc = static_cast<size_t>(grid.n_points());
        w_.assign(nc, cd(0.0, 0.0));
        v_.assign(nc, cd(0.0, 0.0));
        cv_.assign(nc, cd(0.0, 0.0));

        auto mk = [&] { return BatchAccumulator(batch_len_); };
        for (auto* a : global_slots()) *a = mk();
        ShellSeries proto{mk(), mk(), mk(), mk(), mk(), mk(), mk(), mk(), mk(), mk(), mk(), mk()};
        shells_.assign(cfg_.curve_levels.size(), proto);
        forced_power_.assign(forced_flats_.size(), mk());
        spectrum_.assign(spectrum_levels_.size(), mk());
    }

    const DiagnosticsConfig& config() const { return cfg_; }
    double sigma() const { return sigma_; }
    double nu() const { return nu_; }
    const ForcingEnsemble& ensemble() const { return *ens_; }
    const LPFilter& filter() const { return *filter_; }
    const std::vector<long>& forced_modes() const { return forced_flats_; }
    const std::vector<int>& spectrum_levels() const { return spectrum_levels_; }
    const std::vector<long>& spectrum_counts() const { return band_counts_; }
    const std::vector<double>& injection_hi_wa() const { return inj_hi_wa_; }
    const std::vector<double>& injection_lo_ke() const { return inj_lo_ke_; }
    long n_samples() const { return n_samples_; }

    /// Samples whenever the trajectory clock has advanced by sample_dt.
    void maybe_sample(const TrajectoryState& s) {
        if (next_sample_t_ < 0.0) next_sample_t_ = s.t;
        if (s.t + 1e-12 < next_sample_t_) return;
        next_sample_t_ += cfg_.sample_dt;
        sample(s.u, s.t);
    }

    void sample(const SpectralField& u, double t);

    void merge(const TrajectorySampler& other) {
        auto mine = global_slots();
        auto theirs = other.global_slots();
        for (size_t i = 0; i < mine.size(); ++i) mine[i]->merge(*theirs[i]);
        for (size_t i = 0; i < shells_.size(); ++i)
            for (size_t a = 0; a < ShellSeries::count; ++a)
                shells_[i].slot(a).merge(other.shells_[i].slot(a));
        for (size_t i = 0; i < forced_power_.size(); ++i)
            forced_power_[i].merge(other.forced_power_[i]);
        for (size_t i = 0; i < spectrum_.size(); ++i) spectrum_[i].merge(other.spectrum_[i]);
    }

    // One accumulator per scalar observable.
    BatchAccumulator wa_diss, ke_diss, l2_sq, l4_quartic, l4_half, grad_cross, pe_direct,
        re_u2_gradbar2, weak_pe_product, h_kin, h_pot, r_wa_global, r_h_global, r_h_paper;
    std::vector<ShellSeries> shells_;
    std::vector<BatchAccumulator> forced_power_;
    std::vector<BatchAccumulator> spectrum_;

private:
    std::vector<BatchAccumulator*> global_slots() {
        return {&wa_diss,       &ke_diss,   &l2_sq,        &l4_quartic,  &l4_half,
                &grad_cross,    &pe_direct, &re_u2_gradbar2, &weak_pe_product, &h_kin,
                &h_pot,         &r_wa_global, &r_h_global, &r_h_paper};
    }
    std::vector<const BatchAccumulator*> global_slots() const {
        auto v = const_cast<TrajectorySampler*>(this)->global_slots();
        return {v.begin(), v.end()};
    }

    void build_tables() {
        D_ = dissipation_symbol(grid_);
        const long nc = grid_.n_points();
        scatter_.reserve(static_cast<size_t>(nc));
        for (long flat = 0; flat < nc; ++flat)
            if (grid_.retained[flat])
                scatter_.push_back({flat, flat_index(fine_, kappa_of_flat(grid_, flat))});

        std::map<long, double> forced;
        for (size_t j = 0; j < ens_->profiles.size(); ++j) {
            forced[flat_index(grid_, ens_->profiles[j].kappa)] +=
                std::norm(ens_->profiles[j].amplitude);
            sum_amp2_ += std::norm(ens_->profiles[j].amplitude);
        }
        for (const auto& [flat, amp2] : forced) {
            forced_flats_.push_back(flat);
            (void)amp2;
        }

        for (int j = ladder_min_level; j <= ladder_top_level(grid_); ++j)
            spectrum_levels_.push_back(j);
        band_of_mode_.assign(static_cast<size_t>(nc), -1);
        band_counts_.assign(spectrum_levels_.size(), 0);
        for (long i = 0; i < nc; ++i) {
            const double k2 = grid_.k2[i];
            if (k2 <= 0.0 || !grid_.retained[i]) continue;
            for (size_t b = 0; b < spectrum_levels_.size(); ++b) {
                const double lo = dyadic_scale(spectrum_levels_[b]);
                if (k2 > lo * lo && k2 <= 4.0 * lo * lo) {
                    band_of_mode_[i] = static_cast<int>(b);
                    ++band_counts_[b];
                    break;
                }
            }
        }

        for (int level : cfg_.curve_levels) {
            const auto& psi = filter_->lowpass(level);
            double hi = 0.0, lo = 0.0, ito = 0.0;
            for (size_t j = 0; j < ens_->profiles.size(); ++j) {
                const long flat = flat_index(grid_, ens_->profiles[j].kappa);
                const double a2 = std::norm(ens_->profiles[j].amplitude);
                const double p = psi[flat];
                hi += 0.5 * (1.0 - p) * (1.0 - p) * a2;
                lo += 0.5 * p * p * grid_.k2[flat] * a2;
                ito += p * p * a2;
            }
            inj_hi_wa_.push_back(hi);
            inj_lo_ke_.push_back(lo);
            shell_ito_coeff_.push_back(ito);
            level_identity_.push_back(filter_->lowpass_is_identity(level) ? 1 : 0);
            bool null_level = true;
            for (long i = 0; i < nc; ++i)
                if (grid_.retained[i] && psi[i] != 0.0) {
                    null_level = false;
                    break;
                }
            level_null_.push_back(null_level ? 1 : 0);
            level_balance_.push_back(
                std::find(cfg_.balance_levels.begin(), cfg_.balance_levels.end(), level) !=
                        cfg_.balance_levels.end()
                    ? 1
                    : 0);
        }
    }

    TorusGrid grid_;
    const LPFilter* filter_;
    const ForcingEnsemble* ens_;
    double nu_, sigma_;
    DiagnosticsConfig cfg_;
    TorusGrid fine_;
    const FftPlans* plans_;
    double batch_len_ = 1.0;
    double next_sample_t_ = -1.0;
    long n_samples_ = 0;

    std::vector<double> D_;
    std::vector<std::pair<long, long>> scatter_;
    std::vector<long> forced_flats_;
    std::vector<int> spectrum_levels_;
    std::vector<long> band_counts_;
    std::vector<int> band_of_mode_;
    double sum_amp2_ = 0.0;
    std::vector<double> inj_hi_wa_, inj_lo_ke_, shell_ito_coeff_;
    std::vector<char> level_identity_, level_null_, level_balance_;

    std::vector<cd> fine_buf_, u_pad_, v_pad_;
    std::vector<cd> grad_pad_[3];
    std::vector<cd> w_, v_, cv_;
};

inline void TrajectorySampler::sample(const SpectralField& u, double t) {
    if (!u.grid.same_as(grid_)) throw std::invalid_argument("TrajectorySampler: grid mismatch");
    ++n_samples_;
    const long nc = grid_.n_points();
    const long nf = fine_.n_points();
    const double inv_vol = 1.0 / fine_.volume();
    const double fwd_scale = std::pow(fine_.spacing(), fine_.d);
    const double vol2 = grid_.volume() * grid_.volume();
    const double inv_nf = 1.0 / static_cast<double>(nf);
    const double s2 = sigma_ * sigma_;

    // padded physical samples of u and grad u
    std::fill(u_pad_.begin(), u_pad_.end(), cd(0.0, 0.0));
    for (const auto& [c, f] : scatter_) u_pad_[f] = u.coeff[c];
    for (int a = 0; a < grid_.d; ++a) {
        auto& gbuf = grad_pad_[a];
        std::fill(gbuf.begin(), gbuf.end(), cd(0.0, 0.0));
        const auto& ka = fine_.k_axis[a];
        for (const auto& [c, f] : scatter_) gbuf[f] = cd(0.0, ka[f]) * u_pad_[f];
        plans_->backward_inplace(gbuf.data());
        for (auto& z : gbuf) z *= inv_vol;
    }
    plans_->backward_inplace(u_pad_.data());
    for (auto& z : u_pad_) z *= inv_vol;

    // dealiased cubic of u
    for (long i = 0; i < nf; ++i) {
        const cd z = u_pad_[i];
        fine_buf_[i] = std::norm(z) * z;
    }
    plans_->forward_inplace(fine_buf_.data());
    std::fill(w_.begin(), w_.end(), cd(0.0, 0.0));
    for (const auto& [c, f] : scatter_) w_[c] = fine_buf_[f] * fwd_scale;

    // pointwise quartic integrands
    double l4 = 0.0, cross = 0.0, u2gb2 = 0.0, grad4 = 0.0;
    for (long i = 0; i < nf; ++i) {
        const cd z = u_pad_[i];
        const double a2 = std::norm(z);
        l4 += a2 * a2;
        double g2 = 0.0;
        cd gb2(0.0, 0.0);
        for (int a = 0; a < grid_.d; ++a) {
            g2 += std::norm(grad_pad_[a][i]);
            const cd gc = std::conj(grad_pad_[a][i]);
            gb2 += gc * gc;
        }
        cross += a2 * g2;
        grad4 += g2 * g2;
        u2gb2 += (z * z * gb2).real();
    }
    l4 *= inv_nf;
    cross *= inv_nf;
    u2gb2 *= inv_nf;
    const double grad_l4_half = std::sqrt(grad4 * inv_nf);  // ||grad u||_{L^4}^2

    // spectral sums
    double s_wa = 0.0, s_ke = 0.0, s_l2 = 0.0, s_pe = 0.0, s_kin = 0.0;
    for (long i = 0; i < nc; ++i) {
        const double p2 = std::norm(u.coeff[i]);
        s_l2 += p2;
        s_wa += D_[i] * p2;
        s_ke += grid_.k2[i] * D_[i] * p2;
        s_kin += grid_.k2[i] * p2;
        s_pe += D_[i] * (std::conj(u.coeff[i]) * w_[i]).real();
    }
    s_wa /= vol2;
    s_ke /= vol2;
    s_l2 /= vol2;
    s_pe /= vol2;
    s_kin /= vol2;

    wa_diss.accumulate(s_wa, t);
    ke_diss.accumulate(s_ke, t);
    l2_sq.accumulate(s_l2, t);
    l4_quartic.accumulate(l4, t);
    const double l4h = std::sqrt(l4);
    l4_half.accumulate(l4h, t);
    grad_cross.accumulate(cross, t);
    pe_direct.accumulate(s_pe, t);
    re_u2_gradbar2.accumulate(u2gb2, t);
    weak_pe_product.accumulate(l4h * grad_l4_half, t);
    h_kin.accumulate(0.5 * s_kin, t);
    h_pot.accumulate(0.25 * sigma_ * l4, t);

    const double ito_quad = sum_amp2_ * s_l2;  // sum_j fint |u|^2 |g_j|^2, |g_j| constant
    r_wa_global.accumulate(nu_ / s2 * s_wa - ens_->eps_wa, t);
    if (cfg_.linear_mode) {
        r_h_global.accumulate(nu_ / s2 * s_ke - ens_->eps_ke, t);
        r_h_paper.accumulate(nu_ / s2 * s_ke - ens_->eps_ke, t);
    } else {
        // exact form: the paired real noise makes the Hessian Ito term equal
        // to half the quadratic one, doubling the literal coefficient
        r_h_global.accumulate(
            nu_ / s2 * s_ke + nu_ / sigma_ * s_pe - ens_->eps_ke - sigma_ * ito_quad, t);
        r_h_paper.accumulate(nu_ / s2 * s_ke + nu_ / sigma_ * (l4 + 3.0 * cross) - ens_->eps_ke -
                                 0.5 * sigma_ * ito_quad,
                             t);
    }

    for (size_t a = 0; a < forced_flats_.size(); ++a)
        forced_power_[a].accumulate(std::norm(u.coeff[forced_flats_[a]]), t);
    {
        std::vector<double> band(spectrum_levels_.size(), 0.0);
        for (long i = 0; i < nc; ++i)
            if (band_of_mode_[i] >= 0) band[band_of_mode_[i]] += std::norm(u.coeff[i]);
        for (size_t b = 0; b < spectrum_.size(); ++b) spectrum_[b].accumulate(band[b] / vol2, t);
    }

    // per-shell fluxes, projected dissipation, and balance residuals
    for (size_t li = 0; li < cfg_.curve_levels.size(); ++li) {
        const auto& psi = filter_->lowpass(cfg_.curve_levels[li]);
        ShellSeries& sh = shells_[li];

        double pi_wa_v = 0.0, pi_ke_v = 0.0;
        double lo_wa_v = 0.0, hi_wa_v = 0.0, lo_ke_v = 0.0, hi_ke_v = 0.0;
        for (long i = 0; i < nc; ++i) {
            const double p = psi[i];
            const double hi = 1.0 - p;
            const double im = (std::conj(u.coeff[i]) * w_[i]).imag();
            pi_wa_v += hi * hi * im;
            pi_ke_v += grid_.k2[i] * p * p * im;
            const double p2 = std::norm(u.coeff[i]);
            lo_wa_v += p * p * D_[i] * p2;
            hi_wa_v += hi * hi * D_[i] * p2;
            lo_ke_v += p * p * grid_.k2[i] * D_[i] * p2;
            hi_ke_v += hi * hi * grid_.k2[i] * D_[i] * p2;
        }
        pi_wa_v /= vol2;
        pi_ke_v /= vol2;
        lo_wa_v /= vol2;
        hi_wa_v /= vol2;
        lo_ke_v /= vol2;
        hi_ke_v /= vol2;

        // Pi_H and the low-pass potential terms need the cubic of v = P_{<=N} u.
        double pi_h_v = 0.0, v_l2 = 0.0, v_pe = 0.0, v_l4 = 0.0, v_cross = 0.0;
        const bool want_balance = level_balance_[li] != 0 && !cfg_.linear_mode;
        if (!level_null_[li]) {
            for (long i = 0; i < nc; ++i) v_[i] = psi[i] * u.coeff[i];
            if (level_identity_[li]) {
                cv_ = w_;
                v_cross = cross;
            } else {
                std::fill(v_pad_.begin(), v_pad_.end(), cd(0.0, 0.0));
                for (const auto& [c, f] : scatter_) v_pad_[f] = v_[c];
                plans_->backward_inplace(v_pad_.data());
                for (auto& z : v_pad_) z *= inv_vol;
                for (long i = 0; i < nf; ++i) {
                    const cd z = v_pad_[i];
                    fine_buf_[i] = std::norm(z) * z;
                }
                plans_->forward_inplace(fine_buf_.data());
                std::fill(cv_.begin(), cv_.end(), cd(0.0, 0.0));
                for (const auto& [c, f] : scatter_) cv_[c] = fine_buf_[f] * fwd_scale;
                if (want_balance) {
                    // || v grad v ||^2 for the literal three-term decomposition
                    double acc = 0.0;
                    for (int a = 0; a < grid_.d; ++a) {
                        auto& gbuf = grad_pad_[a];  // global integrands already harvested
                        std::fill(gbuf.begin(), gbuf.end(), cd(0.0, 0.0));
                        const auto& ka = fine_.k_axis[a];
                        for (const auto& [c, f] : scatter_) gbuf[f] = cd(0.0, ka[f]) * v_[c];
                        plans_->backward_inplace(gbuf.data());
                    }
                    for (long i = 0; i < nf; ++i) {
                        double g2 = 0.0;
                        for (int a = 0; a < grid_.d; ++a)
                            g2 += std::norm(grad_pad_[a][i] * inv_vol);
                        acc += std::norm(v_pad_[i]) * g2;
                    }
                    v_cross = acc * inv_nf;
                }
            }
            double term1 = 0.0, term2 = 0.0;
            for (long i = 0; i < nc; ++i) {
                const cd commutator = psi[i] * w_[i] - cv_[i];
                term1 += grid_.k2[i] * (std::conj(v_[i]) * commutator).imag();
                term2 += (std::conj(cv_[i]) * (psi[i] * w_[i])).imag();
                const double pv2 = std::norm(v_[i]);
                v_l2 += pv2;
                v_pe += D_[i] * (std::conj(v_[i]) * cv_[i]).real();
                v_l4 += (std::conj(v_[i]) * cv_[i]).real();
            }
            pi_h_v = (term1 + sigma_ * term2) / vol2;
            v_l2 /= vol2;
            v_pe /= vol2;
            v_l4 /= vol2;
        }

        sh.pi_wa.accumulate(pi_wa_v, t);
        sh.pi_ke.accumulate(pi_ke_v, t);
        sh.pi_h.accumulate(pi_h_v, t);
        sh.lo_wa.accumulate(lo_wa_v, t);
        sh.hi_wa.accumulate(hi_wa_v, t);
        sh.lo_ke.accumulate(lo_ke_v, t);
        sh.hi_ke.accumulate(hi_ke_v, t);
        sh.v_l2.accumulate(v_l2, t);

        if (cfg_.linear_mode) {
            sh.r_wa.accumulate(nu_ / s2 * hi_wa_v - inj_hi_wa_[li], t);
            sh.r_ke.accumulate(nu_ / s2 * lo_ke_v - inj_lo_ke_[li], t);
            sh.r_h.accumulate(nu_ / s2 * lo_ke_v - inj_lo_ke_[li], t);
            sh.h_paper_gap.accumulate(0.0, t);
        } else {
            sh.r_wa.accumulate(pi_wa_v / sigma_ + nu_ / s2 * hi_wa_v - inj_hi_wa_[li], t);
            sh.r_ke.accumulate(pi_ke_v / sigma_ + nu_ / s2 * lo_ke_v - inj_lo_ke_[li], t);
            const double shell_ito = shell_ito_coeff_[li] * v_l2;
            sh.r_h.accumulate(pi_h_v / sigma_ + nu_ / s2 * lo_ke_v + nu_ / sigma_ * v_pe -
                                  inj_lo_ke_[li] - sigma_ * shell_ito,
                              t);
            const double gap = want_balance
                                   ? (nu_ / sigma_ * (v_l4 + 3.0 * v_cross) -
                                      0.5 * sigma_ * shell_ito) -
                                         (nu_ / sigma_ * v_pe - sigma_ * shell_ito)
                                   : 0.0;
            sh.h_paper_gap.accumulate(gap, t);
        }
    }
}

}  // namespace nlsc
