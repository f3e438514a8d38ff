#include <cmath>

#include "doctest.h"
#include "nlsc/littlewood_paley.hpp"
#include "test_helpers.hpp"

using namespace nlsc;
using namespace nlsc::testing;

TEST_CASE("psi cutoff: plateaus exact, bridge smooth and monotone") {
    CHECK(psi_cutoff_r2(0.0) == 1.0);
    CHECK(psi_cutoff_r2(1.0) == 1.0);
    CHECK(psi_cutoff_r2(4.0) == 0.0);
    CHECK(psi_cutoff_r2(9.0) == 0.0);
    double prev = 1.0;
    for (double r = 1.001; r < 2.0; r += 0.001) {
        const double v = psi_cutoff_r2(r * r);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (r > 1.05 && r < 1.95) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        prev = v;
    }
}

TEST_CASE("low-pass plateaus on single modes") {
    auto g = make_grid(2, 32, 1.0);
    LPFilter f(g);
    auto u1 = plane_wave(g, {1, 0, 0}, cd(2.0, 1.0));
    auto kept = lp_project_low(f, u1, 2.0);  // |k|/N = 1/2, inside the plateau
    CHECK(max_rel_diff(kept.coeff, u1.coeff) == 0.0);

    auto u8 = plane_wave(g, {8, 0, 0}, cd(1.0, 0.0));
    auto killed = lp_project_low(f, u8, 2.0);  // |k|/N = 4 >= 2
    for (const auto& c : killed.coeff) CHECK(c == cd(0.0, 0.0));
}

TEST_CASE("low-pass idempotent on fields supported below the plateau edge") {
    auto g = make_grid(2, 32, 1.0);
    LPFilter f(g);
    Rng rng(11);
    auto u = random_band_limited(g, 2, rng);  // |k| <= 2 sqrt(2) < 4
    auto once = lp_project_low(f, u, 4.0);    // psi = 1 on |k| <= 4
    CHECK(max_rel_diff(once.coeff, u.coeff) == 0.0);
}

TEST_CASE("shell multiplier value at |k| = 3N/2") {
    auto g = make_grid(2, 32, 1.0);
    LPFilter f(g);
    const int level = 1;  // N = 2, mode |k| = 3
    auto u = plane_wave(g, {3, 0, 0}, cd(1.0, 0.0));
    auto s = lp_shell(f, u, level);
    const double want = 1.0 - psi_cutoff_r2(1.5 * 1.5);  // psi(3/4)=1, so 1 - psi(3/2)
    const long idx = flat_index(g, {3, 0, 0});
    CHECK(s.coeff[idx] == u.coeff[idx] * want);
}

TEST_CASE("telescoping is exact at multiplier level and to roundoff on fields") {
    for (double lambda : {1.0, 2.0, 4.0}) {
        auto g = make_grid(2, 32, lambda);
        LPFilter f(g);
        const int top = ladder_top_level(g);

        // Multiplier algebra: sum of shells + lowest low-pass == highest low-pass, bitwise.
        std::vector<double> acc = f.lowpass(ladder_min_level);
        for (int j = ladder_min_level; j <= top; ++j) {
            const auto& s = f.shell(j);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += s[i];
        }
        const auto& topmult = f.lowpass(top + 1);
        for (size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == topmult[i]);
        // and the top low-pass is the identity on the retained band
        CHECK(f.lowpass_is_identity(top + 1));

        // Field level: reconstruction error at the roundoff scale.
        Rng rng(31);
        auto u = random_band_limited(g, g.kappa_max(), rng);
        auto sum = lp_project_low(f, u, ladder_min_level);
        for (int j = ladder_min_level; j <= top; ++j) {
            auto s = lp_shell(f, u, j);
            for (size_t i = 0; i < sum.coeff.size(); ++i) sum.coeff[i] += s.coeff[i];
        }
        CHECK(max_rel_diff(sum.coeff, u.coeff) <= 1e-15);
    }
}

TEST_CASE("shells two or more octaves apart are exactly orthogonal") {
    auto g = make_grid(2, 64, 1.0);
    LPFilter f(g);
    Rng rng(8);
    auto u = random_band_limited(g, g.kappa_max(), rng);
    for (int j = -1; j <= 4; ++j)
        for (int i = -1; i <= 4; ++i) {
            if (std::abs(i - j) < 2) continue;
            auto uj = lp_shell(f, u, j);
            auto ui = lp_shell(f, u, i);
            CHECK(spectral_pairing(uj, ui) == cd(0.0, 0.0));
        }
}

TEST_CASE("reproducing identity P_{N/8<=.<=8N} P_N = P_N as exact multiplier algebra") {
    auto g = make_grid(2, 64, 2.0);
    LPFilter f(g);
    for (int j = -2; j <= 3; ++j) {
        const auto& s = f.shell(j);
        const auto& lo = f.lowpass(j - 3);  // psi(k / (N/8))
        const auto& hi = f.lowpass(j + 3);  // psi(k / 8N)
        for (size_t i = 0; i < s.size(); ++i) {
            const double band = hi[i] - lo[i];
            CHECK(s[i] * (band - 1.0) == 0.0);
        }
    }
}

TEST_CASE("reconstruction with all cross terms and the diagonal-only defect") {
    auto g = make_grid(2, 32, 1.0);
    LPFilter f(g);
    Rng rng(21);
    auto u = random_band_limited(g, g.kappa_max(), rng, /*mean_zero=*/true);
    const double usq = l2_volume_sq(u);
    const int top = ladder_top_level(g);

    double full = 0.0, diagonal = 0.0;
    for (int j = ladder_min_level; j <= top; ++j) {
        auto uj = lp_shell(f, u, j);
        diagonal += l2_volume_sq(uj);
        for (int i = ladder_min_level; i <= top; ++i)
            full += spectral_pairing(uj, lp_shell(f, u, i)).real();
    }
    CHECK(rel_err(full, usq) <= 1e-12);
    // The diagonal sum alone differs for a smooth cutoff; the defect is the
    // cross-term mass sitting in the transition zones.
    const double defect = std::abs(usq - diagonal);
    CHECK(defect / usq > 1e-8);
    CHECK(defect / usq < 1.0);
}

TEST_CASE("sharp cutoff variant: projections are true projections") {
    auto g = make_grid(2, 32, 1.0);
    LPFilter f(g, CutoffKind::Sharp);
    Rng rng(3);
    auto u = random_band_limited(g, g.kappa_max(), rng);
    auto low = lp_project_low(f, u, 2.0);
    auto twice = lp_project_low(f, low, 2.0);
    CHECK(max_rel_diff(twice.coeff, low.coeff) == 0.0);
    // diagonal reconstruction is exact for the sharp cutoff
    const int top = ladder_top_level(g);
    double diagonal = l2_volume_sq(lp_project_low(f, u, ladder_min_level));
    for (int j = ladder_min_level; j <= top; ++j) diagonal += l2_volume_sq(lp_shell(f, u, j));
    CHECK(rel_err(diagonal, l2_volume_sq(u)) <= 1e-12);
}
