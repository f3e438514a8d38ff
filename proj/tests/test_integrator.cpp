#include <cmath>

#include "doctest.h"
#include "nlsc/integrator.hpp"
#include "nlsc/stats.hpp"
#include "test_helpers.hpp"

using namespace nlsc;
using namespace nlsc::testing;

TEST_CASE("noise-free linear step: exact exponential decay and phase rotation") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(1);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    const double nu = 0.25, dt = 0.01;
    StochasticIntegrator integ(g, ens, nu, /*sigma=*/0.0, dt);

    auto s = make_initial_state(g, 7);
    const long idx = flat_index(g, {1, 0, 0});
    s.u.coeff[idx] = cd(2.0, 1.0) * g.volume();
    const cd before = s.u.coeff[idx];
    integ.step(s);
    const cd after = s.u.coeff[idx];
    // D(k) = 2 at |k| = 1: modulus factor e^{-2 nu dt}, phase advance |k|^2 dt.
    CHECK(rel_err(std::abs(after), std::abs(before) * std::exp(-2.0 * nu * dt)) <= 1e-14);
    CHECK(std::abs(std::arg(after / before) - dt) <= 1e-13);
}

TEST_CASE("closed-form linear spectrum: plug-in values and the exact aggregate identity") {
    auto g = make_grid(2, 32, 1.0);
    Rng frng(2);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    const double nu = 0.1, sigma = 0.5;
    auto oracle = exact_linear_spectrum(ens, nu, sigma, g);

    // Single mode check: E|u_hat(k)|^2 = sigma^2 sum |g_hat(k)|^2 / (2 nu D).
    const long idx = flat_index(g, ens.profiles[0].kappa);
    double ghat2 = 0.0;
    for (size_t j = 0; j < ens.profiles.size(); ++j)
        if (flat_index(g, ens.profiles[j].kappa) == idx)
            ghat2 += std::norm(ens.profiles[j].amplitude) * g.volume() * g.volume();
    const double D = 1.0 + g.k2[idx];
    CHECK(rel_err(oracle.mode_power[idx], sigma * sigma * ghat2 / (2.0 * nu * D)) <= 1e-13);

    // nu sum D E|u|^2 / vol^2 = sigma^2 eps_wa, by cancellation of D(k).
    CHECK(rel_err(oracle.wa_dissipation, oracle.injection) <= 1e-13);

    // Large nu: stationary variance vanishes like 1/nu.
    auto stiff = exact_linear_spectrum(ens, 1e6, sigma, g);
    CHECK(rel_err(stiff.mode_power[idx], oracle.mode_power[idx] * nu / 1e6) <= 1e-12);
}

TEST_CASE("one-step transition sampling matches the exact OU covariance") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(3);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    const double nu = 0.2, sigma = 0.6, dt = 0.05;
    StochasticIntegrator integ(g, ens, nu, sigma, dt, {.nonlinear = false});

    const long idx = flat_index(g, ens.profiles[0].kappa);
    double ghat2 = 0.0;
    for (size_t j = 0; j < ens.profiles.size(); ++j)
        if (flat_index(g, ens.profiles[j].kappa) == idx)
            ghat2 += std::norm(ens.profiles[j].amplitude) * g.volume() * g.volume();
    const double D = 1.0 + g.k2[idx];
    const double want_var =
        sigma * sigma * ghat2 * (1.0 - std::exp(-2.0 * nu * D * dt)) / (2.0 * nu * D);

    const int n_draws = 20000;
    double var = 0.0;
    cd mean(0.0, 0.0), pseudo(0.0, 0.0);
    auto s = make_initial_state(g, 11);
    for (int i = 0; i < n_draws; ++i) {
        std::fill(s.u.coeff.begin(), s.u.coeff.end(), cd(0.0, 0.0));
        integ.step(s);
        const cd z = s.u.coeff[idx];
        mean += z;
        pseudo += z * z;
        var += std::norm(z);
    }
    var /= n_draws;
    mean /= static_cast<double>(n_draws);
    pseudo /= static_cast<double>(n_draws);
    CHECK(rel_err(var, want_var) <= 5.0 * std::sqrt(2.0 / n_draws));
    CHECK(std::abs(mean) <= 5.0 * std::sqrt(want_var / n_draws));
    // paired forcing makes the increment circular: pseudo-covariance ~ 0
    CHECK(std::abs(pseudo) <= 5.0 * want_var / std::sqrt(static_cast<double>(n_draws)));
}

TEST_CASE("linear stationary spectrum reproduced over a long run") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(4);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    const double nu = 0.3, sigma = 0.5, dt = 0.02;
    StochasticIntegrator integ(g, ens, nu, sigma, dt, {.nonlinear = false});
    auto oracle = exact_linear_spectrum(ens, nu, sigma, g);

    std::vector<long> forced;
    for (long i = 0; i < g.n_points(); ++i)
        if (oracle.mode_power[i] > 0.0) forced.push_back(i);

    auto s = make_initial_state(g, 99);
    const double t_burn = 30.0, t_avg = 600.0;
    while (s.t < t_burn) integ.step(s);
    std::vector<BatchAccumulator> acc(forced.size(), BatchAccumulator(t_avg / 50.0));
    const double t_end = s.t + t_avg;
    while (s.t < t_end) {
        integ.step(s);
        for (size_t a = 0; a < forced.size(); ++a)
            acc[a].accumulate(std::norm(s.u.coeff[forced[a]]), s.t);
    }
    int hits = 0;
    for (size_t a = 0; a < forced.size(); ++a) {
        auto est = acc[a].finalize();
        if (std::abs(est.mean - oracle.mode_power[forced[a]]) <= 4.0 * est.stderr_val) ++hits;
    }
    CHECK(hits >= static_cast<int>(0.9 * forced.size()));
}

TEST_CASE("deterministic mode: plane wave is an exact solution") {
    auto g = make_grid(2, 32, 1.0);
    const double sigma = 0.4, dt = 1e-3;
    DeterministicIntegrator integ(g, sigma, dt);
    auto s = make_initial_state(g, 0);
    const long idx = flat_index(g, {1, 0, 0});
    s.u.coeff[idx] = g.volume();
    const int n_steps = 1000;
    for (int i = 0; i < n_steps; ++i) integ.step(s);
    // u(t) = e^{i(x1 + t + sigma t)} under the adopted dispersion sign.
    const double T = n_steps * dt;
    const cd want = std::polar(1.0, (1.0 + sigma) * T) * g.volume();
    CHECK(std::abs(s.u.coeff[idx] - want) <= 1e-12 * g.volume());
    for (long i = 0; i < g.n_points(); ++i)
        if (i != idx) CHECK(std::abs(s.u.coeff[i]) <= 1e-12 * g.volume());
}

TEST_CASE("deterministic mode conserves wave action to roundoff per step") {
    auto g = make_grid(2, 32, 1.0);
    DeterministicIntegrator integ(g, 0.7, 2e-3);
    Rng rng(5);
    auto s = make_initial_state(g, 0);
    s.u = random_band_limited(g, 4, rng);
    for (auto& c : s.u.coeff) c *= 0.1;  // smooth, moderate-amplitude data
    double wa_prev = wave_action(s.u);
    const double wa0 = wa_prev;
    for (int i = 0; i < 500; ++i) {
        integ.step(s);
        const double wa = wave_action(s.u);
        CHECK(std::abs(wa - wa_prev) <= 1e-12 * wa0);
        wa_prev = wa;
    }
}

TEST_CASE("deterministic mode: Hamiltonian drift is small and O(dt^2)") {
    auto g = make_grid(2, 32, 1.0);
    const double sigma = 0.5;
    Rng rng(17);
    auto u0 = random_band_limited(g, 4, rng);
    for (auto& c : u0.coeff) c *= 0.1;

    auto drift = [&](double dt) {
        DeterministicIntegrator integ(g, sigma, dt);
        TrajectoryState s{u0, 0.0, Rng(0)};
        const double h0 = hamiltonian(s.u, sigma).total;
        const long n = static_cast<long>(std::llround(1.0 / dt));
        for (long i = 0; i < n; ++i) integ.step(s);
        return std::abs(hamiltonian(s.u, sigma).total - h0) / h0;
    };
    const double e1 = drift(1e-3);
    const double e2 = drift(5e-4);
    CHECK(e1 <= 1e-6);
    CHECK(e1 / e2 >= 4.0 * 0.8);
    CHECK(e1 / e2 <= 4.0 * 1.25);
}

TEST_CASE("seed determinism: identical seed and params give identical trajectories") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(6);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    auto run = [&]() {
        StochasticIntegrator integ(g, ens, 0.1, 0.5, 5e-3);
        auto s = make_initial_state(g, 31337);
        for (int i = 0; i < 200; ++i) integ.step(s);
        return s.u.coeff;
    };
    auto a = run();
    auto b = run();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("checkpoint resume is bit exact") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(8);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    StochasticIntegrator integ(g, ens, 0.1, 0.5, 5e-3);

    auto s = make_initial_state(g, 4242);
    for (int i = 0; i < 100; ++i) integ.step(s);
    const double t_saved = s.t;
    auto j = checkpoint_to_json(s, "deadbeef");
    for (int i = 0; i < 50; ++i) integ.step(s);

    auto r = checkpoint_from_json(j);
    CHECK(r.t == t_saved);
    for (int i = 0; i < 50; ++i) integ.step(r);
    CHECK(r.t == s.t);
    for (size_t i = 0; i < s.u.coeff.size(); ++i) CHECK(r.u.coeff[i] == s.u.coeff[i]);
}

TEST_CASE("stability guard trips under strict mode and counts under relax") {
    auto g = make_grid(2, 16, 1.0);
    Rng frng(9);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    auto s = make_initial_state(g, 1);
    s.u.coeff[flat_index(g, {1, 0, 0})] = 100.0 * g.volume();  // max|u|^2 = 1e4

    StochasticIntegrator strict(g, ens, 0.1, 0.5, 0.01);
    auto s1 = s;
    CHECK_THROWS_AS(strict.step(s1), StabilityError);

    StochasticIntegrator relaxed(g, ens, 0.1, 0.5, 0.01, {.nonlinear = true, .strict_guard = false});
    auto s2 = s;
    relaxed.step(s2);
    CHECK(relaxed.guard_trips() == 1);
}

TEST_CASE("auto dt resolves the fastest damped mode") {
    auto g = make_grid(2, 64, 1.0);
    Rng frng(10);
    auto ens = build_forcing(g, 0.5, 2.0, 0, 1.0, frng);
    const double dt = auto_dt(g, ens, 0.1, 0.5);
    double k2max = 0.0;
    for (long i = 0; i < g.n_points(); ++i)
        if (g.retained[i]) k2max = std::max(k2max, g.k2[i]);
    CHECK(dt <= 0.5 / (0.1 * (1.0 + k2max)) * (1.0 + 1e-12));
    CHECK(dt > 0.0);
    CHECK(rel_err(auto_t_burn(0.1, 0.5), 40.0) <= 1e-13);
}
