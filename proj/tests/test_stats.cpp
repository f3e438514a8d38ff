#include <cmath>

#include "doctest.h"
#include "nlsc/rng.hpp"
#include "nlsc/stats.hpp"
#include "test_helpers.hpp"

using namespace nlsc;
using namespace nlsc::testing;

TEST_CASE("constant stream: mean exact, stderr zero") {
    BatchAccumulator acc(1.0);
    for (int i = 0; i < 1000; ++i) acc.accumulate(3.25, i * 0.01);
    auto est = acc.finalize();
    CHECK(est.mean == 3.25);
    CHECK(est.stderr_val == 0.0);
    CHECK(est.n_batches == 10);
}

TEST_CASE("alternating +-1 cancels within batches") {
    BatchAccumulator acc(10.0);
    for (int i = 0; i < 100000; ++i) acc.accumulate(i % 2 == 0 ? 1.0 : -1.0, i * 0.01);
    auto est = acc.finalize();
    CHECK(std::abs(est.mean) <= 1e-3);
    CHECK(est.stderr_val <= 1e-3);
}

TEST_CASE("non-monotone time is an ordering error") {
    BatchAccumulator acc(1.0);
    acc.accumulate(1.0, 0.0);
    acc.accumulate(1.0, 1.0);
    CHECK_THROWS_AS(acc.accumulate(1.0, 0.5), std::runtime_error);
}

TEST_CASE("fewer than two complete batches is an estimation error") {
    BatchAccumulator acc(100.0);
    for (int i = 0; i < 10; ++i) acc.accumulate(1.0, i * 0.1);
    CHECK_THROWS_AS((void)acc.finalize(), std::runtime_error);
}

TEST_CASE("two equal batches give stderr zero") {
    BatchAccumulator acc(1.0);
    for (int i = 0; i < 200; ++i) acc.accumulate(i % 2 == 0 ? 2.0 : 4.0, i * 0.01);
    auto est = acc.finalize();  // every batch averages the same 2,4 pattern
    CHECK(est.mean == 3.0);
    CHECK(est.stderr_val == 0.0);
}

TEST_CASE("iid gaussian: stderr equals sd(batch means)/sqrt(n) by construction") {
    Rng rng(123);
    BatchAccumulator acc(1.0);
    std::vector<double> kept;
    for (int i = 0; i < 50000; ++i) acc.accumulate(rng.next_normal(), i * 0.001);
    auto est = acc.finalize();
    const auto& means = acc.batch_means();
    const int n = static_cast<int>(means.size());
    REQUIRE(n == 50);
    double mu = 0.0;
    for (double b : means) mu += b;
    mu /= n;
    double ss = 0.0;
    for (double b : means) ss += (b - mu) * (b - mu);
    CHECK(rel_err(est.stderr_val, std::sqrt(ss / (n - 1.0) / n)) <= 1e-13);
    CHECK(est.mean == mu);
}

TEST_CASE("AR(1) stream: batch-means stderr tracks the analytic asymptotic") {
    const double rho = 0.9;
    const long n_samples = 200000;
    Rng rng(77);
    BatchAccumulator acc(static_cast<double>(n_samples) / 50.0);
    double x = 0.0;
    const double innov = std::sqrt(1.0 - rho * rho);
    for (long i = 0; i < n_samples; ++i) {
        x = rho * x + innov * rng.next_normal();
        acc.accumulate(x, static_cast<double>(i));
    }
    auto est = acc.finalize();
    // Var(mean) ~ (1/n) (1+rho)/(1-rho) for unit-variance AR(1).
    const double analytic = std::sqrt((1.0 + rho) / (1.0 - rho) / n_samples);
    CHECK(std::abs(est.stderr_val - analytic) / analytic <= 0.3);
}

TEST_CASE("re-chunking 50 -> 25 batches changes stderr by less than 1.5x") {
    Rng rng(9);
    const long n_samples = 100000;
    BatchAccumulator a50(n_samples / 50.0), a25(n_samples / 25.0);
    double x = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        x = 0.5 * x + rng.next_normal();
        a50.accumulate(x, static_cast<double>(i));
        a25.accumulate(x, static_cast<double>(i));
    }
    const double s50 = a50.finalize().stderr_val;
    const double s25 = a25.finalize().stderr_val;
    CHECK(s50 / s25 < 1.5);
    CHECK(s25 / s50 < 1.5);
}

TEST_CASE("OU observable: 3-sigma coverage of the known mean across replicates") {
    // Discrete OU with mean 2: x' = x + theta (mu - x) dt + sqrt(dt) xi.
    const double theta = 1.0, mu = 2.0, dt = 0.05, T = 500.0;
    int covered = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng(1000 + rep);
        BatchAccumulator acc(T / 50.0);
        double x = mu;
        for (double t = 0.0; t < T; t += dt) {
            x += theta * (mu - x) * dt + std::sqrt(dt) * rng.next_normal();
            acc.accumulate(x, t);
        }
        auto est = acc.finalize();
        if (est.consistent_with(mu)) ++covered;
    }
    CHECK(covered >= 95);
}

TEST_CASE("merge concatenates batches and is order independent") {
    Rng rng(4);
    BatchAccumulator a(1.0), b(1.0);
    for (int i = 0; i < 20000; ++i) a.accumulate(rng.next_normal() + 1.0, i * 0.001);
    for (int i = 0; i < 20000; ++i) b.accumulate(rng.next_normal() + 1.0, i * 0.001);

    BatchAccumulator ab = a, ba = b;
    ab.merge(b);
    ba.merge(a);
    CHECK(ab.finalize().n_batches == 40);
    CHECK(ab.finalize().mean == ba.finalize().mean);
    CHECK(ab.finalize().stderr_val == ba.finalize().stderr_val);

    BatchAccumulator other(2.0);
    CHECK_THROWS_AS(ab.merge(other), std::invalid_argument);
}

TEST_CASE("deterministic replay: same seed gives bit-identical estimates") {
    auto run = [] {
        Rng rng(555);
        BatchAccumulator acc(1.0);
        for (int i = 0; i < 10000; ++i) acc.accumulate(rng.next_normal(), i * 0.01);
        return acc.finalize();
    };
    auto e1 = run();
    auto e2 = run();
    CHECK(e1.mean == e2.mean);
    CHECK(e1.stderr_val == e2.stderr_val);
}
