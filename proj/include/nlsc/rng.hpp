#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "nlsc/grid.hpp"

namespace nlsc {

/// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
/// bit-identical across platforms and standard library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in (0, 1].
    double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Standard normal pair via Box-Muller.
    std::array<double, 2> next_normal_pair() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return {r * std::cos(two_pi * u2), r * std::sin(two_pi * u2)};
    }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        auto z = next_normal_pair();
        spare_ = z[1];
        have_spare_ = true;
        return z[0];
    }

    /// Standard circular complex normal (each component variance 1/2, E|z|^2 = 1).
    cd next_complex_normal() {
        auto z = next_normal_pair();
        return cd(z[0], z[1]) * 0.7071067811865475244;
    }

    std::array<std::uint64_t, 4> state() const { return s_; }
    bool has_spare() const { return have_spare_; }
    double spare() const { return spare_; }
    void restore(const std::array<std::uint64_t, 4>& s, bool have_spare, double spare) {
        s_ = s;
        have_spare_ = have_spare;
        spare_ = spare;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_ = {1, 2, 3, 4};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nlsc
