#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "nlsc/grid.hpp"

namespace nlsc {

/// In-place unnormalized d-dimensional complex DFT plans for one (d, m)
/// shape. Two plan variants are kept: a SIMD-enabled one bound to the
/// alignment class of fftw_alloc (which glibc vectors normally share) and an
/// FFTW_UNALIGNED fallback, selected per call from the buffer's actual
/// alignment. FFTW_ESTIMATE keeps plan selection deterministic;
/// fftw_execute_dft on distinct arrays is thread safe.
class FftPlans {
public:
    FftPlans(int d, int m) : d_(d), m_(m) {
        long n = 1;
        for (int a = 0; a < d; ++a) n *= m;
        std::vector<int> dims(d, m);
        fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n));
        if (!buf) throw std::runtime_error("FftPlans: allocation failed");
        ref_alignment_ = fftw_alignment_of(reinterpret_cast<double*>(buf));
        fwd_ = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        fwd_any_ =
            fftw_plan_dft(d, dims.data(), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_any_ =
            fftw_plan_dft(d, dims.data(), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        if (!fwd_ || !bwd_ || !fwd_any_ || !bwd_any_)
            throw std::runtime_error("FftPlans: planning failed");
    }
    ~FftPlans() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_destroy_plan(fwd_any_);
        fftw_destroy_plan(bwd_any_);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

    /// Sum_n x_n e^{-2 pi i kappa.n / m}, in place.
    void forward_inplace(cd* data) const {
        fftw_complex* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(aligned(data) ? fwd_ : fwd_any_, p, p);
    }
    /// Sum_kappa X_kappa e^{+2 pi i kappa.n / m}, in place.
    void backward_inplace(cd* data) const {
        fftw_complex* p = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(aligned(data) ? bwd_ : bwd_any_, p, p);
    }

    /// Shared plan cache; creation is serialized (the FFTW planner is not
    /// thread safe), lookups are cheap.
    static const FftPlans& get(int d, int m) {
        static std::mutex mu;
        static std::map<std::pair<int, int>, std::unique_ptr<FftPlans>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_pair(d, m);
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, std::make_unique<FftPlans>(d, m)).first;
        return *it->second;
    }

private:
    bool aligned(cd* data) const {
        return fftw_alignment_of(reinterpret_cast<double*>(data)) == ref_alignment_;
    }

    int d_, m_;
    int ref_alignment_ = 0;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
    fftw_plan fwd_any_ = nullptr, bwd_any_ = nullptr;
};

}  // namespace nlsc
