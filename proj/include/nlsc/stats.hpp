#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlsc {

/// Time-average estimate standing in for a stationary expectation, with the
/// batch-means standard error.
struct StationaryEstimate {
    double mean = 0.0;
    double stderr_val = 0.0;
    int n_batches = 0;
    double batch_len = 0.0;

    bool consistent_with(double target, double n_sigma = 3.0) const {
        return std::abs(mean - target) <= n_sigma * stderr_val;
    }
};

/// Streaming batch-means accumulator over a uniformly sampled scalar series.
/// Samples are grouped into contiguous time windows of fixed length; each
/// completed window contributes one batch mean. Memory is one partial sum
/// plus the completed batch means.
class BatchAccumulator {
public:
    explicit BatchAccumulator(double batch_len = 1.0) : batch_len_(batch_len) {
        if (!(batch_len > 0.0)) throw std::invalid_argument("BatchAccumulator: batch_len <= 0");
    }

    void accumulate(double value, double t) {
        if (!have_t0_) {
            t0_ = t;
            have_t0_ = true;
        } else if (t < last_t_) {
            throw std::runtime_error("BatchAccumulator: non-monotone sample time");
        }
        last_t_ = t;
        const long idx = static_cast<long>(std::floor((t - t0_) / batch_len_));
        if (idx > cur_idx_) {
            close_batch();
            cur_idx_ = idx;
        }
        cur_sum_ += value;
        ++cur_count_;
    }

    /// Batch means, counting the trailing batch when it covers at least half
    /// a window (a run of exactly n x batch_len otherwise loses its last batch).
    std::vector<double> batch_means() const {
        std::vector<double> out = means_;
        if (cur_count_ > 0 && last_t_ - t0_ - cur_idx_ * batch_len_ >= 0.5 * batch_len_)
            out.push_back(cur_sum_ / static_cast<double>(cur_count_));
        return out;
    }
    double batch_len() const { return batch_len_; }

    StationaryEstimate finalize() const {
        const auto means = batch_means();
        const int n = static_cast<int>(means.size());
        if (n < 2) throw std::runtime_error("BatchAccumulator: need at least 2 complete batches");
        StationaryEstimate est;
        est.n_batches = n;
        est.batch_len = batch_len_;
        double s = 0.0;
        for (double b : means) s += b;
        est.mean = s / n;
        double ss = 0.0;
        for (double b : means) ss += (b - est.mean) * (b - est.mean);
        est.stderr_val = std::sqrt(ss / (n - 1.0) / n);
        return est;
    }

    /// Cross-trajectory merge: concatenates batch means. Associative and
    /// commutative up to ordering of equal-length batch lists.
    void merge(const BatchAccumulator& other) {
        if (other.batch_len_ != batch_len_)
            throw std::invalid_argument("BatchAccumulator: merging different batch lengths");
        const auto theirs = other.batch_means();
        means_.insert(means_.end(), theirs.begin(), theirs.end());
    }

private:
    void close_batch() {
        if (cur_count_ > 0) means_.push_back(cur_sum_ / static_cast<double>(cur_count_));
        cur_sum_ = 0.0;
        cur_count_ = 0;
    }

    double batch_len_;
    bool have_t0_ = false;
    double t0_ = 0.0;
    double last_t_ = 0.0;
    long cur_idx_ = 0;
    double cur_sum_ = 0.0;
    long cur_count_ = 0;
    std::vector<double> means_;
};

}  // namespace nlsc
