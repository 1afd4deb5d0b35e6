#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <vector>

#include "lmkan/costs.hpp"
#include "lmkan/model.hpp"
#include "lmkan/rng.hpp"
#include "lmkan/train.hpp"

namespace lmkan {

struct BenchReport {
    long batch = 0;
    int warmup_runs = 0;
    int timed_runs = 0;
    std::vector<double> seconds;        // one entry per timed run
    double median_rows_per_s = 0.0;
    double linear_median_rows_per_s = 0.0;  // same-shape dense reference
    std::uint64_t main_term_flops = 0;
    std::uint64_t params = 0;
};

/// Dense model with the same layer shapes (the slowdown-ratio reference).
inline Model make_linear_reference(const Model& model, std::uint64_t seed = 7) {
    Model ref;
    RandomStream rs(seed, "bench.linear_ref");
    for (const auto& block : model.blocks) {
        if (const auto* s = std::get_if<BnBlock>(&block)) {
            ref.blocks.push_back(*s);
            continue;
        }
        MlpBlock m;
        m.lin = init_linear(block_in_dim(block), block_out_dim(block), rs);
        m.act = Activation::none;
        ref.blocks.push_back(std::move(m));
    }
    return ref;
}

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<double> time_forward(const Model& model, const Matrix& X, int warmup,
                                        int timed, std::size_t workers) {
    volatile double sink = 0.0;
    for (int i = 0; i < warmup; ++i) {
        Matrix y = model_infer(model, X, workers);
        sink += y.data()[0];
    }
    std::vector<double> seconds;
    seconds.reserve(timed);
    for (int i = 0; i < timed; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Matrix y = model_infer(model, X, workers);
        const auto t1 = std::chrono::steady_clock::now();
        sink += y.data()[0];
        seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    (void)sink;
    return seconds;
}

}  // namespace detail

/// Saturated-throughput protocol: per batch size, warmup dry runs are
/// discarded and the median of the timed runs is reported, for the model and
/// for a same-shape dense reference under the same thread count.
inline std::vector<BenchReport> run_bench(const Model& model, const std::vector<long>& batches,
                                          int warmup = 10, int timed = 20,
                                          std::uint64_t seed = 1234, std::size_t workers = 0) {
    std::vector<BenchReport> reports;
    const Model linear_ref = make_linear_reference(model);
    for (long batch : batches) {
        if (batch < 1) throw ConfigError("bench: batch sizes must be positive");
        BenchReport rep;
        rep.batch = batch;
        rep.warmup_runs = warmup;
        rep.timed_runs = timed;
        rep.main_term_flops = model_main_term_flops(model);
        rep.params = model_param_count(model);

        RandomStream rs(seed, "bench.data");
        Matrix X(batch, model.in_dim());
        sample_inputs(rs, X);

        rep.seconds = detail::time_forward(model, X, warmup, timed, workers);
        rep.median_rows_per_s = static_cast<double>(batch) / detail::median(rep.seconds);
        const std::vector<double> ref_seconds =
            detail::time_forward(linear_ref, X, warmup, timed, workers);
        rep.linear_median_rows_per_s = static_cast<double>(batch) / detail::median(ref_seconds);
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace lmkan
