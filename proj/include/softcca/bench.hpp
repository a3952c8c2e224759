#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace softcca {

struct BenchRow {
    std::string method; // "sdl" or "exact"
    std::size_t k = 0;
    double median_seconds = 0.0;
    std::size_t reps = 0;
    std::size_t inner = 1; // inner repetitions per timed sample
};

struct BenchResult {
    std::vector<BenchRow> rows;
    double sdl_slope = 0.0;   // least-squares slope of log(t) vs log(k)
    double exact_slope = 0.0;
};

// Times one decorrelation training iteration per embedding width k at fixed
// batch size m: (a) SDL update + gradient, (b) exact whitening
// Z(C+ridge*I)^(-1/2). Median of `reps` samples after `warmup` unmeasured
// runs, monotonic clock, single-threaded kernels. When a single run is too
// fast for the timer, inner repetitions are increased automatically.
BenchResult bench_decorr(const std::vector<std::size_t>& k_list, std::size_t m,
                         std::size_t reps, std::size_t warmup, std::uint64_t seed);

} // namespace softcca
