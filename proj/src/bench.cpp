#include "softcca/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "softcca/cca.hpp"
#include "softcca/decorr.hpp"
#include "softcca/rng.hpp"

namespace softcca {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shortest per-sample time we trust against clock noise.
constexpr double kMinSample = 2e-4;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double fit_loglog_slope(const std::vector<std::size_t>& k, const std::vector<double>& t) {
    const std::size_t n = k.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(static_cast<double>(k[i]));
        const double y = std::log(t[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

template <typename Step>
BenchRow time_method(const std::string& name, std::size_t k, std::size_t reps,
                     std::size_t warmup, Step&& step) {
    BenchRow row;
    row.method = name;
    row.k = k;
    row.reps = reps;

    for (std::size_t i = 0; i < warmup; ++i) step();

    // Calibrate inner repetitions against timer resolution.
    std::size_t inner = 1;
    {
        const auto t0 = Clock::now();
        step();
        const double dt = seconds_since(t0);
        if (dt < kMinSample)
            inner = static_cast<std::size_t>(std::ceil(kMinSample / std::max(dt, 1e-9)));
    }
    row.inner = inner;

    std::vector<double> samples;
    samples.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        for (std::size_t i = 0; i < inner; ++i) step();
        samples.push_back(seconds_since(t0) / static_cast<double>(inner));
    }
    row.median_seconds = median(std::move(samples));
    return row;
}

} // namespace

BenchResult bench_decorr(const std::vector<std::size_t>& k_list, std::size_t m,
                         std::size_t reps, std::size_t warmup, std::uint64_t seed) {
    if (k_list.empty()) throw ConfigError("bench: empty k list");
    if (m < 2) throw ConfigError("bench: m must be at least 2");
    if (reps < 1) throw ConfigError("bench: reps must be positive");

    BenchResult result;
    std::vector<double> sdl_t, exact_t;
    const double ridge = 1e-4; // m < k makes the batch covariance singular

    for (std::size_t k : k_list) {
        Rng rng(mix_seed(seed, k));
        Matrix z(m, k);
        for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();

        SdlState state(k, 0.9);
        volatile double sink = 0.0;
        auto sdl_step = [&] {
            SdlUpdate u = sdl_update(state, z);
            Matrix g = sdl_gradient(state, u.approx_cov, z);
            sink = sink + u.loss + g(0, 0);
        };
        BenchRow sdl_row = time_method("sdl", k, reps, warmup, sdl_step);

        auto exact_step = [&] {
            Matrix w = exact_decorrelation_step(z, ridge);
            sink = sink + w(0, 0);
        };
        BenchRow exact_row = time_method("exact", k, reps, warmup, exact_step);

        sdl_t.push_back(sdl_row.median_seconds);
        exact_t.push_back(exact_row.median_seconds);
        result.rows.push_back(std::move(sdl_row));
        result.rows.push_back(std::move(exact_row));
    }

    result.sdl_slope = fit_loglog_slope(k_list, sdl_t);
    result.exact_slope = fit_loglog_slope(k_list, exact_t);
    return result;
}

} // namespace softcca
