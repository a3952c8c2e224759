#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "softcca/bench.hpp"
#include "softcca/config.hpp"

namespace softcca {

struct CliOverrides {
    std::string out_dir;               // empty = use config
    std::optional<std::uint64_t> seed; // overrides training.seed
};

struct TrainOutput {
    std::string metrics_csv;
    std::string checkpoint;
    bool completed = false; // false when max_steps stopped the run early
};

// train-cca / train-fae from a config file; deterministic given config+seed.
TrainOutput run_train_cca(const std::string& config_path, const CliOverrides& ov);
TrainOutput run_train_fae(const std::string& config_path, const CliOverrides& ov);

// Resume from a checkpoint (the embedded config snapshot drives the run).
// Metrics append to metrics.csv in the output directory, so resuming into
// the original directory reproduces an uninterrupted run's file exactly.
TrainOutput resume_train_cca(const std::string& checkpoint_path, const CliOverrides& ov);
TrainOutput resume_train_fae(const std::string& checkpoint_path, const CliOverrides& ov);

struct EvalDataOverride {
    std::string test_images, test_labels; // empty = paths from the config snapshot
};

// eval: correlation | crossview_l2r | crossview_r2l for CCA checkpoints,
// disentanglement for FAE checkpoints. Returns the report CSV path.
std::string run_eval(const std::string& checkpoint_path, const std::string& mode,
                     const std::string& out_dir, const EvalDataOverride& data = {});

// style-sheet: grid of class-transferred reconstructions, one row per style
// source (first test image of each class). Returns the PGM path.
std::string run_style_sheet(const std::string& checkpoint_path, const std::string& out_dir,
                            const EvalDataOverride& data = {});

// bench-decorr: timings + fitted slopes written as CSV; results are written
// even when the slopes disappoint (assertions live in the test suite).
BenchResult run_bench_decorr(const std::vector<std::size_t>& k_list, std::size_t m,
                             std::size_t reps, std::size_t warmup, std::uint64_t seed,
                             const std::string& out_dir);

// gradcheck: prints one line per component; returns the worst relative error.
double run_gradcheck(std::ostream& os, std::uint64_t seed);

} // namespace softcca
