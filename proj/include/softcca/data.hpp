#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softcca/matrix.hpp"

namespace softcca {

// Two aligned views of N samples, optionally labeled. Immutable once built;
// freely shared across threads.
struct PairedDataset {
    Matrix view1, view2;
    std::vector<int> labels; // empty when unlabeled
    std::string meta;

    std::size_t size() const { return view1.rows(); }
    bool has_labels() const { return !labels.empty(); }
};

// Reads an IDX image/label pair (magic 2051 / 2049, big-endian dimensions).
// Gzip-compressed files are accepted transparently. Pixels are scaled to
// [0, 1] by /255; images come back row-major N x (rows*cols).
std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path);

// IDX writers for round-trip tests and tooling; input is raw bytes.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::size_t n, std::size_t rows, std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Splits 28x28 images into left (columns 0-13) and right (columns 14-27)
// halves of 392 features each; labels carry through.
PairedDataset split_halves(const Matrix& images, const std::vector<int>& labels);

// Inverse of split_halves, for tests.
Matrix join_halves(const Matrix& left, const Matrix& right);

struct SynthSpec {
    std::size_t n = 0, d1 = 0, d2 = 0, k_shared = 0;
    std::vector<double> rho; // population canonical correlations, each in (0, 1]
    std::uint64_t seed = 0;
};

struct SynthData {
    PairedDataset data;
    std::vector<double> planted; // rho sorted descending
};

// Correlated two-view Gaussian data with known population canonical
// correlations: shared factors get per-dimension noise of variance
// (1-rho^2)/rho^2 on one side, remaining dimensions are independent, and
// each view is mixed by a random rotation (which leaves canonical
// correlations untouched).
SynthData synth_correlated(const SynthSpec& spec);

struct BatchPlan {
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    bool drop_last = false;
};

// Mini-batch row indices for one epoch: Fisher-Yates shuffle seeded by
// (seed, epoch), chunked into batches. Views stay aligned because batches
// are index-based.
std::vector<std::vector<std::uint32_t>> batch_indices(std::size_t n, const BatchPlan& plan,
                                                      std::size_t epoch);

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx);
std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::uint32_t>& idx);

// First n rows after a seeded shuffle; the seed is recorded in meta.
PairedDataset subset_shuffled(const PairedDataset& d, std::size_t n, std::uint64_t seed);

} // namespace softcca
