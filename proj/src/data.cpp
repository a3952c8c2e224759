#include "softcca/data.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <zlib.h>

#include "softcca/rng.hpp"

namespace softcca {

namespace {

// gzread handles both gzip-wrapped and plain files.
class IdxReader {
public:
    explicit IdxReader(const std::string& path) : path_(path) {
        file_ = gzopen(path.c_str(), "rb");
        if (file_ == nullptr) throw FormatError("cannot open " + path);
    }
    ~IdxReader() { if (file_) gzclose(file_); }
    IdxReader(const IdxReader&) = delete;
    IdxReader& operator=(const IdxReader&) = delete;

    void read(void* buf, std::size_t len) {
        const int got = gzread(file_, buf, static_cast<unsigned>(len));
        if (got < 0 || static_cast<std::size_t>(got) != len) {
            std::ostringstream os;
            os << path_ << ": truncated at byte offset " << offset_ + std::max(got, 0)
               << " (wanted " << len << " more bytes)";
            throw FormatError(os.str());
        }
        offset_ += len;
    }

    std::uint32_t read_u32_be() {
        std::uint8_t b[4];
        read(b, 4);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }

private:
    std::string path_;
    gzFile file_ = nullptr;
    std::size_t offset_ = 0;
};

void write_u32_be(std::FILE* f, std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                               std::uint8_t(v >> 8), std::uint8_t(v)};
    std::fwrite(b, 1, 4, f);
}

} // namespace

std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path) {
    IdxReader imgs(images_path);
    const std::uint32_t img_magic = imgs.read_u32_be();
    if (img_magic != 2051)
        throw FormatError(images_path + ": bad magic " + std::to_string(img_magic) +
                          " (expected 2051)");
    const std::uint32_t n = imgs.read_u32_be();
    const std::uint32_t rows = imgs.read_u32_be();
    const std::uint32_t cols = imgs.read_u32_be();
    const std::size_t dim = std::size_t(rows) * cols;

    Matrix pixels(n, dim);
    std::vector<std::uint8_t> buf(dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        imgs.read(buf.data(), dim);
        double* out = pixels.data() + std::size_t(i) * dim;
        for (std::size_t j = 0; j < dim; ++j) out[j] = buf[j] / 255.0;
    }

    IdxReader labs(labels_path);
    const std::uint32_t lab_magic = labs.read_u32_be();
    if (lab_magic != 2049)
        throw FormatError(labels_path + ": bad magic " + std::to_string(lab_magic) +
                          " (expected 2049)");
    const std::uint32_t ln = labs.read_u32_be();
    if (ln != n)
        throw FormatError(labels_path + ": " + std::to_string(ln) + " labels for " +
                          std::to_string(n) + " images");
    std::vector<std::uint8_t> lbuf(ln);
    if (ln > 0) labs.read(lbuf.data(), ln);
    std::vector<int> labels(lbuf.begin(), lbuf.end());
    return {std::move(pixels), std::move(labels)};
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::size_t n, std::size_t rows, std::size_t cols) {
    if (pixels.size() != n * rows * cols)
        throw ShapeError("write_idx_images: pixel count does not match dimensions");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot write " + path);
    write_u32_be(f, 2051);
    write_u32_be(f, static_cast<std::uint32_t>(n));
    write_u32_be(f, static_cast<std::uint32_t>(rows));
    write_u32_be(f, static_cast<std::uint32_t>(cols));
    std::fwrite(pixels.data(), 1, pixels.size(), f);
    std::fclose(f);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot write " + path);
    write_u32_be(f, 2049);
    write_u32_be(f, static_cast<std::uint32_t>(labels.size()));
    std::fwrite(labels.data(), 1, labels.size(), f);
    std::fclose(f);
}

PairedDataset split_halves(const Matrix& images, const std::vector<int>& labels) {
    if (images.cols() != 784)
        throw ShapeError("split_halves: images have " + std::to_string(images.cols()) +
                         " columns, expected 784");
    if (!labels.empty() && labels.size() != images.rows())
        throw ShapeError("split_halves: label count does not match image count");
    const std::size_t n = images.rows();
    PairedDataset d;
    d.view1 = Matrix(n, 392);
    d.view2 = Matrix(n, 392);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < 28; ++r) {
            for (std::size_t c = 0; c < 14; ++c) {
                d.view1(i, r * 14 + c) = images(i, r * 28 + c);
                d.view2(i, r * 14 + c) = images(i, r * 28 + 14 + c);
            }
        }
    }
    d.labels = labels;
    d.meta = "mnist_halves";
    return d;
}

Matrix join_halves(const Matrix& left, const Matrix& right) {
    if (left.cols() != 392 || right.cols() != 392 || left.rows() != right.rows())
        throw ShapeError("join_halves: expected aligned 392-column halves");
    const std::size_t n = left.rows();
    Matrix out(n, 784);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < 28; ++r)
            for (std::size_t c = 0; c < 14; ++c) {
                out(i, r * 28 + c) = left(i, r * 14 + c);
                out(i, r * 28 + 14 + c) = right(i, r * 14 + c);
            }
    return out;
}

namespace {

// Random rotation via modified Gram-Schmidt on a Gaussian matrix.
Matrix random_orthogonal(std::size_t d, Rng& rng) {
    Matrix q(d, d);
    for (std::size_t i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < j; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, p);
                for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, p);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw NumericError("random_orthogonal: degenerate column");
        for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
    }
    return q;
}

} // namespace

SynthData synth_correlated(const SynthSpec& spec) {
    if (spec.k_shared > std::min(spec.d1, spec.d2))
        throw ConfigError("synth_correlated: k_shared exceeds min(d1, d2)");
    if (spec.rho.size() != spec.k_shared)
        throw ConfigError("synth_correlated: rho list must have k_shared entries");
    for (double r : spec.rho)
        if (!(r > 0.0 && r <= 1.0))
            throw ConfigError("synth_correlated: every rho must be in (0, 1]");

    Rng rng(spec.seed);
    std::vector<double> rho = spec.rho;
    std::sort(rho.begin(), rho.end(), std::greater<>());

    // Latents: view 1 carries the shared factor plus noise of variance
    // (1-rho^2)/rho^2, view 2 carries the shared factor exactly; this makes
    // corr(u1_j, u2_j) = rho_j. Extra dimensions are independent N(0,1).
    Matrix lat1(spec.n, spec.d1), lat2(spec.n, spec.d2);
    std::vector<double> noise_sd(spec.k_shared);
    for (std::size_t j = 0; j < spec.k_shared; ++j)
        noise_sd[j] = std::sqrt((1.0 - rho[j] * rho[j]) / (rho[j] * rho[j]));
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < spec.k_shared; ++j) {
            const double s = rng.normal();
            lat1(i, j) = s + noise_sd[j] * rng.normal();
            lat2(i, j) = s;
        }
        for (std::size_t j = spec.k_shared; j < spec.d1; ++j) lat1(i, j) = rng.normal();
        for (std::size_t j = spec.k_shared; j < spec.d2; ++j) lat2(i, j) = rng.normal();
    }

    Matrix q1 = random_orthogonal(spec.d1, rng);
    Matrix q2 = random_orthogonal(spec.d2, rng);

    SynthData out;
    out.data.view1 = matmul_nt(lat1, q1);
    out.data.view2 = matmul_nt(lat2, q2);
    std::ostringstream os;
    os << "synth_correlated(n=" << spec.n << ", d1=" << spec.d1 << ", d2=" << spec.d2
       << ", k_shared=" << spec.k_shared << ", seed=" << spec.seed << ")";
    out.data.meta = os.str();
    out.planted = std::move(rho);
    return out;
}

std::vector<std::vector<std::uint32_t>> batch_indices(std::size_t n, const BatchPlan& plan,
                                                      std::size_t epoch) {
    if (plan.batch_size < 2) throw ConfigError("batch plan: batch size must be at least 2");
    if (plan.batch_size > n)
        throw ConfigError("batch plan: batch size " + std::to_string(plan.batch_size) +
                          " exceeds dataset size " + std::to_string(n));
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(mix_seed(plan.seed, epoch));
    rng.shuffle(order);

    std::vector<std::vector<std::uint32_t>> batches;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
        const std::size_t end = std::min(n, start + plan.batch_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::uint32_t>& idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = m.data() + std::size_t(idx[i]) * m.cols();
        double* dst = out.data() + i * m.cols();
        std::copy(src, src + m.cols(), dst);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::uint32_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

PairedDataset subset_shuffled(const PairedDataset& d, std::size_t n, std::uint64_t seed) {
    if (n > d.size()) throw ConfigError("subset: requested more rows than the dataset has");
    std::vector<std::uint32_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(n);

    PairedDataset out;
    out.view1 = gather_rows(d.view1, order);
    out.view2 = gather_rows(d.view2, order);
    if (d.has_labels()) out.labels = gather_labels(d.labels, order);
    std::ostringstream os;
    os << d.meta << " subset(n=" << n << ", seed=" << seed << ")";
    out.meta = os.str();
    return out;
}

} // namespace softcca
