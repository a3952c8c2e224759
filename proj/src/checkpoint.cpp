#include "softcca/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include <zlib.h>

namespace softcca {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

void TensorStore::put(const std::string& name, Matrix m) {
    auto it = index_.find(name);
    if (it != index_.end()) {
        entries_[it->second].second = std::move(m);
        return;
    }
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(m));
}

void TensorStore::put_scalar(const std::string& name, double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    put(name, std::move(m));
}

bool TensorStore::has(const std::string& name) const { return index_.count(name) > 0; }

const Matrix& TensorStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
    return entries_[it->second].second;
}

double TensorStore::scalar(const std::string& name) const {
    const Matrix& m = get(name);
    if (m.size() != 1) throw FormatError("checkpoint: tensor '" + name + "' is not a scalar");
    return m(0, 0);
}

namespace {

constexpr char kMagic[8] = {'S', 'C', 'C', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path) {
        file_ = std::fopen(path.c_str(), "wb");
        if (!file_) throw FormatError("cannot write " + path);
    }
    ~Writer() {
        if (file_) std::fclose(file_);
    }
    void bytes(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, file_) != n) throw FormatError("short write to " + path_);
        crc_ = crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
    }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
    void finish() {
        const std::uint32_t crc = static_cast<std::uint32_t>(crc_);
        if (std::fwrite(&crc, 1, sizeof crc, file_) != sizeof crc)
            throw FormatError("short write to " + path_);
        std::fclose(file_);
        file_ = nullptr;
    }

private:
    std::string path_;
    std::FILE* file_ = nullptr;
    uLong crc_ = crc32(0L, Z_NULL, 0);
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        file_ = std::fopen(path.c_str(), "rb");
        if (!file_) throw FormatError("cannot open " + path);
    }
    ~Reader() {
        if (file_) std::fclose(file_);
    }
    void bytes(void* p, std::size_t n) {
        if (std::fread(p, 1, n, file_) != n)
            throw FormatError(path_ + ": truncated checkpoint");
        crc_ = crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
    }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, sizeof v); return v; }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > (1ULL << 32)) throw FormatError(path_ + ": absurd string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    void verify_crc() {
        const std::uint32_t expect = static_cast<std::uint32_t>(crc_);
        std::uint32_t stored = 0;
        if (std::fread(&stored, 1, sizeof stored, file_) != sizeof stored)
            throw FormatError(path_ + ": truncated checkpoint (missing checksum)");
        if (stored != expect)
            throw FormatError(path_ + ": checksum mismatch, refusing to load corrupted checkpoint");
    }

private:
    std::string path_;
    std::FILE* file_ = nullptr;
    uLong crc_ = crc32(0L, Z_NULL, 0);
};

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.str(ck.config_text);
    w.u64(ck.tensors.entries().size());
    for (const auto& [name, m] : ck.tensors.entries()) {
        w.str(name);
        w.u64(m.rows());
        w.u64(m.cols());
        w.bytes(m.data(), m.size() * sizeof(double));
    }
    w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatError(path + ": not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.config_text = r.str();
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        if (rows * cols > (1ULL << 31))
            throw FormatError(path + ": tensor '" + name + "' is absurdly large");
        Matrix m(rows, cols);
        r.bytes(m.data(), m.size() * sizeof(double));
        ck.tensors.put(std::move(name), std::move(m));
    }
    r.verify_crc();
    return ck;
}

} // namespace softcca
