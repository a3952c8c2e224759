#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "softcca/matrix.hpp"

namespace softcca {

// Ordered map of named tensors; scalars ride along as 1x1 matrices.
class TensorStore {
public:
    void put(const std::string& name, Matrix m);
    void put_scalar(const std::string& name, double v);

    bool has(const std::string& name) const;
    const Matrix& get(const std::string& name) const;
    double scalar(const std::string& name) const;

    const std::vector<std::pair<std::string, Matrix>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, Matrix>> entries_;
    std::map<std::string, std::size_t> index_;
};

struct Checkpoint {
    std::string config_text; // config snapshot of the producing run
    TensorStore tensors;
};

// Versioned binary container: magic, version, length-prefixed config text,
// length-prefixed named tensors (dimensions + little-endian doubles),
// trailing CRC32 of everything before it. Loading verifies the checksum and
// refuses corrupted files.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace softcca
