#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "softcca/error.hpp"

namespace softcca {

// Shortest round-trippable decimal representation (%.17g).
std::string format_double(double v);

// Minimal CSV: comma-separated, no quoting (fields never contain commas).
class CsvWriter {
public:
    // mode "w" truncates, "a" appends (no header is written when appending
    // to a non-empty file).
    CsvWriter(const std::string& path, const std::vector<std::string>& header,
              bool append = false);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& fields);
    void flush();

private:
    std::FILE* file_ = nullptr;
    std::size_t columns_ = 0;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path);

} // namespace softcca
