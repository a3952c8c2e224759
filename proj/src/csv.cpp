#include "softcca/csv.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <sys/stat.h>

namespace softcca {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     bool append) {
    bool write_header = true;
    if (append) {
        struct stat st {};
        if (stat(path.c_str(), &st) == 0 && st.st_size > 0) write_header = false;
    }
    file_ = std::fopen(path.c_str(), append ? "ab" : "wb");
    if (!file_) throw FormatError("cannot open " + path + " for writing");
    columns_ = header.size();
    if (write_header) row(header);
}

CsvWriter::~CsvWriter() {
    if (file_) std::fclose(file_);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_)
        throw ShapeError("csv row has " + std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(columns_));
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].find_first_of(",\n\r") != std::string::npos)
            throw FormatError("csv field contains a separator: '" + fields[i] + "'");
        if (i) line += ',';
        line += fields[i];
    }
    line += '\n';
    std::fwrite(line.data(), 1, line.size(), file_);
}

void CsvWriter::flush() {
    if (file_) std::fflush(file_);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace softcca
