#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "hypotube/errors.hpp"

namespace hypotube {

/// Formats a double with 17 significant digits, enough to round-trip.
inline std::string csv_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Comma-separated output with a header row and LF line endings (binary mode,
/// '.' decimal separator via the C locale of snprintf).
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) {
        file_ = std::fopen(path.c_str(), "wb");
        if (!file_) throw ConfigError("cannot open '" + path + "' for writing");
        write_row_raw(header);
    }
    ~CsvWriter() {
        if (file_) std::fclose(file_);
    }
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    class Row {
      public:
        explicit Row(CsvWriter& w) : w_(w) {}
        Row& col(double v) { return raw(csv_double(v)); }
        Row& col(std::size_t v) { return raw(std::to_string(v)); }
        Row& col(int v) { return raw(std::to_string(v)); }
        Row& col(bool v) { return raw(v ? "1" : "0"); }
        Row& col(const std::string& v) { return raw(v); }
        ~Row() { w_.write_row_raw(cells_); }

      private:
        Row& raw(std::string s) {
            cells_.push_back(std::move(s));
            return *this;
        }
        CsvWriter& w_;
        std::vector<std::string> cells_;
    };

    Row row() { return Row(*this); }

  private:
    void write_row_raw(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) std::fputc(',', file_);
            std::fputs(cells[i].c_str(), file_);
        }
        std::fputc('\n', file_);
    }

    std::FILE* file_ = nullptr;
};

}  // namespace hypotube
