#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "pixdiff/grid.hpp"

namespace pixdiff::csv {

// Minimal deterministic CSV writer: numbers are rendered with %.17g so that
// repeated runs with the same seed produce byte-identical files.
class Writer {
public:
    Writer(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        require(out_.good(), "csv::Writer: cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        std::size_t i = 0;
        for (double v : values) {
            if (i++) out_ << ',';
            out_ << num(v);
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << num(values[i]);
        }
        out_ << '\n';
    }

    // Mixed rows: leading text cell (e.g. a label) followed by numbers.
    void row(const std::string& label, std::initializer_list<double> values) {
        out_ << label;
        for (double v : values) out_ << ',' << num(v);
        out_ << '\n';
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

private:
    std::ofstream out_;
};

}  // namespace pixdiff::csv
