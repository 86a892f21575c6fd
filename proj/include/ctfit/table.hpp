#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "matrix.hpp"

namespace ctfit {

using Count = std::int64_t;

/// One labeled row or column of a contingency table.
struct SeriesSample {
    std::string label;
    std::vector<Count> values;

    static SeriesSample make(std::string label, std::vector<Count> values) {
        if (values.size() < 2)
            throw validation_error("series '" + label + "' needs at least 2 values");
        for (Count v : values)
            if (v < 0) throw validation_error("series '" + label + "' has a negative value");
        return SeriesSample{std::move(label), std::move(values)};
    }

    [[nodiscard]] double mean() const {
        return static_cast<double>(std::accumulate(values.begin(), values.end(), Count{0})) /
               static_cast<double>(values.size());
    }

    [[nodiscard]] std::vector<double> as_real() const {
        return {values.begin(), values.end()};
    }
};

/// Labeled m x n matrix of non-negative integer observations. Immutable once
/// built; construct through make() or parse_table().
class ContingencyTable {
public:
    static ContingencyTable make(std::vector<std::string> row_labels,
                                 std::vector<std::string> col_labels, Matrix<Count> cells) {
        if (cells.rows() < 2 || cells.cols() < 2)
            throw validation_error("table must be at least 2x2, got " +
                                   std::to_string(cells.rows()) + "x" +
                                   std::to_string(cells.cols()));
        if (row_labels.size() != cells.rows() || col_labels.size() != cells.cols())
            throw validation_error("label counts do not match table dimensions");
        check_unique(row_labels, "row");
        check_unique(col_labels, "column");
        for (std::size_t i = 0; i < cells.rows(); ++i)
            for (std::size_t j = 0; j < cells.cols(); ++j)
                if (cells(i, j) < 0)
                    throw validation_error("negative cell at (" + std::to_string(i) + ", " +
                                           std::to_string(j) + ")");
        return ContingencyTable(std::move(row_labels), std::move(col_labels), std::move(cells));
    }

    [[nodiscard]] std::size_t rows() const noexcept { return cells_.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return cells_.cols(); }
    [[nodiscard]] const std::vector<std::string>& row_labels() const noexcept { return row_labels_; }
    [[nodiscard]] const std::vector<std::string>& col_labels() const noexcept { return col_labels_; }
    [[nodiscard]] const Matrix<Count>& cells() const noexcept { return cells_; }
    [[nodiscard]] Count operator()(std::size_t i, std::size_t j) const noexcept { return cells_(i, j); }

    [[nodiscard]] Count row_total(std::size_t i) const {
        auto r = cells_.row(i);
        return std::accumulate(r.begin(), r.end(), Count{0});
    }
    [[nodiscard]] Count col_total(std::size_t j) const {
        Count s = 0;
        for (std::size_t i = 0; i < rows(); ++i) s += cells_(i, j);
        return s;
    }
    [[nodiscard]] Count grand_total() const {
        auto v = cells_.values();
        return std::accumulate(v.begin(), v.end(), Count{0});
    }

    /// All cells in row-major order.
    [[nodiscard]] std::vector<Count> pooled() const {
        auto v = cells_.values();
        return {v.begin(), v.end()};
    }

    [[nodiscard]] SeriesSample row_series(std::size_t i) const {
        if (i >= rows()) throw validation_error("row index " + std::to_string(i) + " out of range");
        auto r = cells_.row(i);
        return SeriesSample::make(row_labels_[i], {r.begin(), r.end()});
    }

    [[nodiscard]] SeriesSample col_series(std::size_t j) const {
        if (j >= cols()) throw validation_error("column index " + std::to_string(j) + " out of range");
        std::vector<Count> v(rows());
        for (std::size_t i = 0; i < rows(); ++i) v[i] = cells_(i, j);
        return SeriesSample::make(col_labels_[j], std::move(v));
    }

    [[nodiscard]] std::size_t row_index(std::string_view label) const {
        auto it = std::find(row_labels_.begin(), row_labels_.end(), label);
        if (it == row_labels_.end())
            throw validation_error("unknown row label '" + std::string(label) + "'");
        return static_cast<std::size_t>(it - row_labels_.begin());
    }

    friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;

private:
    ContingencyTable(std::vector<std::string> r, std::vector<std::string> c, Matrix<Count> m)
        : row_labels_(std::move(r)), col_labels_(std::move(c)), cells_(std::move(m)) {}

    static void check_unique(const std::vector<std::string>& labels, const char* axis) {
        std::unordered_set<std::string> seen;
        for (const auto& l : labels)
            if (!seen.insert(l).second)
                throw validation_error(std::string("duplicate ") + axis + " label '" + l + "'");
    }

    std::vector<std::string> row_labels_;
    std::vector<std::string> col_labels_;
    Matrix<Count> cells_;
};

/// Removes the named rows. Every label must exist and at least two rows must remain.
inline ContingencyTable drop_rows(const ContingencyTable& t, const std::set<std::string>& labels) {
    for (const auto& l : labels) (void)t.row_index(l);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < t.rows(); ++i)
        if (!labels.contains(t.row_labels()[i])) keep.push_back(i);
    if (keep.size() < 2)
        throw validation_error("dropping rows would leave fewer than 2 rows");
    Matrix<Count> cells(keep.size(), t.cols());
    std::vector<std::string> row_labels;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        row_labels.push_back(t.row_labels()[keep[k]]);
        for (std::size_t j = 0; j < t.cols(); ++j) cells(k, j) = t(keep[k], j);
    }
    return ContingencyTable::make(std::move(row_labels), t.col_labels(), std::move(cells));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes a quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                field += '"';
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.emplace_back(trim(field));
            field.clear();
        } else {
            field += ch;
        }
    }
    out.emplace_back(trim(field));
    return out;
}

inline std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + '"';
}

} // namespace detail

/// Parses comma-separated text: first record holds the column labels (its
/// first field is a corner label and is ignored), each further record starts
/// with a row label followed by non-negative integer cells.
inline ContingencyTable parse_table(std::string_view source) {
    std::vector<std::vector<std::string>> records;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        std::size_t end = source.find('\n', pos);
        if (end == std::string_view::npos) end = source.size();
        std::string_view line = detail::trim(source.substr(pos, end - pos));
        if (!line.empty()) records.push_back(detail::split_csv_line(line));
        pos = end + 1;
    }
    if (records.size() < 3) throw parse_error("need a header row and at least 2 data rows");

    const auto& header = records.front();
    const std::size_t width = header.size();
    if (width < 3) throw parse_error("need a label column and at least 2 data columns");
    std::vector<std::string> col_labels(header.begin() + 1, header.end());

    const std::size_t m = records.size() - 1;
    Matrix<Count> cells(m, width - 1);
    std::vector<std::string> row_labels;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& rec = records[i + 1];
        if (rec.size() != width)
            throw parse_error("row " + std::to_string(i) + " has " + std::to_string(rec.size()) +
                              " fields, expected " + std::to_string(width));
        row_labels.push_back(rec.front());
        for (std::size_t j = 1; j < width; ++j) {
            const std::string& f = rec[j];
            Count v = 0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || v < 0)
                throw parse_error("cell (row " + std::to_string(i) + ", col " + std::to_string(j - 1) +
                                  "): '" + f + "' is not a non-negative integer");
            cells(i, j - 1) = v;
        }
    }
    return ContingencyTable::make(std::move(row_labels), std::move(col_labels), std::move(cells));
}

inline std::string to_csv(const ContingencyTable& t) {
    std::ostringstream os;
    os << "label";
    for (const auto& c : t.col_labels()) os << ',' << detail::quote_csv(c);
    os << '\n';
    for (std::size_t i = 0; i < t.rows(); ++i) {
        os << detail::quote_csv(t.row_labels()[i]);
        for (std::size_t j = 0; j < t.cols(); ++j) os << ',' << t(i, j);
        os << '\n';
    }
    return os.str();
}

inline void to_json(nlohmann::json& j, const ContingencyTable& t) {
    auto cells = nlohmann::json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.cells().row(i);
        cells.push_back(std::vector<Count>(r.begin(), r.end()));
    }
    j = {{"row_labels", t.row_labels()}, {"col_labels", t.col_labels()}, {"cells", cells}};
}

inline ContingencyTable table_from_json(const nlohmann::json& j) {
    try {
        auto rows = j.at("row_labels").get<std::vector<std::string>>();
        auto cols = j.at("col_labels").get<std::vector<std::string>>();
        const auto& cells = j.at("cells");
        Matrix<Count> m(cells.size(), cols.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].size() != cols.size())
                throw parse_error("row " + std::to_string(i) + " has wrong length");
            for (std::size_t k = 0; k < cols.size(); ++k) m(i, k) = cells[i][k].get<Count>();
        }
        return ContingencyTable::make(std::move(rows), std::move(cols), std::move(m));
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("table JSON: ") + e.what());
    }
}

namespace fixtures {

/// Inhibition zones (mm) of ten essential-oil extracts (columns) against
/// eleven bacteria (rows).
inline ContingencyTable essential_oils() {
    static constexpr Count data[11][10] = {
        {25, 25, 19, 19, 13, 22, 23, 15, 35, 30},
        {24, 22, 18, 18, 12, 20, 22, 14, 34, 28},
        {20, 20, 14, 14, 12, 18, 18, 12, 30, 26},
        {22, 20, 16, 14, 10, 18, 18, 12, 32, 28},
        {20, 20, 13, 10, 9, 16, 18, 10, 27, 24},
        {18, 17, 11, 8, 8, 16, 16, 10, 25, 20},
        {16, 16, 12, 9, 9, 14, 14, 10, 26, 22},
        {14, 14, 9, 9, 9, 12, 12, 10, 25, 22},
        {16, 13, 9, 8, 8, 10, 11, 9, 25, 18},
        {10, 11, 0, 0, 0, 7, 8, 0, 22, 18},
        {10, 10, 0, 0, 0, 6, 8, 0, 20, 16},
    };
    Matrix<Count> cells(11, 10);
    for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 10; ++j) cells(i, j) = data[i][j];
    return ContingencyTable::make(
        {"M.flavus", "B.subtilis", "S.epidermidis", "S.aureus", "S.enteritidis", "S.typhimurium",
         "E.coli", "E.cloacae", "L.monocytogenes", "P. mirabilis", "P. aeruginosa"},
        {"M.s.", "M.p.", "C.l.", "C.a.", "M.c.", "L.a.", "O.b.", "S.o.", "O.v.", "T.v."},
        std::move(cells));
}

} // namespace fixtures

} // namespace ctfit
