#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "special.hpp"
#include "table.hpp"

namespace ctfit {

struct ChiSquareResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
};

inline ChiSquareResult make_chi_square(double statistic, int df) {
    return {statistic, df, special::chi_square_sf(statistic, df)};
}

/// E_ij = (row_i total * col_j total) / grand total.
inline RealMatrix expected_counts(const ContingencyTable& t) {
    const double total = static_cast<double>(t.grand_total());
    if (total <= 0.0) throw validation_error("expected_counts: grand total is zero");
    RealMatrix e(t.rows(), t.cols());
    std::vector<double> col(t.cols());
    for (std::size_t j = 0; j < t.cols(); ++j) col[j] = static_cast<double>(t.col_total(j));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const double row = static_cast<double>(t.row_total(i));
        for (std::size_t j = 0; j < t.cols(); ++j) e(i, j) = row * col[j] / total;
    }
    return e;
}

namespace detail {

inline double row_statistic(const ContingencyTable& t, const RealMatrix& e, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < t.cols(); ++j) {
        if (!(e(i, j) > 0.0))
            throw validation_error("degenerate margins: expected count is zero at (" +
                                   std::to_string(i) + ", " + std::to_string(j) + ")");
        const double d = static_cast<double>(t(i, j)) - e(i, j);
        s += d * d / e(i, j);
    }
    return s;
}

} // namespace detail

/// Pearson X^2 for independence of rows and columns, df = (m-1)(n-1).
inline ChiSquareResult chi_square_independence(const ContingencyTable& t) {
    const RealMatrix e = expected_counts(t);
    double s = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) s += detail::row_statistic(t, e, i);
    return make_chi_square(s, static_cast<int>((t.rows() - 1) * (t.cols() - 1)));
}

struct RowContribution {
    std::string label;
    ChiSquareResult chi;
};

/// Each row's share of X^2 (expectations from the full table's margins), tested on n-1 df.
inline std::vector<RowContribution> row_contributions(const ContingencyTable& t) {
    const RealMatrix e = expected_counts(t);
    std::vector<RowContribution> out;
    out.reserve(t.rows());
    const int df = static_cast<int>(t.cols() - 1);
    for (std::size_t i = 0; i < t.rows(); ++i)
        out.push_back({t.row_labels()[i], make_chi_square(detail::row_statistic(t, e, i), df)});
    return out;
}

struct ScreeningStep {
    std::string removed;
    ChiSquareResult contribution;  // of the removed row, on the table before removal
    ChiSquareResult global_before;
};

struct ScreeningResult {
    ContingencyTable retained;
    std::vector<std::string> removed;
    std::vector<ScreeningStep> steps;
    ChiSquareResult initial;
    ChiSquareResult final_;
};

/// Removes, one at a time, the row whose contribution p-value is smallest while
/// that p-value is below alpha; margins are recomputed after every removal.
inline ScreeningResult screen_rows(const ContingencyTable& t, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw validation_error("screen_rows: alpha must lie in (0,1)");
    ScreeningResult res{t, {}, {}, chi_square_independence(t), {}};
    for (;;) {
        const auto& cur = res.retained;
        auto contrib = row_contributions(cur);
        std::size_t worst = 0;
        for (std::size_t i = 1; i < contrib.size(); ++i)
            if (contrib[i].chi.p_value < contrib[worst].chi.p_value) worst = i;
        if (!(contrib[worst].chi.p_value < alpha)) break;
        if (cur.rows() <= 2)
            throw validation_error("screen_rows: removing '" + contrib[worst].label +
                                   "' would leave fewer than 2 rows");
        res.steps.push_back({contrib[worst].label, contrib[worst].chi, chi_square_independence(cur)});
        res.removed.push_back(contrib[worst].label);
        res.retained = drop_rows(cur, {contrib[worst].label});
    }
    res.final_ = chi_square_independence(res.retained);
    return res;
}

} // namespace ctfit
