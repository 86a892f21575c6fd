#pragma once

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "table.hpp"

namespace ctfit {

/// Row factors a, column factors b of the multiplicative model O_ij ~ a_i b_j.
struct FactorPair {
    std::vector<double> a;
    std::vector<double> b;
    double s_squared = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct AlsOptions {
    double tol = 1e-12;
    int max_iter = 10000;
    /// Relative change of the row factors per sweep must also fall below this.
    double factor_tol = 1e-10;
    /// Starting row factors; empty means sqrt(grand total / (m n)) everywhere.
    std::vector<double> initial_a;
    /// When set, S^2 after every full (b, a) sweep is appended here.
    std::vector<double>* trace = nullptr;
};

inline RealMatrix to_real(const ContingencyTable& t) {
    RealMatrix m(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = static_cast<double>(t(i, j));
    return m;
}

namespace detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double residual_ss(const RealMatrix& o, const std::vector<double>& a,
                          const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < o.rows(); ++i)
        for (std::size_t j = 0; j < o.cols(); ++j) {
            double d = o(i, j) - a[i] * b[j];
            s += d * d;
        }
    return s;
}

} // namespace detail

/// Rescales (a, b) -> (c a, b / c) with c = sqrt(|b| / |a|) so that |a| = |b|.
inline FactorPair gauge_normalize(FactorPair f) {
    const double na = detail::norm2(f.a);
    const double nb = detail::norm2(f.b);
    if (!(na > 0.0) || !(nb > 0.0)) throw validation_error("gauge_normalize: zero factor vector");
    const double c = std::sqrt(nb / na);
    for (double& x : f.a) x *= c;
    for (double& x : f.b) x /= c;
    return f;
}

/// Outer product a b^T.
inline RealMatrix fitted_matrix(const FactorPair& f) {
    RealMatrix m(f.a.size(), f.b.size());
    for (std::size_t i = 0; i < f.a.size(); ++i)
        for (std::size_t j = 0; j < f.b.size(); ++j) m(i, j) = f.a[i] * f.b[j];
    return m;
}

inline double residual(const FactorPair& f, const RealMatrix& o) {
    if (o.rows() != f.a.size() || o.cols() != f.b.size())
        throw validation_error("residual: factor dimensions do not match the table");
    return detail::residual_ss(o, f.a, f.b);
}

inline double residual(const FactorPair& f, const ContingencyTable& t) {
    return residual(f, to_real(t));
}

/// Alternating least squares for the rank-1 model. Each sweep applies the
/// closed-form updates b_j = sum_i a_i O_ij / sum_i a_i^2, then
/// a_i = sum_j b_j O_ij / sum_j b_j^2, until S^2 settles. The returned pair is
/// gauge-normalized.
inline FactorPair als_fit(const RealMatrix& o, const AlsOptions& opt = {}) {
    const std::size_t m = o.rows();
    const std::size_t n = o.cols();
    if (m == 0 || n == 0) throw validation_error("als_fit: empty matrix");
    if (!(opt.tol > 0.0) || opt.max_iter < 1) throw validation_error("als_fit: bad tolerance or iteration cap");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (o(i, j) < 0.0) throw validation_error("als_fit: negative cell");
            rs += o(i, j);
        }
        if (!(rs > 0.0)) throw validation_error("als_fit: row " + std::to_string(i) + " is all zero");
        total += rs;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double cs = 0.0;
        for (std::size_t i = 0; i < m; ++i) cs += o(i, j);
        if (!(cs > 0.0)) throw validation_error("als_fit: column " + std::to_string(j) + " is all zero");
    }

    FactorPair f;
    if (opt.initial_a.empty()) {
        f.a.assign(m, std::sqrt(total / static_cast<double>(m * n)));
    } else {
        if (opt.initial_a.size() != m) throw validation_error("als_fit: initial factors have wrong length");
        f.a = opt.initial_a;
    }
    f.b.assign(n, 0.0);

    double prev = detail::residual_ss(o, f.a, f.b);
    std::vector<double> a_prev;
    for (f.iterations = 1; f.iterations <= opt.max_iter; ++f.iterations) {
        a_prev = f.a;
        double aa = 0.0;
        for (double x : f.a) aa += x * x;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += f.a[i] * o(i, j);
            f.b[j] = s / aa;
        }
        double bb = 0.0;
        for (double x : f.b) bb += x * x;
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += f.b[j] * o(i, j);
            f.a[i] = s / bb;
        }
        f.s_squared = detail::residual_ss(o, f.a, f.b);
        if (opt.trace) opt.trace->push_back(f.s_squared);
        double da = 0.0;
        for (std::size_t i = 0; i < m; ++i) da += (f.a[i] - a_prev[i]) * (f.a[i] - a_prev[i]);
        const bool settled = std::sqrt(da) <= opt.factor_tol * detail::norm2(f.a);
        if (settled && std::abs(f.s_squared - prev) <= opt.tol * std::max(1.0, f.s_squared)) {
            f.converged = true;
            break;
        }
        prev = f.s_squared;
    }
    if (!f.converged) f.iterations = opt.max_iter;
    f = gauge_normalize(std::move(f));
    f.s_squared = detail::residual_ss(o, f.a, f.b);
    return f;
}

inline FactorPair als_fit(const ContingencyTable& t, const AlsOptions& opt = {}) {
    return als_fit(to_real(t), opt);
}

} // namespace ctfit
