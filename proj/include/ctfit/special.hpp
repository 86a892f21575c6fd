#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "error.hpp"

namespace ctfit::special {

inline double lgamma(double x) {
    if (!(x > 0.0)) throw domain_error("lgamma: argument must be positive");
    return std::lgamma(x);
}

inline double digamma(double x) {
    if (!(x > 0.0)) throw domain_error("digamma: argument must be positive");
    return boost::math::digamma(x);
}

inline double trigamma(double x) {
    if (!(x > 0.0)) throw domain_error("trigamma: argument must be positive");
    return boost::math::trigamma(x);
}

/// P(s, x) = gamma(s, x) / Gamma(s).
inline double reg_inc_gamma_lower(double s, double x) {
    if (!(s > 0.0) || !(x >= 0.0)) throw domain_error("reg_inc_gamma_lower: need s > 0, x >= 0");
    return boost::math::gamma_p(s, x);
}

/// Q(s, x) = 1 - P(s, x), computed directly so small tails keep precision.
inline double reg_inc_gamma_upper(double s, double x) {
    if (!(s > 0.0) || !(x >= 0.0)) throw domain_error("reg_inc_gamma_upper: need s > 0, x >= 0");
    return boost::math::gamma_q(s, x);
}

/// x such that Q(s, x) = q.
inline double reg_inc_gamma_upper_inv(double s, double q) {
    if (!(s > 0.0) || !(q > 0.0 && q < 1.0)) throw domain_error("reg_inc_gamma_upper_inv: bad arguments");
    return boost::math::gamma_q_inv(s, q);
}

/// Upper tail of the chi-square law with `df` degrees of freedom.
inline double chi_square_sf(double statistic, double df) {
    if (!(df > 0.0)) throw domain_error("chi_square_sf: df must be positive");
    if (statistic <= 0.0) return 1.0;
    if (std::isinf(statistic)) return 0.0;
    return reg_inc_gamma_upper(0.5 * df, 0.5 * statistic);
}

/// Asymptotic Kolmogorov survival function 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_sf(double lambda) {
    if (!(lambda > 0.0)) throw domain_error("kolmogorov_sf: lambda must be positive");
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-300 || term < 1e-17 * std::abs(sum)) break;
    }
    double p = 2.0 * sum;
    return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

namespace detail {

// Square matrix product with a shared decimal exponent so entries stay in range.
struct ScaledMatrix {
    std::size_t m = 0;
    std::vector<double> v;
    int exp10 = 0;
};

inline ScaledMatrix multiply(const ScaledMatrix& a, const ScaledMatrix& b) {
    ScaledMatrix c{a.m, std::vector<double>(a.m * a.m, 0.0), a.exp10 + b.exp10};
    for (std::size_t i = 0; i < a.m; ++i)
        for (std::size_t k = 0; k < a.m; ++k) {
            double aik = a.v[i * a.m + k];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < a.m; ++j) c.v[i * a.m + j] += aik * b.v[k * a.m + j];
        }
    double centre = c.v[(c.m / 2) * c.m + c.m / 2];
    if (centre > 1e140) {
        for (double& x : c.v) x *= 1e-140;
        c.exp10 += 140;
    }
    return c;
}

inline ScaledMatrix power(const ScaledMatrix& a, int n) {
    if (n == 1) return a;
    ScaledMatrix half = power(a, n / 2);
    ScaledMatrix sq = multiply(half, half);
    return (n % 2 == 0) ? sq : multiply(a, sq);
}

} // namespace detail

/// Exact CDF of the one-sample Kolmogorov statistic D_n at d
/// (Marsaglia, Tsang & Wang matrix-power method).
inline double kolmogorov_cdf_exact(int n, double d) {
    if (n < 1) throw domain_error("kolmogorov_cdf_exact: n must be positive");
    if (d <= 0.5 / n) return 0.0;
    if (d >= 1.0) return 1.0;
    const int k = static_cast<int>(n * d) + 1;
    const auto m = static_cast<std::size_t>(2 * k - 1);
    const double h = k - n * d;

    detail::ScaledMatrix hm{m, std::vector<double>(m * m, 0.0), 0};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            hm.v[i * m + j] = (static_cast<long>(i) - static_cast<long>(j) + 1 < 0) ? 0.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        hm.v[i * m] -= std::pow(h, static_cast<double>(i + 1));
        hm.v[(m - 1) * m + i] -= std::pow(h, static_cast<double>(m - i));
    }
    if (2.0 * h - 1.0 > 0.0) hm.v[(m - 1) * m] += std::pow(2.0 * h - 1.0, static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            long span = static_cast<long>(i) - static_cast<long>(j) + 1;
            for (long g = 1; g <= span; ++g) hm.v[i * m + j] /= static_cast<double>(g);
        }

    detail::ScaledMatrix q = detail::power(hm, n);
    double s = q.v[static_cast<std::size_t>(k - 1) * m + static_cast<std::size_t>(k - 1)];
    int e = q.exp10;
    for (int i = 1; i <= n; ++i) {
        s = s * i / n;
        if (s < 1e-140) {
            s *= 1e140;
            e -= 140;
        }
    }
    double cdf = s * std::pow(10.0, e);
    return cdf < 0.0 ? 0.0 : (cdf > 1.0 ? 1.0 : cdf);
}

/// P(D_n > d) from the exact distribution.
inline double kolmogorov_sf_exact(int n, double d) {
    double sf = 1.0 - kolmogorov_cdf_exact(n, d);
    return sf < 0.0 ? 0.0 : sf;
}

} // namespace ctfit::special
