#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "distributions.hpp"
#include "error.hpp"
#include "independence.hpp"
#include "special.hpp"

namespace ctfit {

using CdfFunction = std::function<double(double)>;

inline CdfFunction cdf_of(const DistributionParams& d) {
    validate(d);
    return [d](double x) { return cdf(d, x); };
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

enum class KsPValue {
    exact,     ///< finite-n Kolmogorov distribution
    stephens,  ///< asymptotic law at (sqrt(n) + 0.12 + 0.11/sqrt(n)) D
};

struct KsResult {
    double d = 0.0;
    double p = 1.0;
};

inline double ks_p_value(double d, std::size_t n, KsPValue method = KsPValue::exact) {
    if (d <= 0.0) return 1.0;
    if (method == KsPValue::exact) return special::kolmogorov_sf_exact(static_cast<int>(n), d);
    const double rn = std::sqrt(static_cast<double>(n));
    return special::kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d);
}

/// D = max over the sorted sample of max(i/n - F(x_i), F(x_i) - (i-1)/n).
/// Discrete fits are compared through their CDF directly, without continuity
/// correction.
inline KsResult ks_test(std::span<const double> data, const CdfFunction& F,
                        KsPValue method = KsPValue::exact) {
    if (data.size() < 2) throw validation_error("ks_test: need at least 2 values");
    std::vector<double> x(data.begin(), data.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = F(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return {d, ks_p_value(d, x.size(), method)};
}

inline KsResult ks_test(std::span<const double> data, const DistributionParams& dist,
                        KsPValue method = KsPValue::exact) {
    return ks_test(data, cdf_of(dist), method);
}

// ---------------------------------------------------------------------------
// Anderson-Darling
// ---------------------------------------------------------------------------

/// Name of the p-value approximation used for A^2 (fully specified null).
inline constexpr const char* ad_p_value_method =
    "Marsaglia & Marsaglia (2004): asymptotic ADinf with finite-n error correction";

/// Asymptotic CDF of A^2.
inline double ad_inf_cdf(double z) {
    if (z <= 0.0) return 0.0;
    if (z < 2.0)
        return std::exp(-1.2337141 / z) / std::sqrt(z) *
               (2.00012 + (.247105 - (.0649821 - (.0347962 - (.011672 - .00168691 * z) * z) * z) * z) * z);
    return std::exp(-std::exp(1.0776 - (2.30695 - (.43424 - (.082433 - (.008056 - .0003146 * z) * z) * z) * z) * z));
}

namespace detail {

inline double ad_errfix(double n, double x) {
    if (x > 0.8)
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
    const double c = .01265 + .1757 / n;
    if (x < c) {
        double t = x / c;
        t = std::sqrt(t) * (1.0 - t) * (49.0 * t - 102.0);
        return t * (.0037 / (n * n) + .00078 / n + .00006) / n;
    }
    double t = (x - c) / (0.8 - c);
    t = -.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    return t * (.04213 + .01365 / n) / n;
}

} // namespace detail

/// CDF of A^2 for sample size n under a fully specified null.
inline double ad_cdf(std::size_t n, double z) {
    const double x = ad_inf_cdf(z);
    const double v = x + detail::ad_errfix(static_cast<double>(n), x);
    return std::clamp(v, 0.0, 1.0);
}

/// Upper tail 1 - ad_cdf(n, z). Past the 0.999 quantile the finite-n
/// correction (whose fitted polynomial does not vanish at 1) exceeds the tail
/// mass itself, so the asymptotic tail is returned there, computed without
/// cancellation.
inline double ad_sf(std::size_t n, double z) {
    const double x = ad_inf_cdf(z);
    if (x <= 0.999) return 1.0 - ad_cdf(n, z);
    if (z < 2.0) return 1.0 - x;
    const double g = 1.0776 - (2.30695 - (.43424 - (.082433 - (.008056 - .0003146 * z) * z) * z) * z) * z;
    return -std::expm1(-std::exp(g));
}

struct AdResult {
    double a2 = 0.0;
    double p = 1.0;
    bool clamped = false;  ///< some F(x) hit 0 or 1 and was clamped
};

inline constexpr double ad_clamp_low = 1e-300;
inline constexpr double ad_clamp_high = 1.0 - 1e-15;

/// A^2 = -n - (1/n) sum (2k-1) [ln F(x_(k)) + ln(1 - F(x_(n+1-k)))].
inline AdResult ad_test(std::span<const double> data, const CdfFunction& F) {
    if (data.size() < 2) throw validation_error("ad_test: need at least 2 values");
    std::vector<double> x(data.begin(), data.end());
    std::stable_sort(x.begin(), x.end());
    const std::size_t n = x.size();
    AdResult r;
    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = F(x[i]);
        if (v < ad_clamp_low || v > ad_clamp_high) {
            r.clamped = true;
            v = std::clamp(v, ad_clamp_low, ad_clamp_high);
        }
        f[i] = v;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        s += static_cast<double>(2 * k + 1) * (std::log(f[k]) + std::log1p(-f[n - 1 - k]));
    r.a2 = -static_cast<double>(n) - s / static_cast<double>(n);
    r.p = ad_sf(n, r.a2);
    return r;
}

inline AdResult ad_test(std::span<const double> data, const DistributionParams& dist) {
    return ad_test(data, cdf_of(dist));
}

// ---------------------------------------------------------------------------
// Pearson chi-square goodness of fit
// ---------------------------------------------------------------------------

struct ChiSquareGof {
    double statistic = 0.0;
    int df = 0;
    double p = 1.0;
    std::size_t bins = 0;
};

namespace detail {

inline double support_start(const DistributionParams& d) {
    if (const auto* u = std::get_if<DiscreteUniformParams>(&d)) return static_cast<double>(u->a);
    if (std::holds_alternative<LogarithmicParams>(d)) return 1.0;
    return 0.0;
}

// Bin upper edges (inclusive, last is +inf) for a discrete law, grown greedily
// from the left so every bin expects at least min_expected observations.
inline std::vector<double> discrete_edges(const DistributionParams& d, double n, double min_expected) {
    std::vector<double> edges;
    double x = support_start(d);
    double cum = cdf(d, x - 1.0);
    double open = 0.0;
    for (int guard = 0; guard < 1000000; ++guard, x += 1.0) {
        const double m = std::exp(log_pdf(d, x));
        open += n * m;
        cum += m;
        const double remaining = n * std::max(0.0, 1.0 - cum);
        if (remaining < min_expected) break;
        if (open >= min_expected) {
            edges.push_back(x);
            open = 0.0;
        }
    }
    // The open bin plus the tail forms the last bin; fold it into its
    // neighbour when it would fall short.
    const double last = open + n * std::max(0.0, 1.0 - cum);
    if (last < min_expected && !edges.empty()) edges.pop_back();
    edges.push_back(std::numeric_limits<double>::infinity());
    return edges;
}

} // namespace detail

/// Bins the support left to right (each bin expecting >= min_expected, last bin
/// absorbing the tail; equiprobable bins for the continuous Gamma) and returns
/// X^2 with df = bins - 1 - fitted parameters.
inline ChiSquareGof chisq_gof(std::span<const double> data, const DistributionParams& dist,
                              int fitted_parameters, double min_expected = 5.0) {
    if (data.size() < 5) throw validation_error("chisq_gof: need at least 5 values");
    if (!(min_expected > 0.0)) throw validation_error("chisq_gof: min_expected must be positive");
    validate(dist);
    const double n = static_cast<double>(data.size());

    std::vector<double> upper;  // inclusive upper edges, last = +inf
    std::vector<double> expected;
    if (is_discrete(dist)) {
        upper = detail::discrete_edges(dist, n, min_expected);
        double prev = -std::numeric_limits<double>::infinity();
        for (double e : upper) {
            const double hi = std::isinf(e) ? 1.0 : cdf(dist, e);
            const double lo = std::isinf(prev) ? 0.0 : cdf(dist, prev);
            expected.push_back(n * (hi - lo));
            prev = e;
        }
    } else {
        const auto& g = std::get<GammaParams>(dist);
        const auto k = static_cast<std::size_t>(std::floor(n / min_expected));
        if (k < 2) throw validation_error("chisq_gof: fewer than 2 bins achievable");
        for (std::size_t b = 1; b < k; ++b)
            upper.push_back(g.scale * boost::math::gamma_p_inv(g.shape, static_cast<double>(b) / static_cast<double>(k)));
        upper.push_back(std::numeric_limits<double>::infinity());
        expected.assign(k, n / static_cast<double>(k));
    }
    if (upper.size() < 2) throw validation_error("chisq_gof: fewer than 2 bins achievable");

    std::vector<double> observed(upper.size(), 0.0);
    for (double x : data) {
        auto it = std::lower_bound(upper.begin(), upper.end(), x);
        observed[static_cast<std::size_t>(it - upper.begin())] += 1.0;
    }
    ChiSquareGof r;
    r.bins = upper.size();
    for (std::size_t b = 0; b < upper.size(); ++b) {
        const double d = observed[b] - expected[b];
        r.statistic += expected[b] > 0.0 ? d * d / expected[b] : (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    r.df = static_cast<int>(r.bins) - 1 - fitted_parameters;
    if (r.df < 1) throw validation_error("chisq_gof: no degrees of freedom left after binning");
    r.p = special::chi_square_sf(r.statistic, r.df);
    return r;
}

// ---------------------------------------------------------------------------
// Combinations
// ---------------------------------------------------------------------------

struct CombinedPair {
    double cs = 0.0;
    double p_cs = 1.0;
};

/// cs = ln(1/p_ks) + ln(1/p_ad); p_cs = exp(-cs/2), the chi-square(2) upper tail at cs.
inline CombinedPair combine_pair(double p_ks, double p_ad) {
    if (!(p_ks >= 0.0 && p_ks <= 1.0) || !(p_ad >= 0.0 && p_ad <= 1.0))
        throw validation_error("combine_pair: probabilities must lie in [0,1]");
    if (p_ks == 0.0 || p_ad == 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
    const double cs = -std::log(p_ks) - std::log(p_ad);
    // sqrt(p_ks p_ad) equals exp(-cs/2) and returns p exactly when p_ks == p_ad.
    const double prod = p_ks * p_ad;
    return {cs, prod >= std::numeric_limits<double>::min() ? std::sqrt(prod) : std::exp(-0.5 * cs)};
}

/// Fisher's method: 2 sum ln(1/p) ~ chi-square(2k).
inline ChiSquareResult fisher_combine(std::span<const double> ps) {
    if (ps.empty()) throw validation_error("fisher_combine: empty list");
    double s = 0.0;
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0)) throw validation_error("fisher_combine: probabilities must lie in [0,1]");
        s += (p == 0.0) ? std::numeric_limits<double>::infinity() : -2.0 * std::log(p);
    }
    return make_chi_square(s, static_cast<int>(2 * ps.size()));
}

// ---------------------------------------------------------------------------
// Battery
// ---------------------------------------------------------------------------

struct GofReport {
    double ks_d = 0.0;
    double p_ks = 1.0;
    double ad_a2 = 0.0;
    double p_ad = 1.0;
    bool ad_clamped = false;
    std::optional<ChiSquareGof> chisq;
    double cs = 0.0;
    double p_cs = 1.0;
};

struct GofOptions {
    KsPValue ks = KsPValue::exact;
    double min_expected = 5.0;
};

/// K-S, A-D, binned chi-square (when enough bins remain) and their pair combination.
inline GofReport gof_battery(std::span<const double> data, const FitResult& fit, const GofOptions& opt = {}) {
    GofReport r;
    const auto F = cdf_of(fit.params);
    const auto ks = ks_test(data, F, opt.ks);
    const auto ad = ad_test(data, F);
    r.ks_d = ks.d;
    r.p_ks = ks.p;
    r.ad_a2 = ad.a2;
    r.p_ad = ad.p;
    r.ad_clamped = ad.clamped;
    try {
        r.chisq = chisq_gof(data, fit.params, free_parameters(fit), opt.min_expected);
    } catch (const validation_error&) {
        r.chisq.reset();
    }
    const auto c = combine_pair(r.p_ks, r.p_ad);
    r.cs = c.cs;
    r.p_cs = c.p_cs;
    return r;
}

} // namespace ctfit
