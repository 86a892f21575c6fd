#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "error.hpp"
#include "special.hpp"
#include "table.hpp"

namespace ctfit {

// ---------------------------------------------------------------------------
// Parameter records
// ---------------------------------------------------------------------------

struct DiscreteUniformParams {
    std::int64_t a = 0;
    std::int64_t b = 0;
};

/// Support {0, 1, ...}, mass p (1-p)^x, mean (1-p)/p.
struct GeometricParams {
    double p = 0.5;
};

/// Support {1, 2, ...}, mass -theta^x / (x ln(1-theta)).
struct LogarithmicParams {
    double theta = 0.5;
};

struct PoissonParams {
    double lambda = 1.0;
};

/// Mass Gamma(r+x) p^x (1-p)^r / (Gamma(x+1) Gamma(r)); p multiplies x, so the
/// mean is r p / (1-p).
struct NegBinParams {
    double r = 1.0;
    double p = 0.5;
};

/// Density z^(shape-1) e^(-z/scale) / (scale^shape Gamma(shape)). The
/// proportion form p with scale = p / (1-p) is what the reports print.
struct GammaParams {
    double shape = 1.0;
    double scale = 1.0;

    [[nodiscard]] double proportion() const { return scale / (1.0 + scale); }
    static GammaParams from_proportion(double shape, double p) { return {shape, p / (1.0 - p)}; }
};

using DistributionParams = std::variant<DiscreteUniformParams, GeometricParams, LogarithmicParams,
                                        PoissonParams, NegBinParams, GammaParams>;

enum class FitMethod { mle, moments, mle_fixed_shape };

inline const char* to_string(FitMethod m) {
    switch (m) {
    case FitMethod::mle: return "mle";
    case FitMethod::moments: return "moments";
    case FitMethod::mle_fixed_shape: return "mle_fixed_shape";
    }
    return "?";
}

struct FitResult {
    DistributionParams params;
    double log_likelihood = 0.0;
    FitMethod method = FitMethod::mle;
    std::size_t n = 0;
};

// ---------------------------------------------------------------------------
// Validation and descriptive helpers
// ---------------------------------------------------------------------------

inline void validate(const DiscreteUniformParams& d) {
    if (d.a > d.b) throw domain_error("uniform: need a <= b");
}
inline void validate(const GeometricParams& d) {
    if (!(d.p > 0.0 && d.p < 1.0)) throw domain_error("geometric: p must lie in (0,1)");
}
inline void validate(const LogarithmicParams& d) {
    if (!(d.theta > 0.0 && d.theta < 1.0)) throw domain_error("logarithmic: theta must lie in (0,1)");
}
inline void validate(const PoissonParams& d) {
    if (!(d.lambda > 0.0) || !std::isfinite(d.lambda)) throw domain_error("poisson: lambda must be positive");
}
inline void validate(const NegBinParams& d) {
    if (!(d.r > 0.0) || !std::isfinite(d.r)) throw domain_error("negbin: r must be positive");
    if (!(d.p > 0.0 && d.p < 1.0)) throw domain_error("negbin: p must lie in (0,1)");
}
inline void validate(const GammaParams& d) {
    if (!(d.shape > 0.0) || !(d.scale > 0.0) || !std::isfinite(d.shape) || !std::isfinite(d.scale))
        throw domain_error("gamma: shape and scale must be positive");
}
inline void validate(const DistributionParams& d) {
    std::visit([](const auto& x) { validate(x); }, d);
}

inline const char* family_name(const DistributionParams& d) {
    struct {
        const char* operator()(const DiscreteUniformParams&) const { return "uniform"; }
        const char* operator()(const GeometricParams&) const { return "geometric"; }
        const char* operator()(const LogarithmicParams&) const { return "logarithmic"; }
        const char* operator()(const PoissonParams&) const { return "poisson"; }
        const char* operator()(const NegBinParams&) const { return "negbin"; }
        const char* operator()(const GammaParams&) const { return "gamma"; }
    } v;
    return std::visit(v, d);
}

inline bool is_discrete(const DistributionParams& d) {
    return !std::holds_alternative<GammaParams>(d);
}

/// Number of parameters estimated from data, for chi-square degrees of freedom.
inline int free_parameters(const FitResult& f) {
    if (f.method == FitMethod::mle_fixed_shape) return 1;
    if (std::holds_alternative<GeometricParams>(f.params) || std::holds_alternative<LogarithmicParams>(f.params) ||
        std::holds_alternative<PoissonParams>(f.params))
        return 1;
    return 2;
}

inline double mean(const DistributionParams& d) {
    struct {
        double operator()(const DiscreteUniformParams& u) const { return 0.5 * static_cast<double>(u.a + u.b); }
        double operator()(const GeometricParams& g) const { return (1.0 - g.p) / g.p; }
        double operator()(const LogarithmicParams& l) const {
            return -l.theta / ((1.0 - l.theta) * std::log1p(-l.theta));
        }
        double operator()(const PoissonParams& p) const { return p.lambda; }
        double operator()(const NegBinParams& n) const { return n.r * n.p / (1.0 - n.p); }
        double operator()(const GammaParams& g) const { return g.shape * g.scale; }
    } v;
    return std::visit(v, d);
}

inline double variance(const DistributionParams& d) {
    struct {
        double operator()(const DiscreteUniformParams& u) const {
            double w = static_cast<double>(u.b - u.a + 1);
            return (w * w - 1.0) / 12.0;
        }
        double operator()(const GeometricParams& g) const { return (1.0 - g.p) / (g.p * g.p); }
        double operator()(const LogarithmicParams& l) const {
            double lg = std::log1p(-l.theta);
            return -l.theta * (l.theta + lg) / ((1.0 - l.theta) * (1.0 - l.theta) * lg * lg);
        }
        double operator()(const PoissonParams& p) const { return p.lambda; }
        double operator()(const NegBinParams& n) const { return n.r * n.p / ((1.0 - n.p) * (1.0 - n.p)); }
        double operator()(const GammaParams& g) const { return g.shape * g.scale * g.scale; }
    } v;
    return std::visit(v, d);
}

// ---------------------------------------------------------------------------
// Mass, density, CDF
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline bool is_count(double x) { return x >= 0.0 && std::floor(x) == x && std::isfinite(x); }

} // namespace detail

inline double log_mass(const DiscreteUniformParams& d, double x) {
    if (!detail::is_count(x) || x < static_cast<double>(d.a) || x > static_cast<double>(d.b))
        return detail::neg_inf;
    return -std::log(static_cast<double>(d.b - d.a + 1));
}
inline double log_mass(const GeometricParams& d, double x) {
    if (!detail::is_count(x)) return detail::neg_inf;
    return std::log(d.p) + x * std::log1p(-d.p);
}
inline double log_mass(const LogarithmicParams& d, double x) {
    if (!detail::is_count(x) || x < 1.0) return detail::neg_inf;
    return x * std::log(d.theta) - std::log(x) - std::log(-std::log1p(-d.theta));
}
inline double log_mass(const PoissonParams& d, double x) {
    if (!detail::is_count(x)) return detail::neg_inf;
    return x * std::log(d.lambda) - d.lambda - std::lgamma(x + 1.0);
}
inline double log_mass(const NegBinParams& d, double x) {
    if (!detail::is_count(x)) return detail::neg_inf;
    return std::lgamma(d.r + x) - std::lgamma(x + 1.0) - std::lgamma(d.r) + x * std::log(d.p) +
           d.r * std::log1p(-d.p);
}

template <typename P>
double mass(const P& d, double x) {
    validate(d);
    return std::exp(log_mass(d, x));
}

inline double log_density(const GammaParams& g, double z) {
    if (z < 0.0) return detail::neg_inf;
    if (z == 0.0) {
        if (g.shape < 1.0) return std::numeric_limits<double>::infinity();
        if (g.shape > 1.0) return detail::neg_inf;
        return -std::log(g.scale);
    }
    return (g.shape - 1.0) * std::log(z) - z / g.scale - g.shape * std::log(g.scale) - std::lgamma(g.shape);
}

inline double density(const GammaParams& g, double z) {
    validate(g);
    return std::exp(log_density(g, z));
}

/// CDF of the discrete families by direct summation of the mass.
template <typename P>
double discrete_cdf(const P& d, double x) {
    validate(d);
    if (x < 0.0) return 0.0;
    const auto top = static_cast<std::int64_t>(std::floor(x));
    double s = 0.0;
    for (std::int64_t k = 0; k <= top; ++k) {
        double term = std::exp(log_mass(d, static_cast<double>(k)));
        s += term;
        if (s >= 1.0) return 1.0;
    }
    return s;
}

inline double cdf(const DiscreteUniformParams& d, double x) {
    validate(d);
    if (x < static_cast<double>(d.a)) return 0.0;
    if (x >= static_cast<double>(d.b)) return 1.0;
    return (std::floor(x) - static_cast<double>(d.a) + 1.0) / static_cast<double>(d.b - d.a + 1);
}
inline double cdf(const GeometricParams& d, double x) { return discrete_cdf(d, x); }
inline double cdf(const LogarithmicParams& d, double x) { return discrete_cdf(d, x); }
inline double cdf(const PoissonParams& d, double x) { return discrete_cdf(d, x); }
inline double cdf(const NegBinParams& d, double x) { return discrete_cdf(d, x); }
inline double cdf(const GammaParams& g, double z) {
    validate(g);
    if (z <= 0.0) return 0.0;
    return special::reg_inc_gamma_lower(g.shape, z / g.scale);
}

inline double cdf(const DistributionParams& d, double x) {
    return std::visit([x](const auto& p) { return cdf(p, x); }, d);
}

inline double log_pdf(const DistributionParams& d, double x) {
    return std::visit(
        [x](const auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, GammaParams>) return log_density(p, x);
            else return log_mass(p, x);
        },
        d);
}

inline double log_likelihood(const DistributionParams& d, std::span<const double> data) {
    validate(d);
    double s = 0.0;
    for (double x : data) s += log_pdf(d, x);
    return s;
}

// ---------------------------------------------------------------------------
// Sample helpers
// ---------------------------------------------------------------------------

inline std::vector<double> to_reals(std::span<const Count> v) { return {v.begin(), v.end()}; }

namespace detail {

inline double sample_mean(std::span<const double> x) {
    if (x.empty()) throw validation_error("empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline void require_counts(std::span<const double> x, const char* who) {
    for (double v : x)
        if (!is_count(v)) throw validation_error(std::string(who) + ": data must be non-negative integers");
}

inline FitResult finish(DistributionParams p, std::span<const double> data, FitMethod m) {
    double ll = log_likelihood(p, data);
    return FitResult{std::move(p), ll, m, data.size()};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fitters
// ---------------------------------------------------------------------------

inline FitResult fit_poisson(std::span<const double> data) {
    detail::require_counts(data, "fit_poisson");
    const double m = detail::sample_mean(data);
    if (!(m > 0.0)) throw validation_error("fit_poisson: all-zero sample");
    return detail::finish(PoissonParams{m}, data, FitMethod::mle);
}

inline FitResult fit_geometric(std::span<const double> data) {
    detail::require_counts(data, "fit_geometric");
    const double m = detail::sample_mean(data);
    if (!(m > 0.0)) throw validation_error("fit_geometric: sample mean must be positive");
    return detail::finish(GeometricParams{1.0 / (1.0 + m)}, data, FitMethod::mle);
}

/// Solves mean = -theta / ((1-theta) ln(1-theta)) by bisection.
inline FitResult fit_logarithmic(std::span<const double> data) {
    detail::require_counts(data, "fit_logarithmic");
    for (double v : data)
        if (v < 1.0) throw validation_error("fit_logarithmic: values must be >= 1");
    const double m = detail::sample_mean(data);
    if (!(m > 1.0)) throw validation_error("fit_logarithmic: sample mean must exceed 1");
    auto g = [m](double th) { return -th / ((1.0 - th) * std::log1p(-th)) - m; };
    double lo = 1e-15;
    double hi = 1.0 - 1e-15;
    if (!(g(lo) < 0.0 && g(hi) > 0.0)) throw numeric_error("fit_logarithmic: bisection bracket failed");
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return detail::finish(LogarithmicParams{0.5 * (lo + hi)}, data, FitMethod::mle);
}

/// Integer-rounded method of moments: a + b = 2 mean, (b - a + 1)^2 - 1 = 12 s^2.
inline FitResult fit_uniform_moments(std::span<const double> data) {
    if (data.size() < 2) throw validation_error("fit_uniform_moments: need at least 2 values");
    const double m = detail::sample_mean(data);
    const double half = 0.5 * (std::sqrt(12.0 * detail::sample_variance(data) + 1.0) - 1.0);
    auto a = static_cast<std::int64_t>(std::llround(m - half));
    auto b = static_cast<std::int64_t>(std::llround(m + half));
    return detail::finish(DiscreteUniformParams{a, b}, data, FitMethod::moments);
}

/// Likelihood-stationary p for fixed r: p = mean / (r + mean).
inline FitResult fit_negbin_fixed_r(std::span<const double> data, double r) {
    detail::require_counts(data, "fit_negbin");
    const double m = detail::sample_mean(data);
    if (!(m > 0.0)) throw validation_error("fit_negbin: sample mean must be positive");
    if (!(r > 0.0)) throw domain_error("fit_negbin: r must be positive");
    return detail::finish(NegBinParams{r, m / (r + m)}, data, FitMethod::mle_fixed_shape);
}

inline std::vector<FitResult> profile_negbin(std::span<const double> data, std::span<const int> r_list) {
    std::vector<FitResult> out;
    out.reserve(r_list.size());
    for (int r : r_list) out.push_back(fit_negbin_fixed_r(data, r));
    return out;
}

/// Best natural r in 1..r_max (ties go to the smaller r).
inline FitResult fit_negbin_natural_r(std::span<const double> data, int r_max) {
    if (r_max < 1) throw validation_error("fit_negbin_natural_r: r_max must be >= 1");
    std::vector<int> rs(static_cast<std::size_t>(r_max));
    std::iota(rs.begin(), rs.end(), 1);
    auto prof = profile_negbin(data, rs);
    auto best = std::max_element(prof.begin(), prof.end(), [](const FitResult& x, const FitResult& y) {
        return x.log_likelihood < y.log_likelihood;
    });
    return *best;
}

/// Full MLE over real r > 0 via the profile score
/// sum psi(r + x) - n psi(r) + n ln(r / (r + mean)) = 0.
inline FitResult fit_negbin(std::span<const double> data) {
    detail::require_counts(data, "fit_negbin");
    const double m = detail::sample_mean(data);
    if (!(m > 0.0)) throw validation_error("fit_negbin: sample mean must be positive");
    const double n = static_cast<double>(data.size());
    // A finite maximizer exists iff the biased (divide-by-n) variance exceeds the mean.
    if (!(detail::sample_variance(data) * (n - 1.0) / n > m))
        throw numeric_error("fit_negbin: sample is not overdispersed, the likelihood has no finite maximizer in r");
    auto score = [&](double log_r) {
        double r = std::exp(log_r);
        double s = 0.0;
        for (double x : data) s += special::digamma(r + x);
        return s - n * special::digamma(r) + n * std::log(r / (r + m));
    };
    // Walk the upper end out geometrically; far out the score is a difference
    // of nearly equal digamma sums, so stop well before roundoff dominates.
    double lo = std::log(1e-6);
    double hi = 0.0;
    while (!(score(hi) < 0.0)) {
        lo = hi;
        hi += std::log(2.0);
        if (hi > std::log(1e7)) throw numeric_error("fit_negbin: cannot bracket r");
    }
    if (!(score(lo) > 0.0)) throw numeric_error("fit_negbin: cannot bracket r");
    boost::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(score, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    const double r = std::exp(0.5 * (a + b));
    return detail::finish(NegBinParams{r, m / (r + m)}, data, FitMethod::mle);
}

/// Solves ln k - psi(k) = target for k (the left side decreases from +inf to 0).
inline double solve_gamma_shape(double target, double start) {
    if (!(target > 0.0)) throw numeric_error("gamma shape: degenerate sample (all values equal)");
    auto g = [target](double k) { return std::log(k) - special::digamma(k) - target; };
    double k = (start > 0.0 && std::isfinite(start)) ? start : 0.5 / target;
    for (int it = 0; it < 100; ++it) {
        const double gk = g(k);
        const double dg = 1.0 / k - special::trigamma(k);
        double next = k - gk / dg;
        if (!(next > 0.0) || !std::isfinite(next)) break;
        if (std::abs(next - k) <= 1e-12 * next) return next;
        k = next;
    }
    // Newton left the domain or stalled: bisect on a sign bracket.
    double lo = 1e-8;
    double hi = 1.0;
    while (g(hi) > 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw numeric_error("gamma shape: bracket search failed");
    }
    for (int it = 0; it < 300 && hi - lo > 1e-13 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Full MLE: ln(shape) - psi(shape) = ln(mean) - mean(ln x), scale = mean / shape.
inline FitResult fit_gamma(std::span<const double> data) {
    if (data.size() < 2) throw validation_error("fit_gamma: need at least 2 values");
    double log_sum = 0.0;
    for (double v : data) {
        if (!(v > 0.0)) throw validation_error("fit_gamma: values must be positive");
        log_sum += std::log(v);
    }
    const double m = detail::sample_mean(data);
    const double target = std::log(m) - log_sum / static_cast<double>(data.size());
    const double var = detail::sample_variance(data);
    const double shape = solve_gamma_shape(target, var > 0.0 ? m * m / var : 0.0);
    return detail::finish(GammaParams{shape, m / shape}, data, FitMethod::mle);
}

inline FitResult fit_gamma_fixed_shape(std::span<const double> data, double shape) {
    if (!(shape > 0.0)) throw domain_error("fit_gamma_fixed_shape: shape must be positive");
    for (double v : data)
        if (!(v > 0.0)) throw validation_error("fit_gamma_fixed_shape: values must be positive");
    const double m = detail::sample_mean(data);
    return detail::finish(GammaParams{shape, m / shape}, data, FitMethod::mle_fixed_shape);
}

inline std::vector<FitResult> profile_gamma(std::span<const double> data, std::span<const int> shapes) {
    std::vector<FitResult> out;
    out.reserve(shapes.size());
    for (int s : shapes) out.push_back(fit_gamma_fixed_shape(data, s));
    return out;
}

/// Differential entropy in nats.
inline double gamma_entropy(const GammaParams& g) {
    validate(g);
    return g.shape + std::log(g.scale) + std::lgamma(g.shape) + (1.0 - g.shape) * special::digamma(g.shape);
}

// ---------------------------------------------------------------------------
// Families without a usable MLE on a given sample
// ---------------------------------------------------------------------------

enum class UnfittableFamily { bernoulli, binomial, hypergeometric };

inline const char* to_string(UnfittableFamily f) {
    switch (f) {
    case UnfittableFamily::bernoulli: return "bernoulli";
    case UnfittableFamily::binomial: return "binomial";
    case UnfittableFamily::hypergeometric: return "hypergeometric";
    }
    return "?";
}

struct FitVerdict {
    UnfittableFamily family;
    bool rejected = false;
    std::string reason;
    std::optional<double> p;  // Bernoulli success probability when fitted
};

/// Decides whether a bounded-support count family admits a finite MLE.
/// Binomial and hypergeometric laws are under-dispersed (variance < mean for
/// every admissible upper parameter); with the biased sample variance >= mean their
/// likelihood keeps rising as the upper parameter grows, so no finite maximizer
/// exists.
inline FitVerdict reject_unfittable(std::span<const double> data, UnfittableFamily family) {
    FitVerdict v{family, false, {}, std::nullopt};
    if (data.empty()) {
        v.rejected = true;
        v.reason = "empty sample";
        return v;
    }
    for (double x : data)
        if (!detail::is_count(x)) {
            v.rejected = true;
            v.reason = "values are not non-negative integers";
            return v;
        }
    const double m = detail::sample_mean(data);
    const double hi = *std::max_element(data.begin(), data.end());
    switch (family) {
    case UnfittableFamily::bernoulli:
        if (hi > 1.0) {
            v.rejected = true;
            v.reason = "values exceed 1 (support is {0,1})";
        } else {
            v.p = m;
        }
        return v;
    case UnfittableFamily::binomial:
    case UnfittableFamily::hypergeometric: {
        const double n = static_cast<double>(data.size());
        const double var = data.size() > 1 ? detail::sample_variance(data) * (n - 1.0) / n : 0.0;
        if (var >= m) {
            v.rejected = true;
            v.reason = "sample variance " + std::to_string(var) + " >= mean " + std::to_string(m) +
                       ": likelihood increases without bound in the upper parameter, no finite MLE";
        } else {
            v.reason = "under-dispersed sample; a finite MLE may exist";
        }
        return v;
    }
    }
    return v;
}

} // namespace ctfit
