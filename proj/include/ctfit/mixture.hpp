#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "distributions.hpp"
#include "error.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace ctfit {

// ---------------------------------------------------------------------------
// Poisson-Gamma mixture identity
// ---------------------------------------------------------------------------

/// int_0^inf Poisson(x; z) Gamma(z; r, p/(1-p)) dz by adaptive quadrature.
/// The domain is cut where both the mixing Gamma and the integrand's own
/// Gamma-shaped envelope leave less than 1e-14 of tail mass.
inline double negbin_via_mixture(double r, double p, std::int64_t x) {
    validate(NegBinParams{r, p});
    if (x < 0) return 0.0;
    const double beta = p / (1.0 - p);
    const double xd = static_cast<double>(x);
    const double log_norm = -std::lgamma(xd + 1.0) - r * std::log(beta) - std::lgamma(r);
    auto integrand = [&](double z) {
        if (z <= 0.0) return 0.0;
        return std::exp((xd + r - 1.0) * std::log(z) - z - z / beta + log_norm);
    };
    const double post_scale = beta / (1.0 + beta);
    const double upper = std::max(beta * special::reg_inc_gamma_upper_inv(r, 1e-14),
                                  post_scale * special::reg_inc_gamma_upper_inv(xd + r, 1e-14));
    std::vector<double> breaks{0.0};
    const double mode = (xd + r - 1.0) * post_scale;
    if (mode > 0.0 && mode < upper) breaks.push_back(mode);
    breaks.push_back(upper);
    const auto res = quadrature::integrate_pieces(integrand, breaks, 1e-13, 1e-12);
    if (!res.converged || res.error > 1e-10)
        throw numeric_error("negbin_via_mixture: quadrature missed 1e-10 at x=" + std::to_string(x));
    return res.value;
}

// ---------------------------------------------------------------------------
// Joint NegBin + Gamma likelihood with a shared (r, p)
// ---------------------------------------------------------------------------

struct NaturalAlternative {
    int r = 0;
    double p = 0.0;
    double log_likelihood = 0.0;
};

struct JointFit {
    double r_a = 0.0;
    double p_a = 0.0;
    double log_likelihood = 0.0;
    std::vector<NaturalAlternative> natural_alternatives;  ///< best first

    [[nodiscard]] double scale() const { return p_a / (1.0 - p_a); }
};

namespace detail {

// Sufficient statistics of the joint problem, parameterized by (r, beta) with
// beta = p / (1-p) the Gamma scale.
struct JointProblem {
    std::span<const double> obs;
    double n = 0, k = 0, sum_x = 0, sum_lam = 0, sum_log_lam = 0, const_x = 0;

    JointProblem(std::span<const double> o, std::span<const double> lam) : obs(o) {
        n = static_cast<double>(o.size());
        k = static_cast<double>(lam.size());
        for (double x : o) {
            sum_x += x;
            const_x -= std::lgamma(x + 1.0);
        }
        for (double l : lam) {
            sum_lam += l;
            sum_log_lam += std::log(l);
        }
    }

    [[nodiscard]] double loglik(double r, double beta) const {
        double s = const_x;
        for (double x : obs) s += std::lgamma(r + x);
        s -= (n + k) * std::lgamma(r);
        s += sum_x * std::log(beta) - (sum_x + n * r) * std::log1p(beta);
        if (k > 0) s += (r - 1.0) * sum_log_lam - sum_lam / beta - k * r * std::log(beta);
        return s;
    }

    // Stationary beta for fixed r: r(n+k) beta^2 - (S_x + S_lam - k r) beta - S_lam = 0.
    [[nodiscard]] double best_beta(double r) const {
        const double A = r * (n + k);
        const double B = sum_x + sum_lam - k * r;
        return (B + std::sqrt(B * B + 4.0 * A * sum_lam)) / (2.0 * A);
    }

    [[nodiscard]] std::array<double, 2> gradient(double r, double beta) const {
        double gr = 0.0;
        for (double x : obs) gr += special::digamma(r + x);
        gr -= (n + k) * special::digamma(r) + n * std::log1p(beta);
        if (k > 0) gr += sum_log_lam - k * std::log(beta);
        double gb = sum_x / beta - (sum_x + n * r) / (1.0 + beta) + sum_lam / (beta * beta) - k * r / beta;
        return {gr, gb};
    }

    [[nodiscard]] std::array<double, 3> hessian(double r, double beta) const {
        double hrr = 0.0;
        for (double x : obs) hrr += special::trigamma(r + x);
        hrr -= (n + k) * special::trigamma(r);
        const double hrb = -n / (1.0 + beta) - k / beta;
        const double hbb = -sum_x / (beta * beta) + (sum_x + n * r) / ((1.0 + beta) * (1.0 + beta)) -
                           2.0 * sum_lam / (beta * beta * beta) + k * r / (beta * beta);
        return {hrr, hrb, hbb};
    }
};

template <typename F>
double maximize_1d(F&& f, double lo, double hi) {
    auto neg = [&](double x) { return -f(x); };
    boost::uintmax_t iters = 500;
    return boost::math::tools::brent_find_minima(neg, lo, hi, 52, iters).first;
}

} // namespace detail

/// Maximizes sum ln NegBin(obs; r, p) + sum ln Gamma(lambda; r, p/(1-p)).
/// A coarse grid over r (with the stationary p for each r) seeds Brent's
/// method on the profile, and Newton steps on (r, p) polish the optimum.
inline JointFit joint_negbin_gamma_mle(std::span<const double> obs, std::span<const double> lambdas) {
    if (obs.empty()) throw validation_error("joint fit: empty observation sample");
    for (double x : obs)
        if (!(x >= 0.0) || std::floor(x) != x) throw validation_error("joint fit: observations must be counts");
    for (double l : lambdas)
        if (!(l > 0.0)) throw validation_error("joint fit: lambdas must be positive");
    const detail::JointProblem prob(obs, lambdas);
    if (!(prob.sum_x > 0.0)) throw validation_error("joint fit: all-zero observations");
    auto profile = [&](double r) { return prob.loglik(r, prob.best_beta(r)); };

    const double step = 0.25;
    double top = 64.0;
    double best_r = step;
    for (;;) {
        double best = -std::numeric_limits<double>::infinity();
        for (double r = step; r <= top + 1e-12; r += step) {
            const double v = profile(r);
            if (v > best) {
                best = v;
                best_r = r;
            }
        }
        if (best_r < top - 1e-12) break;
        top *= 2.0;
        if (top > 1e6) throw numeric_error("joint fit: likelihood keeps rising in r (no finite maximizer)");
    }
    double r = detail::maximize_1d(profile, std::max(step * 0.01, best_r - step), best_r + step);
    double beta = prob.best_beta(r);

    bool ok = false;
    for (int it = 0; it < 50; ++it) {
        auto g = prob.gradient(r, beta);
        if (std::abs(g[0]) < 1e-8 && std::abs(g[1]) < 1e-8) {
            ok = true;
            break;
        }
        auto h = prob.hessian(r, beta);
        const double det = h[0] * h[2] - h[1] * h[1];
        if (!(det > 0.0) || !(h[0] < 0.0)) break;
        double dr = -(h[2] * g[0] - h[1] * g[1]) / det;
        double db = -(-h[1] * g[0] + h[0] * g[1]) / det;
        while (r + dr <= 0.0 || beta + db <= 0.0) {
            dr *= 0.5;
            db *= 0.5;
        }
        r += dr;
        beta += db;
    }
    if (!ok) {
        auto g = prob.gradient(r, beta);
        if (std::abs(g[0]) > 1e-6 || std::abs(g[1]) > 1e-6) throw numeric_error("joint fit: Newton refinement did not converge");
    }

    JointFit fit;
    fit.r_a = r;
    fit.p_a = beta / (1.0 + beta);
    fit.log_likelihood = prob.loglik(r, beta);
    for (int nr : {static_cast<int>(std::floor(r)), static_cast<int>(std::ceil(r))}) {
        if (nr < 1) continue;
        if (!fit.natural_alternatives.empty() && fit.natural_alternatives.back().r == nr) continue;
        const double b = prob.best_beta(nr);
        fit.natural_alternatives.push_back({nr, b / (1.0 + b), prob.loglik(nr, b)});
    }
    std::sort(fit.natural_alternatives.begin(), fit.natural_alternatives.end(),
              [](const auto& x, const auto& y) { return x.log_likelihood > y.log_likelihood; });
    return fit;
}

/// Joint log-likelihood at given (r, p).
inline double joint_log_likelihood(std::span<const double> obs, std::span<const double> lambdas, double r, double p) {
    return detail::JointProblem(obs, lambdas).loglik(r, p / (1.0 - p));
}

// ---------------------------------------------------------------------------
// Coupled Gamma fits with reciprocal scales q and 1/q
// ---------------------------------------------------------------------------

struct NaturalPairAlternative {
    int r_b = 0;
    int r_p = 0;
    double p_bp = 0.0;
    double log_likelihood = 0.0;
};

struct CoupledGammaFit {
    double r_b = 0.0;
    double r_p = 0.0;
    double p_bp = 0.0;
    double q = 0.0;  ///< p_bp / (1 - p_bp)
    double log_likelihood = 0.0;
    std::vector<NaturalPairAlternative> natural_alternatives;  ///< best first
};

/// psi^{-1}(y) by Newton from a standard starting guess.
inline double inverse_digamma(double y) {
    double x = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y + 0.5772156649015329);
    for (int it = 0; it < 100; ++it) {
        const double step = (special::digamma(x) - y) / special::trigamma(x);
        double next = x - step;
        if (next <= 0.0) next = 0.5 * x;
        if (std::abs(next - x) <= 1e-15 * next) return next;
        x = next;
    }
    return x;
}

namespace detail {

struct CoupledProblem {
    double nb = 0, sb = 0, lb = 0;  // size, sum, sum of logs for lambda_B
    double np = 0, sp = 0, lp = 0;

    CoupledProblem(std::span<const double> b, std::span<const double> p) {
        nb = static_cast<double>(b.size());
        np = static_cast<double>(p.size());
        for (double x : b) {
            sb += x;
            lb += std::log(x);
        }
        for (double x : p) {
            sp += x;
            lp += std::log(x);
        }
    }

    [[nodiscard]] double loglik(double rb, double rp, double q) const {
        const double lq = std::log(q);
        return (rb - 1.0) * lb - sb / q - nb * rb * lq - nb * std::lgamma(rb) + (rp - 1.0) * lp - sp * q +
               np * rp * lq - np * std::lgamma(rp);
    }

    // For fixed q the shapes decouple: psi(r_b) = mean ln lambda_B - ln q, psi(r_p) = mean ln lambda_P + ln q.
    [[nodiscard]] std::array<double, 2> best_shapes(double q) const {
        const double lq = std::log(q);
        return {inverse_digamma(lb / nb - lq), inverse_digamma(lp / np + lq)};
    }

    // For fixed shapes: S_P q^2 + (n_B r_b - n_P r_p) q - S_B = 0.
    [[nodiscard]] double best_q(double rb, double rp) const {
        const double B = nb * rb - np * rp;
        return (-B + std::sqrt(B * B + 4.0 * sp * sb)) / (2.0 * sp);
    }

    [[nodiscard]] std::array<double, 3> gradient(double rb, double rp, double q) const {
        const double lq = std::log(q);
        return {lb - nb * lq - nb * special::digamma(rb), lp + np * lq - np * special::digamma(rp),
                sb / (q * q) - nb * rb / q - sp + np * rp / q};
    }
};

} // namespace detail

/// Maximizes sum ln Gamma(lambda_B; r_b, q) + sum ln Gamma(lambda_P; r_p, 1/q).
/// The shapes are profiled out exactly for each q and Brent's method runs on
/// ln q; a final Newton pass drives the full gradient to zero.
inline CoupledGammaFit coupled_gamma_mle(std::span<const double> lambda_b, std::span<const double> lambda_p) {
    if (lambda_b.size() < 2 || lambda_p.size() < 2) throw validation_error("coupled fit: each sample needs >= 2 values");
    for (double x : lambda_b)
        if (!(x > 0.0)) throw validation_error("coupled fit: values must be positive");
    for (double x : lambda_p)
        if (!(x > 0.0)) throw validation_error("coupled fit: values must be positive");
    const detail::CoupledProblem prob(lambda_b, lambda_p);
    auto profile = [&](double t) {
        const double q = std::exp(t);
        auto s = prob.best_shapes(q);
        return prob.loglik(s[0], s[1], q);
    };
    // The separate fits suggest scales s_B ~ q and s_P ~ 1/q.
    const auto gb = std::get<GammaParams>(fit_gamma(lambda_b).params);
    const auto gp = std::get<GammaParams>(fit_gamma(lambda_p).params);
    const double t0 = 0.5 * (std::log(gb.scale) - std::log(gp.scale));
    double lo = t0 - 4.0;
    double hi = t0 + 4.0;
    double t = detail::maximize_1d(profile, lo, hi);
    if (std::abs(t - lo) < 1e-6 || std::abs(t - hi) < 1e-6) throw numeric_error("coupled fit: optimum at search boundary");

    double q = std::exp(t);
    auto shapes = prob.best_shapes(q);
    double rb = shapes[0];
    double rp = shapes[1];
    // Newton polish on (r_b, r_p, q); the Hessian is sparse (no r_b-r_p term).
    for (int it = 0; it < 50; ++it) {
        auto g = prob.gradient(rb, rp, q);
        if (std::abs(g[0]) < 1e-10 && std::abs(g[1]) < 1e-10 && std::abs(g[2]) < 1e-10) break;
        const double hbb = -prob.nb * special::trigamma(rb);
        const double hpp = -prob.np * special::trigamma(rp);
        const double hbq = -prob.nb / q;
        const double hpq = prob.np / q;
        const double hqq = -2.0 * prob.sb / (q * q * q) + (prob.nb * rb - prob.np * rp) / (q * q);
        // Eliminate r_b and r_p, solve for dq, back-substitute.
        const double sq = hqq - hbq * hbq / hbb - hpq * hpq / hpp;
        const double rq = -g[2] + hbq * g[0] / hbb + hpq * g[1] / hpp;
        double dq = rq / sq;
        double drb = (-g[0] - hbq * dq) / hbb;
        double drp = (-g[1] - hpq * dq) / hpp;
        while (rb + drb <= 0.0 || rp + drp <= 0.0 || q + dq <= 0.0) {
            dq *= 0.5;
            drb *= 0.5;
            drp *= 0.5;
        }
        rb += drb;
        rp += drp;
        q += dq;
    }
    auto g = prob.gradient(rb, rp, q);
    if (std::abs(g[0]) > 1e-6 || std::abs(g[1]) > 1e-6 || std::abs(g[2]) > 1e-6)
        throw numeric_error("coupled fit: Newton refinement did not converge");

    CoupledGammaFit fit;
    fit.r_b = rb;
    fit.r_p = rp;
    fit.q = q;
    fit.p_bp = q / (1.0 + q);
    fit.log_likelihood = prob.loglik(rb, rp, q);
    for (int nb : {static_cast<int>(std::floor(rb)), static_cast<int>(std::ceil(rb))})
        for (int np : {static_cast<int>(std::floor(rp)), static_cast<int>(std::ceil(rp))}) {
            if (nb < 1 || np < 1) continue;
            bool dup = std::any_of(fit.natural_alternatives.begin(), fit.natural_alternatives.end(),
                                   [&](const auto& a) { return a.r_b == nb && a.r_p == np; });
            if (dup) continue;
            const double qq = prob.best_q(nb, np);
            fit.natural_alternatives.push_back({nb, np, qq / (1.0 + qq), prob.loglik(nb, np, qq)});
        }
    std::sort(fit.natural_alternatives.begin(), fit.natural_alternatives.end(),
              [](const auto& x, const auto& y) { return x.log_likelihood > y.log_likelihood; });
    return fit;
}

inline double coupled_log_likelihood(std::span<const double> lambda_b, std::span<const double> lambda_p, double rb,
                                     double rp, double q) {
    return detail::CoupledProblem(lambda_b, lambda_p).loglik(rb, rp, q);
}

/// p_B + p_P for two Gamma fits expressed in proportion form.
inline double complementarity_check(const GammaParams& fit_b, const GammaParams& fit_p) {
    validate(fit_b);
    validate(fit_p);
    return fit_b.proportion() + fit_p.proportion();
}

// ---------------------------------------------------------------------------
// Density curves
// ---------------------------------------------------------------------------

struct DensityCurve {
    std::vector<double> grid;
    std::vector<double> values;
    double mass = 0.0;  ///< trapezoid integral over the grid
};

namespace detail {

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

inline std::vector<double> uniform_grid(double upper, double step) {
    std::vector<double> g;
    const auto count = static_cast<std::size_t>(std::ceil(upper / step));
    g.reserve(count + 1);
    for (std::size_t i = 0; i <= count; ++i) g.push_back(static_cast<double>(i) * step);
    return g;
}

inline void check_grid(double step, double span_sigmas) {
    if (!(step > 0.0)) throw validation_error("density curve: grid_step must be positive");
    if (!(span_sigmas > 0.0)) throw validation_error("density curve: span_sigmas must be positive");
}

} // namespace detail

/// Gamma density on [0, mean + span_sigmas * sd].
inline DensityCurve gamma_density_curve(const GammaParams& g, double grid_step, double span_sigmas) {
    validate(g);
    detail::check_grid(grid_step, span_sigmas);
    const double sd = std::sqrt(g.shape) * g.scale;
    DensityCurve c;
    c.grid = detail::uniform_grid(g.shape * g.scale + span_sigmas * sd, grid_step);
    for (double x : c.grid) c.values.push_back(x > 0.0 ? density(g, x) : (g.shape == 1.0 ? 1.0 / g.scale : 0.0));
    c.mass = detail::trapezoid(c.grid, c.values);
    if (c.mass < 0.99) throw numeric_error("density curve: grid too coarse (mass " + std::to_string(c.mass) + ")");
    return c;
}

/// Density of the sum of two independent Gamma variables, by direct quadrature
/// of int_0^x f1(u) f2(x-u) du at every point of a uniform grid covering
/// [0, mean1 + mean2 + span_sigmas (sd1 + sd2)].
inline DensityCurve gamma_convolution_density(const GammaParams& g1, const GammaParams& g2, double grid_step,
                                              double span_sigmas) {
    validate(g1);
    validate(g2);
    detail::check_grid(grid_step, span_sigmas);
    const double upper = g1.shape * g1.scale + g2.shape * g2.scale +
                         span_sigmas * (std::sqrt(g1.shape) * g1.scale + std::sqrt(g2.shape) * g2.scale);
    DensityCurve c;
    c.grid = detail::uniform_grid(upper, grid_step);
    c.values.reserve(c.grid.size());
    for (double x : c.grid) {
        if (x <= 0.0) {
            // Density at the origin: 0 when the combined shape exceeds 1.
            c.values.push_back(g1.shape + g2.shape > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
            continue;
        }
        auto integrand = [&](double u) {
            if (u <= 0.0 || u >= x) return 0.0;
            return std::exp(log_density(g1, u) + log_density(g2, x - u));
        };
        auto r = quadrature::integrate(integrand, 0.0, x, 1e-13, 1e-10);
        if (!r.converged && r.error > 1e-8)
            throw numeric_error("convolution: quadrature failed at x=" + std::to_string(x));
        c.values.push_back(r.value);
    }
    c.mass = detail::trapezoid(c.grid, c.values);
    if (!(c.mass >= 0.99)) throw numeric_error("convolution: grid too coarse (mass " + std::to_string(c.mass) + ")");
    return c;
}

/// Two-column CSV with header `x,density`, full precision.
inline std::string to_csv(const DensityCurve& c) {
    std::string out = "x,density\n";
    char buf[64];
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", c.grid[i], c.values[i]);
        out += buf;
    }
    return out;
}

} // namespace ctfit
