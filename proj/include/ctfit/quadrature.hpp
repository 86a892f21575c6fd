#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace ctfit::quadrature {

struct Result {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
    bool converged = false;
};

namespace detail {

// Kronrod 15-point abscissae (non-negative half) and weights; the Gauss
// 7-point rule uses every odd abscissa.
inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
Segment gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = fc * wgk[7];
    double gauss = fc * wg[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = h * xgk[j];
        const double s = f(c - dx) + f(c + dx);
        kron += wgk[j] * s;
        if (j % 2 == 1) gauss += wg[j / 2] * s;
    }
    return {a, b, kron * h, std::abs((kron - gauss) * h)};
}

} // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b]: the segment with the
/// largest error estimate is bisected until the summed estimate drops below
/// max(abs_tol, rel_tol * |value|) or the segment budget runs out.
template <typename F>
Result integrate(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                 int max_segments = 4000) {
    Result r;
    if (a == b) {
        r.converged = true;
        return r;
    }
    std::priority_queue<detail::Segment> heap;
    auto first = detail::gk15(f, a, b);
    r.evaluations = 15;
    heap.push(first);
    double value = first.value;
    double error = first.error;
    int segments = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(value)) && segments < max_segments) {
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::gk15(f, worst.a, mid);
        auto right = detail::gk15(f, mid, worst.b);
        r.evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++segments;
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    value = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    r.value = value;
    r.error = error;
    r.converged = error <= std::max(abs_tol, rel_tol * std::abs(value));
    return r;
}

/// Sums integrate() over consecutive pieces of a partition.
template <typename F>
Result integrate_pieces(F&& f, const std::vector<double>& breaks, double abs_tol, double rel_tol = 0.0) {
    Result total;
    total.converged = true;
    const double piece_tol = abs_tol / static_cast<double>(std::max<std::size_t>(1, breaks.size() - 1));
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        auto r = integrate(f, breaks[k], breaks[k + 1], piece_tol, rel_tol);
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
        total.converged = total.converged && r.converged;
    }
    return total;
}

} // namespace ctfit::quadrature
