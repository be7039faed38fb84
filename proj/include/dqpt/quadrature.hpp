#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature with a priori break
// points. Panels with the largest error estimate are bisected first, which
// copes with integrable logarithmic singularities at panel ends because the
// Kronrod nodes never touch the endpoints.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

namespace dqpt {

struct QuadratureResult {
    double value = 0.0;
    double error_bound = 0.0;
    int subdivisions = 0;
    int evaluations = 0;
    bool converged = true;
};

struct QuadratureOptions {
    double abs_tol = 1e-8;
    double rel_tol = 0.0;
    int max_panels = 4000;
};

namespace detail {

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

// Nodes and weights of the 15-point Kronrod rule and its embedded 7-point
// Gauss rule on [-1, 1]; only the nonnegative abscissae are stored.
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

template <class F>
Panel gauss_kronrod_15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = fc * wgk[7];
    double gauss = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * xgk[j];
        const double sum = f(c - dx) + f(c + dx);
        kronrod += wgk[j] * sum;
        if (j % 2 == 1) gauss += wg[j / 2] * sum;
    }
    kronrod *= h;
    gauss *= h;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Integrates f over [a, b], splitting first at every interior point of
/// `breaks`. Stops when the summed error estimate is below
/// max(abs_tol, rel_tol*|value|) or the panel budget is spent; in the latter
/// case `converged` is false and `error_bound` is the achieved estimate.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, std::span<const double> breaks = {},
                           const QuadratureOptions& opt = {}) {
    if (!(b > a)) throw std::invalid_argument("integrate: empty interval");
    if (!(opt.abs_tol > 0.0 || opt.rel_tol > 0.0))
        throw std::invalid_argument("integrate: tolerance must be positive");

    std::vector<double> cuts{a};
    for (double x : breaks)
        if (x > a && x < b) cuts.push_back(x);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    QuadratureResult res;
    std::priority_queue<detail::Panel> queue;
    double value = 0.0, error = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        auto p = detail::gauss_kronrod_15(f, cuts[i], cuts[i + 1]);
        res.evaluations += 15;
        value += p.value;
        error += p.error;
        queue.push(p);
    }

    auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(value)); };
    while (error > target()) {
        if (static_cast<int>(queue.size()) >= opt.max_panels) {
            res.converged = false;
            break;
        }
        const detail::Panel worst = queue.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            res.converged = false;
            break;
        }
        queue.pop();
        auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        res.evaluations += 30;
        ++res.subdivisions;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }

    // Re-sum in a fixed order so the result does not carry the drift of the
    // running updates above.
    std::vector<detail::Panel> panels;
    panels.reserve(queue.size());
    while (!queue.empty()) {
        panels.push_back(queue.top());
        queue.pop();
    }
    std::sort(panels.begin(), panels.end(),
              [](const detail::Panel& l, const detail::Panel& r) { return l.a < r.a; });
    res.value = 0.0;
    res.error_bound = 0.0;
    for (const auto& p : panels) {
        res.value += p.value;
        res.error_bound += p.error;
    }
    if (res.converged && res.error_bound > target()) res.converged = false;
    return res;
}

}  // namespace dqpt
