#pragma once

// Dense sign scan followed by bracketed bisection, for residuals that are
// continuous on a closed interval and may have several simple roots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dqpt {

struct Root {
    double x = 0.0;
    double residual = 0.0;
    int iterations = 0;
};

struct ScanOptions {
    /// Uniform panels across [lo, hi].
    int panels = 4096;
    /// Extra geometrically spaced nodes inside the first and last panel, so
    /// roots hugging an endpoint are still bracketed.
    int edge_nodes = 48;
    /// Smallest distance from an endpoint reached by the geometric nodes,
    /// relative to the interval length.
    double edge_depth = 1e-12;
    double x_tol = 1e-13;
    int max_iterations = 200;
};

/// Bisection on a bracket with f(lo), f(hi) of opposite sign. Returns the
/// bracket end with the smaller |f| once the bracket is below x_tol.
template <class F>
Root bisect(F&& f, double lo, double hi, double f_lo, double f_hi, double x_tol = 1e-13,
            int max_iterations = 200) {
    if (std::signbit(f_lo) == std::signbit(f_hi))
        throw std::invalid_argument("bisect: endpoints do not bracket a sign change");
    Root r;
    for (; r.iterations < max_iterations && hi - lo > x_tol; ++r.iterations) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = f(mid);
        if (f_mid == 0.0) {
            r.x = mid;
            r.residual = 0.0;
            return r;
        }
        if (std::signbit(f_mid) == std::signbit(f_lo)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    if (std::abs(f_lo) <= std::abs(f_hi)) {
        r.x = lo;
        r.residual = f_lo;
    } else {
        r.x = hi;
        r.residual = f_hi;
    }
    return r;
}

namespace detail {

inline std::vector<double> scan_nodes(double lo, double hi, const ScanOptions& opt, double shift) {
    const double width = hi - lo;
    const double h = width / opt.panels;
    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(opt.panels + 2 * opt.edge_nodes + 2));
    nodes.push_back(lo);
    // geometric ladder from lo + edge_depth*width up to lo + h
    const double d0 = opt.edge_depth * width;
    for (int i = 0; i < opt.edge_nodes; ++i) {
        const double frac = static_cast<double>(i) / opt.edge_nodes;
        nodes.push_back(lo + d0 * std::pow(h / d0, frac));
    }
    for (int i = 1; i < opt.panels; ++i) nodes.push_back(lo + (i + shift) * h);
    for (int i = opt.edge_nodes - 1; i >= 0; --i) {
        const double frac = static_cast<double>(i) / opt.edge_nodes;
        nodes.push_back(hi - d0 * std::pow(h / d0, frac));
    }
    nodes.push_back(hi);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    return nodes;
}

}  // namespace detail

/// All sign changes of f on [lo, hi], refined by bisection and returned in
/// ascending order. Double roots without a sign change are not reported.
/// A residual that is exactly zero on a scan node triggers a rescan with the
/// uniform nodes shifted by a fraction of a panel.
template <class F>
std::vector<Root> scan_roots(F&& f, double lo, double hi, const ScanOptions& opt = {}) {
    if (!(hi > lo)) throw std::invalid_argument("scan_roots: empty interval");
    if (opt.panels < 1) throw std::invalid_argument("scan_roots: panels must be >= 1");

    const double shifts[] = {0.0, 0.37, -0.29, 0.13};
    for (double shift : shifts) {
        const auto nodes = detail::scan_nodes(lo, hi, opt, shift);
        std::vector<double> values(nodes.size());
        bool exact_hit = false;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            values[i] = f(nodes[i]);
            const bool interior = i > 0 && i + 1 < nodes.size();
            if (values[i] == 0.0 && interior) exact_hit = true;
        }
        if (exact_hit && shift != shifts[std::size(shifts) - 1]) continue;

        std::vector<Root> roots;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const double a = values[i], b = values[i + 1];
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            if (a == 0.0) {
                const bool interior = i > 0;
                if (interior) roots.push_back({nodes[i], 0.0, 0});
                continue;
            }
            if (b == 0.0) continue;
            if (std::signbit(a) != std::signbit(b))
                roots.push_back(bisect(f, nodes[i], nodes[i + 1], a, b, opt.x_tol, opt.max_iterations));
        }
        return roots;
    }
    return {};
}

}  // namespace dqpt
