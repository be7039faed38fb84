#pragma once

// Fisher-zero lines of the boundary partition function, critical modes and
// their critical-time ladders.
//
// Two critical-mode conditions are provided. `consistent_sinh` is A_k = 0,
// i.e. sinh(beta eps) cos(2 dtheta) + sin(phi) sin(2 dtheta) = 0, which is
// where the Fisher lines cross the imaginary axis. `printed_tanh` replaces
// sinh by tanh; it agrees with the former at phi = 0 and at small beta eps
// but not in general, and is kept for comparison only.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dqpt/mode_dynamics.hpp"
#include "dqpt/model.hpp"
#include "dqpt/observables.hpp"
#include "dqpt/roots.hpp"

namespace dqpt {

// ---------------------------------------------------------------------------
// Fisher zeros
// ---------------------------------------------------------------------------

struct FisherPoint {
    double k = 0.0;
    complex z;
    double residual = 0.0;  ///< |per-mode boundary partition at z|
};

struct FisherLine {
    int branch = 0;
    std::vector<FisherPoint> samples;
    std::vector<double> skipped;  ///< momenta with a vanishing weight
    QuenchProtocol protocol;
};

/// z_n(k) = [ln(w_+/w_-) + i(2n+1)pi] / (2 eps_k(lambda')).
inline std::optional<complex> fisher_zero(const ModeCoefficients& c, int branch) {
    if (c.weight_plus <= 0.0 || c.weight_minus <= 0.0 || c.eps_post <= 0.0) return std::nullopt;
    const double re = std::log(c.weight_plus / c.weight_minus) / (2.0 * c.eps_post);
    const double im = (2.0 * branch + 1.0) * pi / (2.0 * c.eps_post);
    return complex{re, im};
}

inline FisherLine fisher_zero_line(const QuenchProtocol& protocol, int branch,
                                   const std::vector<double>& k_samples) {
    if (k_samples.empty()) throw std::invalid_argument("fisher_zero_line: no momenta given");
    FisherLine line;
    line.branch = branch;
    line.protocol = protocol;
    line.samples.reserve(k_samples.size());
    for (double k : k_samples) {
        if (!(k > 0.0 && k < pi))
            throw std::invalid_argument("fisher_zero_line: momentum " + std::to_string(k) +
                                        " outside (0, pi)");
        const ModeCoefficients c = mode_coefficients(protocol, k);
        const auto z = fisher_zero(c, branch);
        if (!z) {
            line.skipped.push_back(k);
            continue;
        }
        double residual = std::numeric_limits<double>::infinity();
        try {
            residual = std::abs(boundary_partition(c, *z));
        } catch (const std::range_error&) {
        }
        line.samples.push_back({k, *z, residual});
    }
    return line;
}

/// n_samples momenta evenly spaced strictly inside (0, pi).
inline std::vector<double> open_zone_grid(int n_samples) {
    if (n_samples < 1) throw std::invalid_argument("open_zone_grid: need at least one sample");
    std::vector<double> ks(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) ks[static_cast<std::size_t>(i)] = (i + 0.5) * pi / n_samples;
    return ks;
}

// ---------------------------------------------------------------------------
// Critical modes
// ---------------------------------------------------------------------------

enum class CriticalVariant { consistent_sinh, printed_tanh };

inline const char* to_string(CriticalVariant v) {
    return v == CriticalVariant::consistent_sinh ? "consistent_sinh" : "printed_tanh";
}

inline CriticalVariant parse_variant(std::string_view s) {
    if (s == "sinh" || s == "consistent_sinh") return CriticalVariant::consistent_sinh;
    if (s == "tanh" || s == "printed_tanh") return CriticalVariant::printed_tanh;
    throw std::invalid_argument("unknown critical-mode variant '" + std::string(s) + "'");
}

/// Residual of the critical-mode condition at k, continuous across the zone.
/// The sinh form is divided by cosh(beta eps) (it then equals A_k), which
/// keeps it bounded at large beta.
inline double critical_residual(const QuenchProtocol& protocol, double k, CriticalVariant variant) {
    const ModeCoefficients c = mode_coefficients(protocol, k);
    if (variant == CriticalVariant::consistent_sinh) return c.imbalance;
    const double th = thermal_factors(protocol.beta, c.eps_pre).tanh_x;
    return th * std::cos(2.0 * c.delta_theta) + std::sin(protocol.phi) * std::sin(2.0 * c.delta_theta);
}

/// t*_n = (2n+1) pi / (2 eps_{k*}(lambda')), n = 0..n_max.
inline std::vector<double> critical_times(const QuenchProtocol& protocol, double k_star, int n_max) {
    if (!(k_star > 0.0 && k_star < pi))
        throw std::invalid_argument("critical_times: k_star must lie in (0, pi)");
    if (n_max < 0) throw std::invalid_argument("critical_times: n_max must be >= 0");
    const double e = dispersion(k_star, protocol.lambda_post, protocol.coupling);
    if (!(e > 0.0)) throw std::domain_error("critical_times: gapless post-quench mode");
    std::vector<double> ts(static_cast<std::size_t>(n_max + 1));
    for (int n = 0; n <= n_max; ++n) ts[static_cast<std::size_t>(n)] = (2.0 * n + 1.0) * pi / (2.0 * e);
    return ts;
}

struct CriticalOptions {
    ScanOptions scan{};
    int n_max = 3;
    /// Measure the winding-number jump at each t*_0; costs two phase
    /// profiles per root.
    bool measure_jumps = true;
    int k_resolution = 1024;
    /// Relative offset delta/t*_0 of the winding samples around t*_0.
    double jump_offset = 1e-3;
};

struct CriticalMode {
    double k_star = 0.0;
    double residual = 0.0;
    std::vector<double> times;
    int jump_sign = 0;     ///< sign of nu(t*_0 + d) - nu(t*_0 - d); 0 if no jump
    double jump = 0.0;     ///< the measured difference itself
};

struct CriticalSet {
    CriticalVariant condition_variant = CriticalVariant::consistent_sinh;
    std::vector<CriticalMode> modes;  ///< ascending in k*
    QuenchProtocol protocol;
    std::vector<std::string> warnings;
};

/// Size of the winding-number discontinuity at t: nu is extrapolated
/// linearly to t from samples at t +- d and t +- 2d (d = offset * t), which
/// removes the smooth drift of nu across the window.
inline double winding_jump(const QuenchProtocol& protocol, double t, int k_resolution,
                           double offset = 1e-3) {
    const double d = offset * t;
    auto nu = [&](double s) { return winding_number(protocol, s, k_resolution).nu; };
    const double before = 2.0 * nu(t - d) - nu(t - 2.0 * d);
    const double after = 2.0 * nu(t + d) - nu(t + 2.0 * d);
    return after - before;
}

/// Dense sign scan of the variant's residual over (0, pi) with bisection of
/// every bracket; roots come back in ascending order with their ladders.
inline CriticalSet critical_modes(const QuenchProtocol& protocol,
                                  CriticalVariant variant = CriticalVariant::consistent_sinh,
                                  const CriticalOptions& opt = {}) {
    CriticalSet set;
    set.condition_variant = variant;
    set.protocol = protocol;
    const auto roots = scan_roots([&](double k) { return critical_residual(protocol, k, variant); },
                                  zone_margin, pi - zone_margin, opt.scan);
    for (const Root& r : roots) {
        CriticalMode m;
        m.k_star = r.x;
        m.residual = r.residual;
        if (std::abs(m.residual) >= 1e-10)
            set.warnings.push_back("root k*=" + std::to_string(r.x) + " has residual " +
                                   std::to_string(m.residual));
        m.times = critical_times(protocol, r.x, opt.n_max);
        if (opt.measure_jumps) {
            try {
                m.jump = winding_jump(protocol, m.times.front(), opt.k_resolution, opt.jump_offset);
                m.jump_sign = std::abs(m.jump) < 0.5 ? 0 : (m.jump > 0.0 ? 1 : -1);
            } catch (const UnwrapError& e) {
                set.warnings.push_back(std::string("jump sign not measured: ") + e.what());
            }
        }
        set.modes.push_back(std::move(m));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Variant comparison
// ---------------------------------------------------------------------------

struct VariantRoot {
    CriticalVariant variant;
    double k_star;
    double residual;         ///< in its own equation
    double other_residual;   ///< in the other variant's equation
    bool fisher_confirmed;   ///< Re z_0(k) changes sign across k*
};

struct VariantReport {
    QuenchProtocol protocol;
    std::vector<VariantRoot> roots;  ///< sinh roots first, then tanh roots
};

/// True when Re z_0 has opposite signs at k* -/+ dk.
inline bool fisher_sign_change(const QuenchProtocol& protocol, double k_star, double dk = 1e-6) {
    const double lo = std::max(k_star - dk, 0.5 * k_star);
    const double hi = std::min(k_star + dk, 0.5 * (k_star + pi));
    const auto zl = fisher_zero(mode_coefficients(protocol, lo), 0);
    const auto zh = fisher_zero(mode_coefficients(protocol, hi), 0);
    if (!zl || !zh) return false;
    return std::signbit(zl->real()) != std::signbit(zh->real());
}

inline VariantReport variant_report(const QuenchProtocol& protocol, const ScanOptions& scan = {}) {
    VariantReport rep;
    rep.protocol = protocol;
    CriticalOptions opt;
    opt.scan = scan;
    opt.measure_jumps = false;
    opt.n_max = 0;
    for (CriticalVariant v : {CriticalVariant::consistent_sinh, CriticalVariant::printed_tanh}) {
        const CriticalVariant other = v == CriticalVariant::consistent_sinh ? CriticalVariant::printed_tanh
                                                                            : CriticalVariant::consistent_sinh;
        for (const CriticalMode& m : critical_modes(protocol, v, opt).modes)
            rep.roots.push_back({v, m.k_star, m.residual, critical_residual(protocol, m.k_star, other),
                                 fisher_sign_change(protocol, m.k_star)});
    }
    return rep;
}

}  // namespace dqpt
