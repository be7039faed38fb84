#pragma once

// Chain-level observables: Loschmidt rate functions (finite chain and
// thermodynamic limit), the single-mode critical rate function, the
// total/dynamical/geometric phase profile across the zone, the winding
// number of the geometric phase, and a cusp detector for sampled series.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dqpt/mode_dynamics.hpp"
#include "dqpt/model.hpp"
#include "dqpt/quadrature.hpp"

namespace dqpt {

/// Mode echoes below this are zeros of the amplitude up to rounding of its
/// O(1) terms; the corresponding rate is reported as +infinity.
inline constexpr double singular_echo_floor = 1e-30;

namespace detail {

inline double log_echo(const ModeCoefficients& c, double t) {
    const double e = mode_echo(c, t);
    return e <= singular_echo_floor ? -std::numeric_limits<double>::infinity() : std::log(e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Rate functions
// ---------------------------------------------------------------------------

/// -(1/N) sum_k ln|G_k(t)|^2 over the N/2 momenta of an N-site chain.
/// Returns +infinity when some grid mode has an exactly vanishing amplitude.
inline double rate_function_finite(const QuenchProtocol& protocol, int n_sites, double t) {
    if (t < 0.0) throw std::invalid_argument("rate_function_finite: t must be >= 0");
    const ModeGrid grid = mode_grid(n_sites);
    double sum = 0.0;
    for (double k : grid.momenta) sum += detail::log_echo(mode_coefficients(protocol, k), t);
    return -sum / n_sites;
}

struct RateValue {
    double value = 0.0;
    double error_bound = 0.0;
    int subdivisions = 0;
    bool converged = true;
};

/// Thermodynamic-limit rate function r(t) = -(1/2pi) int_0^pi ln|G_k(t)|^2 dk.
///
/// The imbalance roots are located once on construction and used as a priori
/// break points: at a critical time the integrand has a logarithmic
/// singularity exactly there.
class RateFunction {
public:
    explicit RateFunction(const QuenchProtocol& protocol, int max_panels = 4000)
        : protocol_(protocol), max_panels_(max_panels) {
        for (const Root& r : imbalance_roots(protocol_)) breaks_.push_back(r.x);
    }

    RateValue operator()(double t, double tol = 1e-8) const {
        if (t < 0.0) throw std::invalid_argument("rate_function: t must be >= 0");
        if (!(tol > 0.0)) throw std::invalid_argument("rate_function: tol must be > 0");
        const double scale = -1.0 / (2.0 * pi);
        auto integrand = [&](double k) { return detail::log_echo(mode_coefficients(protocol_, k), t); };
        QuadratureOptions opt;
        opt.abs_tol = tol / std::abs(scale);
        opt.max_panels = max_panels_;
        const QuadratureResult q = integrate(integrand, 0.0, pi, breaks_, opt);
        RateValue r;
        r.value = scale * q.value;
        r.error_bound = std::abs(scale) * q.error_bound;
        r.subdivisions = q.subdivisions;
        r.converged = q.converged && std::isfinite(r.value);
        return r;
    }

    const std::vector<double>& break_points() const { return breaks_; }
    const QuenchProtocol& protocol() const { return protocol_; }

private:
    QuenchProtocol protocol_;
    int max_panels_;
    std::vector<double> breaks_;
};

inline RateValue rate_function(const QuenchProtocol& protocol, double t, double tol = 1e-8) {
    return RateFunction(protocol)(t, tol);
}

/// -ln|G_{k*}(t)|^2 of a single mode; +infinity at an exact zero.
inline double critical_rate_function(const ModeCoefficients& c, double t) {
    if (t < 0.0) throw std::invalid_argument("critical_rate_function: t must be >= 0");
    return -detail::log_echo(c, t);
}

inline double critical_rate_function(const QuenchProtocol& protocol, double k_star, double t) {
    if (!(k_star > 0.0 && k_star < pi))
        throw std::invalid_argument("critical_rate_function: k_star must lie in (0, pi)");
    return critical_rate_function(mode_coefficients(protocol, k_star), t);
}

enum class RateMethod { finite_n, quadrature };

inline const char* to_string(RateMethod m) {
    return m == RateMethod::finite_n ? "finite_N" : "quadrature";
}

/// A uniformly sampled rate function.
struct RateSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> estimated_error;
    std::vector<bool> singular;
    RateMethod method = RateMethod::quadrature;
    QuenchProtocol protocol;
    int n_sites = 0;                 ///< finite_n only
    long total_subdivisions = 0;     ///< quadrature only
    int unconverged_samples = 0;     ///< quadrature only
};

inline std::vector<double> uniform_times(double t_min, double t_max, int steps) {
    if (steps < 2) throw std::invalid_argument("time grid needs at least 2 samples");
    if (!(t_max > t_min)) throw std::invalid_argument("time grid needs t_min < t_max");
    std::vector<double> ts(static_cast<std::size_t>(steps));
    const double h = (t_max - t_min) / (steps - 1);
    for (int i = 0; i < steps; ++i) ts[static_cast<std::size_t>(i)] = t_min + i * h;
    ts.back() = t_max;
    return ts;
}

namespace detail {

// Runs body(i) for i in [0, n) on up to `jobs` threads with static
// contiguous chunks; every index is written by exactly one thread.
template <class Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Samples r(t) by quadrature on `times`. Each sample is computed
/// independently, so the result does not depend on `jobs`.
inline RateSeries rate_series(const QuenchProtocol& protocol, const std::vector<double>& times,
                              double tol = 1e-8, int jobs = 1) {
    const RateFunction rate(protocol);
    RateSeries s;
    s.method = RateMethod::quadrature;
    s.protocol = protocol;
    s.times = times;
    const std::size_t n = times.size();
    s.values.resize(n);
    s.estimated_error.resize(n);
    std::vector<RateValue> raw(n);
    detail::parallel_for(n, jobs, [&](std::size_t i) { raw[i] = rate(times[i], tol); });
    s.singular.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        s.values[i] = raw[i].value;
        s.estimated_error[i] = raw[i].error_bound;
        s.singular[i] = !std::isfinite(raw[i].value);
        s.total_subdivisions += raw[i].subdivisions;
        if (!raw[i].converged) ++s.unconverged_samples;
    }
    return s;
}

inline RateSeries rate_series_finite(const QuenchProtocol& protocol, int n_sites,
                                     const std::vector<double>& times, int jobs = 1) {
    RateSeries s;
    s.method = RateMethod::finite_n;
    s.protocol = protocol;
    s.n_sites = n_sites;
    s.times = times;
    const std::size_t n = times.size();
    s.values.resize(n);
    s.estimated_error.assign(n, 0.0);
    mode_grid(n_sites);  // validate before spawning work
    detail::parallel_for(n, jobs,
                         [&](std::size_t i) { s.values[i] = rate_function_finite(protocol, n_sites, times[i]); });
    s.singular.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.singular[i] = !std::isfinite(s.values[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Cusp detection
// ---------------------------------------------------------------------------

struct CuspOptions {
    /// A sample is a cusp when its absolute second difference exceeds this
    /// multiple of the median second difference of its neighbours. At a kink
    /// the ratio grows like 1/h while it stays O(1) on smooth stretches.
    double ratio = 50.0;
    /// Neighbours taken on each side, skipping the adjacent sample (a kink
    /// between two grid points lifts both of them).
    int window = 5;
};

/// Times at which a uniformly sampled series has a kink. Non-finite samples
/// are reported as cusps directly.
inline std::vector<double> detect_cusps(const std::vector<double>& times, const std::vector<double>& values,
                                        const CuspOptions& opt = {}) {
    const std::size_t n = values.size();
    if (n < 5 || times.size() != n)
        throw std::invalid_argument("detect_cusps: need at least 5 samples with matching times");
    const double h = (times.back() - times.front()) / static_cast<double>(n - 1);
    if (!(h > 0.0)) throw std::invalid_argument("detect_cusps: times must increase");
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs((times[i] - times[i - 1]) - h) > 1e-6 * h)
            throw std::invalid_argument("detect_cusps: series is not uniformly sampled");

    std::vector<double> cusps;
    // d2[i] belongs to sample i + 1
    std::vector<double> d2(n - 2);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(values[i])) scale = std::max(scale, std::abs(values[i]));
    for (std::size_t i = 0; i + 2 < n; ++i)
        d2[i] = std::abs(values[i + 2] - 2.0 * values[i + 1] + values[i]);
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;

    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(values[i])) cusps.push_back(times[i]);

    const auto w = static_cast<std::ptrdiff_t>(opt.window);
    const auto m = static_cast<std::ptrdiff_t>(d2.size());
    std::vector<double> neighbours;
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        if (!std::isfinite(d2[static_cast<std::size_t>(i)])) continue;
        const double here = d2[static_cast<std::size_t>(i)];
        const double left = i > 0 ? d2[static_cast<std::size_t>(i - 1)] : 0.0;
        const double right = i + 1 < m ? d2[static_cast<std::size_t>(i + 1)] : 0.0;
        if (!(here >= left && here > right)) continue;
        neighbours.clear();
        for (std::ptrdiff_t j = i - w - 1; j <= i + w + 1; ++j) {
            if (j < 0 || j >= m || std::abs(j - i) < 2) continue;
            const double v = d2[static_cast<std::size_t>(j)];
            if (std::isfinite(v)) neighbours.push_back(v);
        }
        if (neighbours.empty()) continue;
        auto mid = neighbours.begin() + static_cast<std::ptrdiff_t>(neighbours.size() / 2);
        std::nth_element(neighbours.begin(), mid, neighbours.end());
        const double median = *mid;
        if (here > opt.ratio * std::max(median, noise)) cusps.push_back(times[static_cast<std::size_t>(i + 1)]);
    }
    std::sort(cusps.begin(), cusps.end());
    return cusps;
}

inline std::vector<double> detect_cusps(const RateSeries& series, const CuspOptions& opt = {}) {
    return detect_cusps(series.times, series.values, opt);
}

// ---------------------------------------------------------------------------
// Phases and winding number
// ---------------------------------------------------------------------------

struct PhaseOptions {
    /// Constant added to the mode energy in the dynamical phase,
    /// phi^D = -t (<H_k(lambda')> + energy_offset). Zero is the physical
    /// convention; other values are a gauge check.
    double energy_offset = 0.0;
    /// Maximum number of bisections of one initial grid interval.
    int max_depth = 40;
    /// The profile spans [edge, pi - edge].
    double edge = 1e-9;
};

struct PhaseProfile {
    double time = 0.0;
    std::vector<double> k_samples;
    std::vector<double> total_phase;
    std::vector<double> dynamical_phase;
    std::vector<double> geometric_phase;
    int refinements = 0;
    bool unwrap_ok = true;
    double failed_momentum = 0.0;  ///< first momentum where unwrapping failed
};

namespace detail {

struct PhaseSample {
    double k;
    double total_raw;   // arg G_k in (-pi, pi]
    double dynamical;
    double geometric_raw;
};

inline PhaseSample phase_sample(const QuenchProtocol& p, double k, double t, double offset) {
    const ModeCoefficients c = mode_coefficients(p, k);
    const complex g = mode_amplitude(c, t);
    const double dyn = -t * (post_quench_energy(c) + offset);
    const double total = std::arg(g);
    return {k, total, dyn, normalize_phase(total - dyn)};
}

}  // namespace detail

/// Total, dynamical and geometric phase of G_k(t) across the zone.
///
/// The geometric phase is unwrapped along k; the grid is bisected wherever
/// adjacent samples of the geometric or total phase differ by pi/2 or more.
/// The total phase is reported on the same branch, total = geometric + dynamical.
/// At a critical (k*, t*) the amplitude vanishes and no refinement can bring
/// the jump below pi/2; the profile is then flagged.
inline PhaseProfile phase_profile(const QuenchProtocol& protocol, double t, int k_resolution,
                                  const PhaseOptions& opt = {}) {
    if (k_resolution < 64) throw std::invalid_argument("phase_profile: k_resolution must be >= 64");
    if (t < 0.0) throw std::invalid_argument("phase_profile: t must be >= 0");

    PhaseProfile prof;
    prof.time = t;
    const double lo = opt.edge, hi = pi - opt.edge;
    const double step = (hi - lo) / (k_resolution - 1);
    auto sample = [&](double k) { return detail::phase_sample(protocol, k, t, opt.energy_offset); };

    std::vector<detail::PhaseSample> out;
    std::vector<double> geo;  // unwrapped geometric phase, parallel to out

    // Iterative bisection with an explicit stack keeps ordering by k.
    auto emit = [&](const detail::PhaseSample& s, double g) {
        out.push_back(s);
        geo.push_back(g);
    };
    detail::PhaseSample first = sample(lo);
    emit(first, first.geometric_raw);

    struct Pending {
        detail::PhaseSample right;
        int depth;
    };
    std::vector<Pending> stack;
    for (int j = 1; j < k_resolution; ++j) {
        const double k = j + 1 == k_resolution ? hi : lo + j * step;
        stack.push_back({sample(k), 0});
        while (!stack.empty()) {
            const detail::PhaseSample& left = out.back();
            const Pending top = stack.back();
            const double dg = normalize_phase(top.right.geometric_raw - left.geometric_raw);
            const double dtotal = dg + (top.right.dynamical - left.dynamical);
            const bool smooth = std::abs(dg) < pi / 2 && std::abs(dtotal) < pi / 2;
            if (smooth || top.depth >= opt.max_depth) {
                if (!smooth && prof.unwrap_ok) {
                    prof.unwrap_ok = false;
                    prof.failed_momentum = 0.5 * (left.k + top.right.k);
                }
                stack.pop_back();
                emit(top.right, geo.back() + dg);
                continue;
            }
            const double mid = 0.5 * (left.k + top.right.k);
            if (!(mid > left.k && mid < top.right.k)) {
                // interval exhausted at machine resolution
                stack.back().depth = opt.max_depth;
                continue;
            }
            stack.push_back({sample(mid), top.depth + 1});
            ++prof.refinements;
        }
    }

    const std::size_t n = out.size();
    prof.k_samples.resize(n);
    prof.total_phase.resize(n);
    prof.dynamical_phase.resize(n);
    prof.geometric_phase.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        prof.k_samples[i] = out[i].k;
        prof.dynamical_phase[i] = out[i].dynamical;
        prof.geometric_phase[i] = geo[i];
        prof.total_phase[i] = geo[i] + out[i].dynamical;
    }
    return prof;
}

/// Raised when the geometric phase cannot be unwrapped because t sits on a
/// critical time.
class UnwrapError : public std::runtime_error {
public:
    UnwrapError(double momentum, double nearest_critical_time)
        : std::runtime_error("phase unwrapping failed at k=" + std::to_string(momentum) +
                             " (nearest critical time " + std::to_string(nearest_critical_time) + ")"),
          momentum_(momentum),
          nearest_critical_time_(nearest_critical_time) {}

    double momentum() const { return momentum_; }
    double nearest_critical_time() const { return nearest_critical_time_; }

private:
    double momentum_;
    double nearest_critical_time_;
};

/// Closest t*_n = (2n+1) pi / (2 eps_{k*}(lambda')) to t over all imbalance
/// roots k*; NaN if there are none.
inline double nearest_critical_time(const QuenchProtocol& protocol, double t) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const Root& r : imbalance_roots(protocol)) {
        const double e = dispersion(r.x, protocol.lambda_post, protocol.coupling);
        const double n = std::max(0.0, std::round((2.0 * e * t / pi - 1.0) / 2.0));
        const double tn = (2.0 * n + 1.0) * pi / (2.0 * e);
        if (std::isnan(best) || std::abs(tn - t) < std::abs(best - t)) best = tn;
    }
    return best;
}

struct WindingResult {
    double nu = 0.0;
    int unwrap_refinements = 0;
};

/// nu(t) = [phi^G(pi) - phi^G(0)] / 2pi with phi^G unwrapped along k. Reported
/// as a real number; plateaus are not forced to integers.
inline WindingResult winding_number(const QuenchProtocol& protocol, double t, int k_resolution = 1024,
                                    const PhaseOptions& opt = {}) {
    const PhaseProfile prof = phase_profile(protocol, t, k_resolution, opt);
    if (!prof.unwrap_ok) throw UnwrapError(prof.failed_momentum, nearest_critical_time(protocol, t));
    return {(prof.geometric_phase.back() - prof.geometric_phase.front()) / (2.0 * pi), prof.refinements};
}

}  // namespace dqpt
