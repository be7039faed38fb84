#pragma once

// Transverse-field Ising chain in the free-fermion mode picture: quench
// parameters, antiperiodic momentum grid, dispersion and Bogoliubov angles.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace dqpt {

using complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double infinite_beta = std::numeric_limits<double>::infinity();

/// Maps an angle into (-pi, pi].
inline double normalize_phase(double angle) {
    double r = std::remainder(angle, 2.0 * pi);
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

/// Sudden quench lambda_pre -> lambda_post of a chain prepared in a coherent
/// Gibbs state at inverse temperature beta with relative phase phi.
///
/// beta may be `infinite_beta` (ground state); all downstream formulas treat
/// that limit analytically. Energies are in units of the coupling.
struct QuenchProtocol {
    double lambda_pre = 0.0;
    double lambda_post = 0.0;
    double beta = 1.0;
    double phi = 0.0;
    double coupling = 1.0;

    bool ground_state() const { return std::isinf(beta); }

    /// Throws std::invalid_argument on an out-of-domain field or temperature
    /// and returns a copy with phi folded into (-pi, pi].
    QuenchProtocol validated() const {
        if (!(lambda_pre >= 0.0) || !std::isfinite(lambda_pre))
            throw std::invalid_argument("lambda_pre must be finite and >= 0, got " +
                                        std::to_string(lambda_pre));
        if (!(lambda_post >= 0.0) || !std::isfinite(lambda_post))
            throw std::invalid_argument("lambda_post must be finite and >= 0, got " +
                                        std::to_string(lambda_post));
        if (!(beta > 0.0) || (std::isinf(beta) && beta < 0.0))
            throw std::invalid_argument("beta must be > 0 or infinite, got " +
                                        std::to_string(beta));
        if (!std::isfinite(phi))
            throw std::invalid_argument("phi must be finite");
        if (!(coupling > 0.0) || !std::isfinite(coupling))
            throw std::invalid_argument("coupling must be finite and > 0");
        QuenchProtocol p = *this;
        p.phi = normalize_phase(phi);
        return p;
    }
};

/// Momenta k = (2n-1)pi/N, n = 1..N/2, of an even chain with antiperiodic
/// fermion boundary conditions.
struct ModeGrid {
    int n_sites = 0;
    std::vector<double> momenta;
};

inline ModeGrid mode_grid(int n_sites) {
    if (n_sites < 2 || n_sites % 2 != 0)
        throw std::invalid_argument("n_sites must be an even integer >= 2, got " +
                                    std::to_string(n_sites));
    ModeGrid grid;
    grid.n_sites = n_sites;
    grid.momenta.reserve(static_cast<std::size_t>(n_sites / 2));
    for (int n = 1; n <= n_sites / 2; ++n)
        grid.momenta.push_back(static_cast<double>(2 * n - 1) * pi / n_sites);
    return grid;
}

/// Single-mode energy eps_k(lambda) = sqrt((lambda - cos k)^2 + sin^2 k),
/// scaled by the coupling.
inline double dispersion(double k, double lambda, double coupling = 1.0) {
    return coupling * std::hypot(lambda - std::cos(k), std::sin(k));
}

namespace detail {

// (lambda - eps - cos k) + i sin k, with the real part formed without
// cancellation when lambda - cos k > 0. The zone edges are treated as exact
// (sin k = 0) rather than through the rounded sin(pi).
inline complex angle_numerator(double k, double lambda) {
    const bool edge = k <= 0.0 || k >= pi;
    const double a = lambda - (edge ? (k <= 0.0 ? 1.0 : -1.0) : std::cos(k));
    const double s = edge ? 0.0 : std::sin(k);
    const double e = std::hypot(a, s);
    const double re = a > 0.0 ? -(s * s) / (a + e) : a - e;
    return {re, s};
}

}  // namespace detail

/// Principal-value Bogoliubov angle theta_k(lambda), defined through
/// e^{i theta} proportional to lambda - eps_k(lambda) - e^{-ik}.
///
/// For k in (0, pi) the imaginary part sin k is positive, so theta lies in
/// (0, pi) and is continuous in k. At k = 0 or pi the numerator is real:
/// theta = pi if it is negative, and a zero numerator is a domain error.
inline double bogoliubov_angle(double k, double lambda) {
    const complex num = detail::angle_numerator(k, lambda);
    if (num.imag() == 0.0) {
        if (num.real() > 0.0) return 0.0;
        if (num.real() < 0.0) return pi;
        throw std::domain_error("Bogoliubov angle undefined: vanishing numerator at k=" +
                                std::to_string(k) + ", lambda=" + std::to_string(lambda));
    }
    return std::arg(num);
}

/// Delta theta_k = theta_k(lambda_pre) - theta_k(lambda_post).
///
/// Both angles lie in (0, pi) on the open zone, so the difference lies in
/// (-pi, pi) and needs no further unwrapping to be continuous in k.
inline double delta_theta(double k, const QuenchProtocol& protocol) {
    return bogoliubov_angle(k, protocol.lambda_pre) - bogoliubov_angle(k, protocol.lambda_post);
}

}  // namespace dqpt
