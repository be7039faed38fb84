#pragma once

// Two-level dynamics of a single momentum pair (k, -k): closed-form Loschmidt
// amplitude, an explicit 2x2 matrix-evolution oracle, the boundary partition
// function and the null-work / interference split of the echo.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dqpt/model.hpp"
#include "dqpt/roots.hpp"

namespace dqpt {

/// Thermal factors of one mode at x = beta*eps_pre, evaluated through
/// e^{-x} so that nothing overflows; x = inf is the ground-state limit.
struct ThermalFactors {
    double tanh_x;    ///< tanh(x)
    double sech_x;    ///< 1/cosh(x) = 2/Z_k
    double exp_neg;   ///< e^{-x}
};

inline ThermalFactors thermal_factors(double beta, double eps_pre) {
    if (std::isinf(beta)) {
        if (eps_pre > 0.0) return {1.0, 0.0, 0.0};
        // degenerate level: both states equally populated
        return {0.0, 1.0, 1.0};
    }
    const double x = beta * eps_pre;
    const double e = std::exp(-x);
    const double e2 = e * e;
    return {std::tanh(x), 2.0 * e / (1.0 + e2), e};
}

/// Per-momentum quantities derived from a quench protocol.
///
/// `imbalance` is A_k = cos(2 dtheta) tanh(beta eps) + sin(phi) sin(2 dtheta) / cosh(beta eps),
/// the population of the lower post-quench level minus that of the upper one.
struct ModeCoefficients {
    double k = 0.0;
    double eps_pre = 0.0;
    double eps_post = 0.0;
    double delta_theta = 0.0;
    double imbalance = 0.0;
    double weight_plus = 0.0;   ///< |<eps'_+|psi_k>|^2
    double weight_minus = 0.0;  ///< |<eps'_-|psi_k>|^2
};

inline ModeCoefficients mode_coefficients(const QuenchProtocol& protocol, double k) {
    ModeCoefficients c;
    c.k = k;
    c.eps_pre = dispersion(k, protocol.lambda_pre, protocol.coupling);
    c.eps_post = dispersion(k, protocol.lambda_post, protocol.coupling);
    c.delta_theta = delta_theta(k, protocol);

    const double cd = std::cos(c.delta_theta), sd = std::sin(c.delta_theta);
    const double cos2 = std::cos(2.0 * c.delta_theta), sin2 = std::sin(2.0 * c.delta_theta);
    const double sin_phi = std::sin(protocol.phi);
    const auto th = thermal_factors(protocol.beta, c.eps_pre);
    c.imbalance = cos2 * th.tanh_x + sin_phi * sin2 * th.sech_x;

    // Overlaps with the post-quench eigenstates, rescaled by e^{-x/2}:
    //   <+'|psi> ~ e^{-x} cos d + i e^{i phi} sin d,  <-'|psi> ~ i e^{-x} sin d + e^{i phi} cos d,
    // normalized by 1 + e^{-2x}. Squared moduli of these are nonnegative by
    // construction and sum to one.
    const complex phase = std::polar(1.0, protocol.phi);
    const complex i1{0.0, 1.0};
    const complex amp_plus = th.exp_neg * cd + i1 * phase * sd;
    const complex amp_minus = i1 * th.exp_neg * sd + phase * cd;
    const double norm = 1.0 + th.exp_neg * th.exp_neg;
    c.weight_plus = std::norm(amp_plus) / norm;
    c.weight_minus = std::norm(amp_minus) / norm;
    return c;
}

/// G_k(t) = cos(eps' t) + i sin(eps' t) A_k.
inline complex mode_amplitude(const ModeCoefficients& c, double t) {
    const double w = c.eps_post * t;
    return {std::cos(w), std::sin(w) * c.imbalance};
}

/// |G_k(t)|^2 = cos^2(eps' t) + A_k^2 sin^2(eps' t).
inline double mode_echo(const ModeCoefficients& c, double t) {
    const double w = c.eps_post * t;
    const double co = std::cos(w), si = std::sin(w);
    return co * co + c.imbalance * c.imbalance * si * si;
}

/// <psi_k(0)| H_k(lambda') |psi_k(0)> = -eps' A_k. Time independent, since
/// the state evolves under H_k(lambda') itself.
inline double post_quench_energy(const ModeCoefficients& c) { return -c.eps_post * c.imbalance; }

// ---------------------------------------------------------------------------
// Matrix oracle
// ---------------------------------------------------------------------------

namespace oracle {

using vec2 = std::array<complex, 2>;
using mat2 = std::array<std::array<complex, 2>, 2>;

inline vec2 act(const mat2& m, const vec2& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

inline complex inner(const vec2& a, const vec2& b) {
    return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1];
}

/// H_k(lambda) = J[(lambda - cos k) sigma_z + sin k sigma_y] in the
/// {c+_k c+_-k |0>, |0>} basis.
inline mat2 mode_hamiltonian(double k, double lambda, double coupling = 1.0) {
    const double a = coupling * (lambda - std::cos(k));
    const double s = coupling * std::sin(k);
    return {{{complex{a, 0.0}, complex{0.0, -s}}, {complex{0.0, s}, complex{-a, 0.0}}}};
}

/// Eigenvectors of H_k in the form (cos a, i sin a) for +eps and
/// (i sin a, cos a) for -eps, built from the matrix entries directly.
inline std::pair<vec2, vec2> eigenvectors(const mat2& h) {
    const double a = h[0][0].real();
    const double s = h[1][0].imag();
    const double e = std::hypot(a, s);
    double u, v;  // cos a, sin a (unnormalized), both >= 0
    if (a >= 0.0) {
        u = e + a;
        v = s;
    } else {
        u = s;
        v = e - a;
    }
    const double n = std::hypot(u, v);
    if (n == 0.0) {
        // H = 0: any basis diagonalizes it
        return {vec2{complex{1.0, 0.0}, complex{}}, vec2{complex{}, complex{1.0, 0.0}}};
    }
    u /= n;
    v /= n;
    return {vec2{complex{u, 0.0}, complex{0.0, v}}, vec2{complex{0.0, v}, complex{u, 0.0}}};
}

/// e^{-i H t} = cos(eps t) I - i sin(eps t) H / eps.
inline mat2 evolution(const mat2& h, double t) {
    const double a = h[0][0].real();
    const double s = h[1][0].imag();
    const double e = std::hypot(a, s);
    if (e == 0.0) return {{{complex{1.0, 0.0}, complex{}}, {complex{}, complex{1.0, 0.0}}}};
    const double c = std::cos(e * t), sn = std::sin(e * t) / e;
    const complex mi{0.0, -1.0};
    mat2 u{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) u[i][j] = (i == j ? complex{c, 0.0} : complex{}) + mi * sn * h[i][j];
    return u;
}

/// sqrt(e^{-beta H}/Z) (|+> + e^{i phi} |->), with the square-root density
/// operator assembled from spectral projectors (I +- H/eps)/2 and scaled by
/// e^{-beta eps/2} to keep it finite at any beta.
inline vec2 initial_state(const QuenchProtocol& p, double k) {
    const mat2 h = mode_hamiltonian(k, p.lambda_pre, p.coupling);
    const auto [plus, minus] = eigenvectors(h);
    const double a = h[0][0].real(), s = h[1][0].imag();
    const double e = std::hypot(a, s);

    double lower = 1.0, upper = 0.0, norm = 1.0;
    if (std::isinf(p.beta)) {
        if (e == 0.0) {
            upper = 1.0;
            norm = 2.0;
        }
    } else {
        upper = std::exp(-p.beta * e);
        norm = 1.0 + upper * upper;
    }
    const double scale = 1.0 / std::sqrt(norm);
    mat2 root{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const complex id = i == j ? complex{1.0, 0.0} : complex{};
            const complex hn = e > 0.0 ? h[i][j] / e : complex{};
            root[i][j] = scale * (upper * 0.5 * (id + hn) + lower * 0.5 * (id - hn));
        }
    const complex phase = std::polar(1.0, p.phi);
    const vec2 sup{plus[0] + phase * minus[0], plus[1] + phase * minus[1]};
    return act(root, sup);
}

/// Matrix elements <s|U(t)|s'> of U = e^{-i H_k(lambda') t} between the
/// pre-quench eigenstates, indexed [0] = +, [1] = -.
inline mat2 pre_quench_elements(const QuenchProtocol& p, double k, double t) {
    const auto [plus, minus] = eigenvectors(mode_hamiltonian(k, p.lambda_pre, p.coupling));
    const mat2 u = evolution(mode_hamiltonian(k, p.lambda_post, p.coupling), t);
    const vec2 basis[2] = {plus, minus};
    mat2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r[i][j] = inner(basis[i], act(u, basis[j]));
    return r;
}

/// <psi_k(0)| H_k(lambda') |psi_k(0)>.
inline double post_quench_energy(const QuenchProtocol& p, double k) {
    const vec2 psi = initial_state(p, k);
    return inner(psi, act(mode_hamiltonian(k, p.lambda_post, p.coupling), psi)).real();
}

/// Thermal populations (e^{-beta eps}/Z, e^{beta eps}/Z) of the pre-quench
/// levels (+, -).
inline std::pair<double, double> populations(const QuenchProtocol& p, double k) {
    const double e = dispersion(k, p.lambda_pre, p.coupling);
    if (std::isinf(p.beta)) return e > 0.0 ? std::pair{0.0, 1.0} : std::pair{0.5, 0.5};
    const double x = std::exp(-2.0 * p.beta * e);
    return {x / (1.0 + x), 1.0 / (1.0 + x)};
}

}  // namespace oracle

/// Return amplitude <psi_k(0)| e^{-i H_k(lambda') t} |psi_k(0)> evaluated by
/// explicit 2x2 evolution of the coherent Gibbs mode state.
inline complex mode_amplitude_oracle(const QuenchProtocol& protocol, double k, double t) {
    const oracle::vec2 psi = oracle::initial_state(protocol, k);
    const oracle::mat2 u = oracle::evolution(
        oracle::mode_hamiltonian(k, protocol.lambda_post, protocol.coupling), t);
    return oracle::inner(psi, oracle::act(u, psi));
}

/// Per-mode boundary partition factor <psi_k| e^{-z H_k(lambda')} |psi_k>.
/// Throws std::range_error when |Re z| eps' exceeds 700.
inline complex boundary_partition(const ModeCoefficients& c, complex z) {
    if (std::abs(z.real()) * c.eps_post > 700.0)
        throw std::range_error("boundary_partition: |Re z| * eps' = " +
                               std::to_string(std::abs(z.real()) * c.eps_post) + " overflows");
    const complex x = z * c.eps_post;
    return std::exp(-x) * c.weight_plus + std::exp(x) * c.weight_minus;
}

struct EchoDecomposition {
    double echo = 0.0;              ///< |G_k(t)|^2
    double null_work_prob = 0.0;    ///< sum_s p_s |<s|U|s>|^2
    double interference = 0.0;      ///< echo - null_work_prob
};

/// Splits the mode echo into the null-work probability over the thermal
/// populations of the pre-quench levels and the remaining interference.
inline EchoDecomposition null_work_decomposition(const QuenchProtocol& protocol, double k, double t) {
    const oracle::mat2 u = oracle::pre_quench_elements(protocol, k, t);
    const auto [p_plus, p_minus] = oracle::populations(protocol, k);
    EchoDecomposition d;
    d.null_work_prob = p_plus * std::norm(u[0][0]) + p_minus * std::norm(u[1][1]);
    d.echo = std::norm(mode_amplitude_oracle(protocol, k, t));
    d.interference = d.echo - d.null_work_prob;
    return d;
}

/// Scans for momentum roots stay this far inside the open zone; the
/// Bogoliubov angle is not defined at k = 0 and k = pi for every field.
inline constexpr double zone_margin = 1e-10;

/// Momenta in (0, pi) where the population imbalance A_k changes sign.
inline std::vector<Root> imbalance_roots(const QuenchProtocol& protocol, const ScanOptions& opt = {}) {
    return scan_roots([&](double k) { return mode_coefficients(protocol, k).imbalance; },
                      zone_margin, pi - zone_margin, opt);
}

}  // namespace dqpt
