#pragma once

// Independent reference computations shared by the test binaries. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "spinphase/random.hpp"
#include "spinphase/spin.hpp"

namespace oracle {

using spinphase::Complex;
using spinphase::Operator;

inline constexpr double kPi = std::numbers::pi;

/// e^{-i phi Jz} e^{-i theta Jy} |J>, built from general-purpose expm.
inline Eigen::VectorXcd coherent_state_expm(const spinphase::SpinOperators& ops, double theta,
                                            double phi) {
    const Eigen::Index d = ops.jz.rows();
    Eigen::VectorXcd top = Eigen::VectorXcd::Zero(d);
    top(0) = 1.0;
    const Operator ry = (Complex(0.0, -theta) * ops.jy).exp();
    const Operator rz = (Complex(0.0, -phi) * ops.jz).exp();
    return rz * ry * top;
}

/// Matrix logarithm through the generic Schur-Parlett route.
inline Operator logm(const Operator& a) { return a.log(); }

/// -Tr(rho ln rho) via generic logm; rho must have full rank.
inline double entropy_logm(const Operator& rho) {
    return -(rho * logm(rho)).trace().real();
}

/// Uniform point in the Bloch ball with |tau| <= r_max.
inline Eigen::Vector3d random_bloch(spinphase::Rng& rng, double r_max) {
    const double r = r_max * std::cbrt(rng.uniform());
    const double z = rng.uniform(-1.0, 1.0);
    const double a = rng.uniform(0.0, 2.0 * kPi);
    const double s = std::sqrt(1.0 - z * z);
    return {r * s * std::cos(a), r * s * std::sin(a), r * z};
}

/// 1-D composite Simpson rule, n even.
template <class F>
double simpson(F&& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Qubit quadrature oracle: explicit double integral over (theta, phi) with the
/// Husimi function written in closed form, Q = (1 + n.tau)/2.
template <class F>
double sphere_simpson(F&& f, int n_theta, int n_phi) {
    return simpson(
        [&](double th) {
            return std::sin(th) *
                   simpson([&](double ph) { return f(th, ph); }, 0.0, 2.0 * kPi, n_phi);
        },
        0.0, kPi, n_theta);
}

/// atanh(x) by its defining logarithm.
inline double atanh_log(double x) { return 0.5 * std::log((1.0 + x) / (1.0 - x)); }

/// Qubit eigenvalue-based entropy, (1 +- tau)/2.
inline double qubit_entropy(double tau) {
    double s = 0.0;
    for (double p : {0.5 * (1.0 + tau), 0.5 * (1.0 - tau)})
        if (p > 0.0) s -= p * std::log(p);
    return s;
}

} // namespace oracle
