#pragma once

// Markovian open dynamics: Liouvillians, dissipators, a fixed-step RK4
// integrator, analytic qubit propagators, and the population (Pauli) sector.

#include <optional>
#include <variant>
#include <vector>

#include "spinphase/spin.hpp"

namespace spinphase {

/// Thermal bath seen by an amplitude-damping channel.
///
/// Stored in both parameterizations: (gamma, nbar) and the bath-induced
/// magnetisation form (gamma_bar, tau_bar_z) with gamma_bar = gamma (2 nbar + 1)
/// and tau_bar_z = -1 / (2 nbar + 1). The second form stays finite at infinite
/// temperature (tau_bar_z = 0, nbar = inf, gamma = 0 at fixed gamma_bar).
struct BathParams {
    double gamma = 0.0;
    double nbar = 0.0;
    double tau_bar_z = -1.0;
    double gamma_bar = 0.0;

    static BathParams from_occupation(double gamma, double nbar);
    static BathParams from_magnetisation(double gamma_bar, double tau_bar_z);

    /// Gamma (nbar + 1), the rate attached to J_-.
    double loss_rate() const { return 0.5 * gamma_bar * (1.0 - tau_bar_z); }
    /// Gamma nbar, the rate attached to J_+.
    double gain_rate() const { return 0.5 * gamma_bar * (1.0 + tau_bar_z); }
};

struct Unitary {};

struct Dephasing {
    double lambda = 0.0;
};

struct AmplitudeDamping {
    BathParams bath;
};

/// One Lindblad-Davies channel: L^- = lowering, L^+ = lowering^dagger.
struct LindbladPair {
    Operator lowering;
    double gamma_minus = 0.0;
    double gamma_plus = 0.0;
    double omega = 0.0;

    /// Fixes gamma_plus = gamma_minus e^{-beta omega}.
    static LindbladPair with_detailed_balance(Operator lowering, double gamma_minus, double omega,
                                              double beta);
};

struct Davies {
    std::vector<LindbladPair> pairs;
    /// When set, every pair must satisfy gamma_plus / gamma_minus = e^{-beta omega}.
    std::optional<double> beta;
};

using Dissipator = std::variant<Unitary, Dephasing, AmplitudeDamping, Davies>;

/// Hamiltonian plus dissipator. Validated at construction.
class ChannelSpec {
public:
    ChannelSpec(Operator hamiltonian, Dissipator dissipator);

    static ChannelSpec unitary(Operator hamiltonian);
    static ChannelSpec dephasing(SpinJ j, double lambda);
    static ChannelSpec amplitude_damping(SpinJ j, const BathParams& bath);

    const Operator& hamiltonian() const { return h_; }
    const Dissipator& dissipator() const { return d_; }
    SpinJ spin() const { return spin_; }
    Eigen::Index dim() const { return h_.rows(); }
    const SpinOperators& ops() const { return ops_; }

    ChannelSpec with_hamiltonian(Operator hamiltonian) const;

private:
    Operator h_;
    Dissipator d_;
    SpinJ spin_;
    SpinOperators ops_;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<DensityMatrix> states;
    Warnings warnings;
};

/// Transition rates of the population sector. w(n, k) is the rate k -> n;
/// the diagonal is unused and kept at zero.
struct PauliRates {
    Eigen::MatrixXd w;
};

/// -i[H, rho] + D(rho). The result is Hermitian and traceless.
Operator apply_liouvillian(const ChannelSpec& spec, const Operator& rho);
Operator apply_liouvillian(const ChannelSpec& spec, const DensityMatrix& rho);

/// Only the dissipative part D(rho).
Operator apply_dissipator(const ChannelSpec& spec, const Operator& rho);

/// -(lambda/2) [J_z, [J_z, rho]]
Operator dephasing_dissipator(double lambda, const SpinOperators& ops, const Operator& rho);

/// Gamma (nbar+1) D[J_-] + Gamma nbar D[J_+].
Operator amplitude_damping_dissipator(double gamma, double nbar, const SpinOperators& ops,
                                      const Operator& rho);
Operator amplitude_damping_dissipator(const BathParams& bath, const SpinOperators& ops,
                                      const Operator& rho);

Operator davies_dissipator(const Davies& davies, const Operator& rho);

/// The amplitude-damping channel written as a single Davies pair (J_-, J_+).
Davies davies_from_amplitude_damping(SpinJ j, const BathParams& bath, double omega = 1.0);

/// Stationary state of the amplitude-damping dissipator: diagonal, with
/// P(m) / P(m-1) = nbar / (nbar + 1).
DensityMatrix amplitude_damping_steady_state(SpinJ j, const BathParams& bath);

/// Fixed-step classical RK4 for rho' = L[rho] on [0, t_max]. Every step is
/// re-Hermitized and renormalized. States are stored every `stride` steps
/// (the final state is always stored). A Positivity warning is recorded if the
/// minimum eigenvalue ever drops below -1e-8.
Trajectory evolve(const ChannelSpec& spec, const DensityMatrix& rho0, double t_max, int n_steps,
                  int stride = 1);

BlochVector qubit_dephasing_bloch(const BlochVector& tau0, double lambda, double t);

/// tau_xy decays at gamma_bar / 2, tau_z relaxes to tau_bar_z at gamma_bar.
BlochVector qubit_damping_bloch(const BlochVector& tau0, const BathParams& bath, double t);
BlochVector qubit_damping_bloch(const BlochVector& tau0, double gamma, double nbar, double t);

/// W(n|k) = sum_j Gamma_j^- |<n|L_j^-|k>|^2 + Gamma_j^+ |<n|L_j^+|k>|^2.
/// Requires a Hamiltonian diagonal in the J_z basis (BasisError otherwise).
/// When the channel declares beta, detailed balance is checked against the
/// Hamiltonian's diagonal (DetailedBalanceError).
PauliRates pauli_rates_from_davies(const ChannelSpec& spec);

/// Schnakenberg form: sum over pairs n<k of (a - b) ln(a / b) with
/// a = W(n|k) P_k, b = W(k|n) P_n. Nonnegative termwise.
double classical_ep_rate(const PauliRates& rates, const RealVector& p);

/// Upsilon(t) = -dC/dt for the relative entropy of coherence along a trajectory.
/// Three-point differences: central inside, one-sided at the ends.
std::vector<double> coherence_ep_rate(const Trajectory& trajectory);

/// Derivative of samples y(t) by three-point Lagrange differences
/// (central inside, second-order one-sided at the ends).
std::vector<double> three_point_derivative(const std::vector<double>& t,
                                           const std::vector<double>& y);

} // namespace spinphase
