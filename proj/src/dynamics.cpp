#include "spinphase/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace spinphase {

namespace {

constexpr Complex kI{0.0, 1.0};

// gamma (L rho L^dag - 1/2 {L^dag L, rho})
Operator lindblad_term(double gamma, const Operator& l, const Operator& rho) {
    if (gamma == 0.0) return Operator::Zero(rho.rows(), rho.cols());
    const Operator ld = l.adjoint();
    const Operator ldl = ld * l;
    return gamma * (l * rho * ld - 0.5 * (ldl * rho + rho * ldl));
}

void require_nonnegative(double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidChannelError(std::string(what) + " must be finite and >= 0");
}

void validate_davies(const Davies& d, Eigen::Index dim) {
    for (const auto& p : d.pairs) {
        if (p.lowering.rows() != dim || p.lowering.cols() != dim)
            throw DimensionError("Davies channel: Lindblad operator dimension mismatch");
        require_nonnegative(p.gamma_minus, "Davies gamma_minus");
        require_nonnegative(p.gamma_plus, "Davies gamma_plus");
        if (!d.beta) continue;
        const double expected = std::exp(-*d.beta * p.omega);
        const bool ok = p.gamma_minus > 0.0
                            ? std::abs(p.gamma_plus / p.gamma_minus - expected) <= 1e-10
                            : p.gamma_plus == 0.0;
        if (!ok)
            throw DetailedBalanceError("Davies channel: gamma+/gamma- = " +
                                       std::to_string(p.gamma_plus / p.gamma_minus) +
                                       " but e^{-beta omega} = " + std::to_string(expected));
    }
}

// Equivalent (lowering, gamma-, gamma+) list for any dissipator kind.
std::vector<LindbladPair> as_pairs(const ChannelSpec& spec) {
    return std::visit(
        [&](const auto& d) -> std::vector<LindbladPair> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Unitary>) {
                return {};
            } else if constexpr (std::is_same_v<T, Dephasing>) {
                // Hermitian L = J_z: D = lambda (J_z rho J_z - 1/2 {J_z^2, rho})
                return {LindbladPair{spec.ops().jz, d.lambda, 0.0, 0.0}};
            } else if constexpr (std::is_same_v<T, AmplitudeDamping>) {
                return {LindbladPair{spec.ops().jminus, d.bath.loss_rate(), d.bath.gain_rate(), 0.0}};
            } else {
                return d.pairs;
            }
        },
        spec.dissipator());
}

} // namespace

BathParams BathParams::from_occupation(double gamma, double nbar) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw RangeError("bath: gamma must be >= 0");
    if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw RangeError("bath: nbar must be finite and >= 0");
    BathParams b;
    b.gamma = gamma;
    b.nbar = nbar;
    b.tau_bar_z = -1.0 / (2.0 * nbar + 1.0);
    b.gamma_bar = gamma * (2.0 * nbar + 1.0);
    return b;
}

BathParams BathParams::from_magnetisation(double gamma_bar, double tau_bar_z) {
    if (!(gamma_bar >= 0.0) || !std::isfinite(gamma_bar))
        throw RangeError("bath: gamma_bar must be >= 0");
    if (!(tau_bar_z >= -1.0 && tau_bar_z <= 0.0))
        throw RangeError("bath: tau_bar_z must lie in [-1, 0]");
    BathParams b;
    b.gamma_bar = gamma_bar;
    b.tau_bar_z = tau_bar_z;
    b.gamma = -gamma_bar * tau_bar_z;
    b.nbar = tau_bar_z == 0.0 ? std::numeric_limits<double>::infinity()
                              : 0.5 * (-1.0 / tau_bar_z - 1.0);
    return b;
}

LindbladPair LindbladPair::with_detailed_balance(Operator lowering, double gamma_minus,
                                                 double omega, double beta) {
    return LindbladPair{std::move(lowering), gamma_minus, gamma_minus * std::exp(-beta * omega),
                        omega};
}

ChannelSpec::ChannelSpec(Operator hamiltonian, Dissipator dissipator)
    : h_(std::move(hamiltonian)), d_(std::move(dissipator)), spin_(spin_for_dim(h_.rows())),
      ops_(make_spin_operators(spin_)) {
    if (h_.rows() != h_.cols()) throw DimensionError("channel: Hamiltonian must be square");
    const double scale = std::max(1.0, h_.cwiseAbs().maxCoeff());
    if ((h_ - h_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InvalidChannelError("channel: Hamiltonian is not Hermitian");
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Dephasing>) {
                require_nonnegative(d.lambda, "dephasing rate");
            } else if constexpr (std::is_same_v<T, AmplitudeDamping>) {
                require_nonnegative(d.bath.gamma_bar, "damping rate");
                if (!(d.bath.tau_bar_z >= -1.0 && d.bath.tau_bar_z <= 0.0))
                    throw InvalidChannelError("damping: tau_bar_z must lie in [-1, 0]");
            } else if constexpr (std::is_same_v<T, Davies>) {
                validate_davies(d, h_.rows());
            }
        },
        d_);
}

ChannelSpec ChannelSpec::unitary(Operator hamiltonian) {
    return ChannelSpec(std::move(hamiltonian), Unitary{});
}

ChannelSpec ChannelSpec::dephasing(SpinJ j, double lambda) {
    return ChannelSpec(Operator::Zero(j.dim(), j.dim()), Dephasing{lambda});
}

ChannelSpec ChannelSpec::amplitude_damping(SpinJ j, const BathParams& bath) {
    return ChannelSpec(Operator::Zero(j.dim(), j.dim()), AmplitudeDamping{bath});
}

ChannelSpec ChannelSpec::with_hamiltonian(Operator hamiltonian) const {
    return ChannelSpec(std::move(hamiltonian), d_);
}

Operator dephasing_dissipator(double lambda, const SpinOperators& ops, const Operator& rho) {
    // Entry (k, l) picks up -(lambda/2)(m_k - m_l)^2.
    const Eigen::Index d = rho.rows();
    Operator out(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            const double dm = (ops.jz(r, r) - ops.jz(c, c)).real();
            out(r, c) = -0.5 * lambda * dm * dm * rho(r, c);
        }
    }
    return out;
}

Operator amplitude_damping_dissipator(const BathParams& bath, const SpinOperators& ops,
                                      const Operator& rho) {
    return lindblad_term(bath.loss_rate(), ops.jminus, rho) +
           lindblad_term(bath.gain_rate(), ops.jplus, rho);
}

Operator amplitude_damping_dissipator(double gamma, double nbar, const SpinOperators& ops,
                                      const Operator& rho) {
    return lindblad_term(gamma * (nbar + 1.0), ops.jminus, rho) +
           lindblad_term(gamma * nbar, ops.jplus, rho);
}

Operator davies_dissipator(const Davies& davies, const Operator& rho) {
    Operator out = Operator::Zero(rho.rows(), rho.cols());
    for (const auto& p : davies.pairs) {
        if (p.lowering.rows() != rho.rows()) throw DimensionError("Davies: dimension mismatch");
        out += lindblad_term(p.gamma_minus, p.lowering, rho);
        out += lindblad_term(p.gamma_plus, p.lowering.adjoint(), rho);
    }
    return out;
}

Operator apply_dissipator(const ChannelSpec& spec, const Operator& rho) {
    if (rho.rows() != spec.dim() || rho.cols() != spec.dim())
        throw DimensionError("liouvillian: state dimension " + std::to_string(rho.rows()) +
                             " does not match channel dimension " + std::to_string(spec.dim()));
    return std::visit(
        [&](const auto& d) -> Operator {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Unitary>) {
                return Operator::Zero(rho.rows(), rho.cols());
            } else if constexpr (std::is_same_v<T, Dephasing>) {
                return dephasing_dissipator(d.lambda, spec.ops(), rho);
            } else if constexpr (std::is_same_v<T, AmplitudeDamping>) {
                return amplitude_damping_dissipator(d.bath, spec.ops(), rho);
            } else {
                return davies_dissipator(d, rho);
            }
        },
        spec.dissipator());
}

Operator apply_liouvillian(const ChannelSpec& spec, const Operator& rho) {
    Operator out = apply_dissipator(spec, rho);
    const Operator& h = spec.hamiltonian();
    out += -kI * (h * rho - rho * h);
    return out;
}

Operator apply_liouvillian(const ChannelSpec& spec, const DensityMatrix& rho) {
    return apply_liouvillian(spec, rho.matrix());
}

Davies davies_from_amplitude_damping(SpinJ j, const BathParams& bath, double omega) {
    const SpinOperators ops = make_spin_operators(j);
    return Davies{{LindbladPair{ops.jminus, bath.loss_rate(), bath.gain_rate(), omega}}, {}};
}

DensityMatrix amplitude_damping_steady_state(SpinJ j, const BathParams& bath) {
    const int d = j.dim();
    // P(k-1) / P(k) = gain / loss, index d-1 being the ground level m = -J.
    const double ratio = (1.0 + bath.tau_bar_z) / (1.0 - bath.tau_bar_z);
    RealVector p(d);
    double w = 1.0;
    for (int k = d - 1; k >= 0; --k) {
        p(k) = w;
        w *= ratio;
    }
    p /= p.sum();
    return DensityMatrix(Operator(p.cast<Complex>().asDiagonal()));
}

Trajectory evolve(const ChannelSpec& spec, const DensityMatrix& rho0, double t_max, int n_steps,
                  int stride) {
    if (n_steps < 1) throw StepCountError("evolve: n_steps must be >= 1");
    if (stride < 1) throw StepCountError("evolve: stride must be >= 1");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw RangeError("evolve: t_max must be > 0");
    if (rho0.dim() != spec.dim()) throw DimensionError("evolve: state/channel dimension mismatch");

    const double dt = t_max / n_steps;
    Trajectory traj;
    traj.times.reserve(n_steps / stride + 2);
    traj.states.reserve(n_steps / stride + 2);
    traj.times.push_back(0.0);
    traj.states.push_back(rho0);

    Operator rho = rho0.matrix();
    double worst = 0.0;
    for (int step = 1; step <= n_steps; ++step) {
        const Operator k1 = apply_liouvillian(spec, rho);
        const Operator k2 = apply_liouvillian(spec, rho + 0.5 * dt * k1);
        const Operator k3 = apply_liouvillian(spec, rho + 0.5 * dt * k2);
        const Operator k4 = apply_liouvillian(spec, rho + dt * k3);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = detail::hermitian_part(rho);
        rho /= rho.trace().real();

        Eigen::SelfAdjointEigenSolver<Operator> es(rho, Eigen::EigenvaluesOnly);
        worst = std::min(worst, es.eigenvalues().minCoeff());

        if (step % stride == 0 || step == n_steps) {
            traj.times.push_back(step * dt);
            traj.states.push_back(DensityMatrix::unchecked(rho));
        }
    }
    if (worst < -1e-8) {
        traj.warnings.push_back({Warning::Kind::Positivity,
                                 "evolve: state lost positivity (min eigenvalue " +
                                     std::to_string(worst) + "); reduce the step size",
                                 worst});
    }
    return traj;
}

BlochVector qubit_dephasing_bloch(const BlochVector& tau0, double lambda, double t) {
    if (t < 0.0) throw RangeError("qubit_dephasing_bloch: t must be >= 0");
    const double decay = std::exp(-0.5 * lambda * t);
    return BlochVector(tau0.x() * decay, tau0.y() * decay, tau0.z());
}

BlochVector qubit_damping_bloch(const BlochVector& tau0, const BathParams& bath, double t) {
    if (t < 0.0) throw RangeError("qubit_damping_bloch: t must be >= 0");
    const double transverse = std::exp(-0.5 * bath.gamma_bar * t);
    const double longitudinal = std::exp(-bath.gamma_bar * t);
    const double z = (tau0.z() - bath.tau_bar_z) * longitudinal + bath.tau_bar_z;
    return BlochVector(tau0.x() * transverse, tau0.y() * transverse, z);
}

BlochVector qubit_damping_bloch(const BlochVector& tau0, double gamma, double nbar, double t) {
    return qubit_damping_bloch(tau0, BathParams::from_occupation(gamma, nbar), t);
}

PauliRates pauli_rates_from_davies(const ChannelSpec& spec) {
    const Operator& h = spec.hamiltonian();
    const Eigen::Index d = spec.dim();
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    Operator offdiag = h;
    offdiag.diagonal().setZero();
    if (offdiag.cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw BasisError("pauli rates: Hamiltonian is not diagonal in the J_z basis");

    PauliRates rates{Eigen::MatrixXd::Zero(d, d)};
    for (const auto& p : as_pairs(spec)) {
        const Operator up = p.lowering.adjoint();
        for (Eigen::Index n = 0; n < d; ++n) {
            for (Eigen::Index k = 0; k < d; ++k) {
                if (n == k) continue;
                rates.w(n, k) += p.gamma_minus * std::norm(p.lowering(n, k)) +
                                 p.gamma_plus * std::norm(up(n, k));
            }
        }
    }

    if (const auto* davies = std::get_if<Davies>(&spec.dissipator()); davies && davies->beta) {
        const double beta = *davies->beta;
        for (Eigen::Index n = 0; n < d; ++n) {
            for (Eigen::Index k = n + 1; k < d; ++k) {
                const double a = rates.w(n, k);
                const double b = rates.w(k, n);
                if (a == 0.0 && b == 0.0) continue;
                const double expected = std::exp(-beta * (h(n, n) - h(k, k)).real());
                if (b == 0.0 || std::abs(a / b - expected) > 1e-10 * std::max(1.0, expected))
                    throw DetailedBalanceError("pauli rates violate detailed balance for levels " +
                                               std::to_string(n) + ", " + std::to_string(k));
            }
        }
    }
    return rates;
}

double classical_ep_rate(const PauliRates& rates, const RealVector& p) {
    const Eigen::Index d = rates.w.rows();
    if (p.size() != d) throw DimensionError("classical_ep_rate: probability vector size mismatch");
    if (std::abs(p.sum() - 1.0) > 1e-10 || p.minCoeff() < -1e-12)
        throw RangeError("classical_ep_rate: p must be a normalized probability vector");
    double sigma = 0.0;
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index k = n + 1; k < d; ++k) {
            const double a = rates.w(n, k) * std::max(p(k), 0.0);
            const double b = rates.w(k, n) * std::max(p(n), 0.0);
            if (a == 0.0 && b == 0.0) continue;
            if (a == 0.0 || b == 0.0)
                throw ZeroRateError("classical_ep_rate: one-way flux between levels " +
                                    std::to_string(n) + " and " + std::to_string(k));
            sigma += (a - b) * std::log(a / b);
        }
    }
    return sigma;
}

std::vector<double> three_point_derivative(const std::vector<double>& t,
                                           const std::vector<double>& y) {
    const std::size_t n = t.size();
    if (n < 3 || y.size() != n) throw StepCountError("derivative: need >= 3 matching samples");
    std::vector<double> dy(n);
    // Derivative at x0 of the quadratic through (x0,y0), (x1,y1), (x2,y2).
    auto lagrange = [](double x, double x0, double y0, double x1, double y1, double x2, double y2) {
        return y0 * ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2)) +
               y1 * ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2)) +
               y2 * ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    };
    dy[0] = lagrange(t[0], t[0], y[0], t[1], y[1], t[2], y[2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        dy[i] = lagrange(t[i], t[i - 1], y[i - 1], t[i], y[i], t[i + 1], y[i + 1]);
    dy[n - 1] = lagrange(t[n - 1], t[n - 3], y[n - 3], t[n - 2], y[n - 2], t[n - 1], y[n - 1]);
    return dy;
}

std::vector<double> coherence_ep_rate(const Trajectory& trajectory) {
    std::vector<double> c;
    c.reserve(trajectory.states.size());
    for (const auto& s : trajectory.states) c.push_back(relative_entropy_of_coherence(s));
    auto dc = three_point_derivative(trajectory.times, c);
    for (auto& v : dc) v = -v;
    return dc;
}

} // namespace spinphase
