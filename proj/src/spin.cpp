#include "spinphase/spin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spinphase/random.hpp"

namespace spinphase {

namespace {

constexpr Complex kI{0.0, 1.0};

// Eigenvalues with roundoff-level negatives in [-1e-10, 0) clamped to zero.
RealVector clamped_spectrum(const Operator& a) {
    Eigen::SelfAdjointEigenSolver<Operator> es(a, Eigen::EigenvaluesOnly);
    RealVector ev = es.eigenvalues();
    for (auto& v : ev) {
        if (v < 0.0 && v >= detail::kEigenFloor) v = 0.0;
    }
    return ev;
}

RealVector real_diagonal(const Operator& a) { return a.diagonal().real(); }

} // namespace

SpinJ::SpinJ(int two_j) : two_j_(two_j) {
    if (two_j < 1) throw RangeError("spin: two_j must be >= 1, got " + std::to_string(two_j));
}

SpinJ spin_for_dim(Eigen::Index dim) {
    if (dim < 2) throw DimensionError("spin: dimension must be >= 2");
    return SpinJ(static_cast<int>(dim - 1));
}

DensityMatrix::DensityMatrix(Operator entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() < 2)
        throw DimensionError("density matrix must be square with dim >= 2");
    const double asym = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (asym > detail::kHermiticityTol)
        throw InvalidStateError("density matrix is not Hermitian (deviation " +
                                std::to_string(asym) + ")");
    const Complex tr = m_.trace();
    if (std::abs(tr - Complex{1.0, 0.0}) > detail::kTraceTol)
        throw InvalidStateError("density matrix trace is " + std::to_string(tr.real()) +
                                ", expected 1");
    const double lo = eigenvalues().minCoeff();
    if (lo < detail::kEigenFloor)
        throw InvalidStateError("density matrix has negative eigenvalue " + std::to_string(lo));
}

DensityMatrix DensityMatrix::unchecked(Operator entries) {
    return DensityMatrix(std::move(entries), NoCheck{});
}

RealVector DensityMatrix::eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Operator> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

DensityMatrix maximally_mixed(int dim) {
    return DensityMatrix(Operator::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix pure_state(const Eigen::VectorXcd& psi) {
    const Eigen::VectorXcd v = psi.normalized();
    return DensityMatrix(detail::hermitian_part(v * v.adjoint()));
}

BlochVector::BlochVector(double x, double y, double z) : BlochVector(Eigen::Vector3d(x, y, z)) {}

BlochVector::BlochVector(const Eigen::Vector3d& tau) : tau_(tau) {
    if (tau_.norm() > 1.0 + 1e-12)
        throw BlochNormError("Bloch vector norm " + std::to_string(tau_.norm()) + " exceeds 1");
}

SpinOperators make_spin_operators(SpinJ j) {
    const int d = j.dim();
    const double jj = j.j();
    SpinOperators ops;
    ops.jz = Operator::Zero(d, d);
    ops.jplus = Operator::Zero(d, d);
    for (int k = 0; k < d; ++k) ops.jz(k, k) = j.m(k);
    // J+ |m> = sqrt(J(J+1) - m(m+1)) |m+1>, and |m+1> sits one index up.
    for (int k = 1; k < d; ++k) {
        const double m = j.m(k);
        ops.jplus(k - 1, k) = std::sqrt(jj * (jj + 1.0) - m * (m + 1.0));
    }
    ops.jminus = ops.jplus.adjoint();
    ops.jx = 0.5 * (ops.jplus + ops.jminus);
    ops.jy = (ops.jplus - ops.jminus) / (2.0 * kI);
    return ops;
}

DensityMatrix bloch_to_rho(const BlochVector& tau) {
    Operator r(2, 2);
    r(0, 0) = 0.5 * (1.0 + tau.z());
    r(1, 1) = 0.5 * (1.0 - tau.z());
    r(0, 1) = 0.5 * Complex(tau.x(), -tau.y());
    r(1, 0) = 0.5 * Complex(tau.x(), tau.y());
    return DensityMatrix(std::move(r));
}

BlochVector rho_to_bloch(const DensityMatrix& rho) {
    detail::require_dim(rho, 2, "rho_to_bloch");
    const Complex c = rho(1, 0);
    const Eigen::Vector3d tau(2.0 * c.real(), 2.0 * c.imag(), (rho(0, 0) - rho(1, 1)).real());
    // Unchecked states from the integrator may overshoot |tau| = 1 by roundoff.
    const double n = tau.norm();
    return BlochVector(n > 1.0 ? Eigen::Vector3d(tau / n) : tau);
}

double l1_coherence(const DensityMatrix& rho) {
    const Operator& m = rho.matrix();
    double sum = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (r != c) sum += std::abs(m(r, c));
    return sum;
}

double figure_coherence_qubit(const BlochVector& tau) { return 2.0 * tau.transverse_sq(); }

double shannon_entropy(const RealVector& p) {
    double s = 0.0;
    for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

double von_neumann_entropy(const DensityMatrix& rho) {
    return shannon_entropy(clamped_spectrum(rho.matrix()));
}

double quantum_relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) throw DimensionError("relative entropy: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Operator> es(sigma.matrix());
    const RealVector& s = es.eigenvalues();
    const Operator& v = es.eigenvectors();
    // Tr rho ln sigma = sum_j <v_j|rho|v_j> ln s_j
    double cross = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        const double w = (v.col(k).adjoint() * rho.matrix() * v.col(k))(0, 0).real();
        if (s(k) <= 1e-14) {
            if (w > 1e-12)
                throw SupportError("relative entropy: support of rho exceeds support of sigma");
            continue;
        }
        cross += w * std::log(s(k));
    }
    return -von_neumann_entropy(rho) - cross;
}

double relative_entropy_of_coherence(const DensityMatrix& rho) {
    return shannon_entropy(real_diagonal(rho.matrix())) - von_neumann_entropy(rho);
}

double log_partition_function(const Operator& h, double beta) {
    Eigen::SelfAdjointEigenSolver<Operator> es(h, Eigen::EigenvaluesOnly);
    const RealVector& e = es.eigenvalues();
    const double e0 = e.minCoeff();
    return -beta * e0 + std::log((-beta * (e.array() - e0)).exp().sum());
}

DensityMatrix gibbs_state(const Operator& h, double beta) {
    if (!std::isfinite(beta) || beta < 0.0)
        throw RangeError("gibbs_state: beta must be finite and nonnegative");
    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const RealVector& e = es.eigenvalues();
    RealVector w = (-beta * (e.array() - e.minCoeff())).exp();
    w /= w.sum();
    const Operator& v = es.eigenvectors();
    Operator rho = v * w.cast<Complex>().asDiagonal() * v.adjoint();
    rho = detail::hermitian_part(rho);
    rho /= rho.trace().real();
    return DensityMatrix(std::move(rho));
}

FreeEnergySplit nonequilibrium_free_energy(const DensityMatrix& rho, const Operator& h,
                                           double temperature) {
    if (!(temperature > 0.0)) throw RangeError("free energy: temperature must be > 0");
    if (h.rows() != rho.dim()) throw DimensionError("free energy: Hamiltonian dimension mismatch");
    const double beta = 1.0 / temperature;

    Eigen::SelfAdjointEigenSolver<Operator> es(h);
    const RealVector& e = es.eigenvalues();
    const Operator& v = es.eigenvectors();
    const RealVector p = (v.adjoint() * rho.matrix() * v).diagonal().real();

    const double log_z = log_partition_function(h, beta);
    const RealVector p_eq = (-beta * e.array() - log_z).exp();

    double kl = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p(k) > 0.0) kl += p(k) * std::log(p(k) / p_eq(k));

    const double s_rho = von_neumann_entropy(rho);

    FreeEnergySplit out;
    out.f_eq = -temperature * log_z;
    out.classical_excess = temperature * kl;
    out.quantum_excess = temperature * (shannon_entropy(p) - s_rho);
    out.total = (h * rho.matrix()).trace().real() - temperature * s_rho;
    return out;
}

DensityMatrix random_state_with_coherence(int dim, double target_c, std::uint64_t seed) {
    if (dim < 2) throw DimensionError("random state: dim must be >= 2");
    if (target_c < 0.0) throw RangeError("random state: target coherence must be >= 0");
    // A pure state with equal-magnitude amplitudes attains the maximum, dim - 1.
    if (target_c > dim - 1.0 + 1e-12)
        throw UnreachableCoherence("random state: coherence " + std::to_string(target_c) +
                                   " exceeds the maximum " + std::to_string(dim - 1));
    const bool real_offdiag = dim == 3;
    constexpr int kMaxAttempts = 20000;

    Rng rng(seed);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        RealVector p(dim);
        for (auto& v : p) v = rng.exponential();
        p /= p.sum();

        Operator dir = Operator::Zero(dim, dim);
        double l1 = 0.0;
        for (int r = 0; r < dim; ++r) {
            for (int c = r + 1; c < dim; ++c) {
                const Complex z = real_offdiag ? Complex(rng.normal(), 0.0)
                                               : Complex(rng.normal(), rng.normal());
                dir(r, c) = z;
                dir(c, r) = std::conj(z);
                l1 += 2.0 * std::abs(z);
            }
        }
        if (l1 == 0.0) continue;

        Operator rho = p.cast<Complex>().asDiagonal();
        rho += (target_c / l1) * dir;
        Eigen::SelfAdjointEigenSolver<Operator> es(rho, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() >= 0.0) return DensityMatrix(std::move(rho));
    }
    throw UnreachableCoherence("random state: no positive state with coherence " +
                               std::to_string(target_c) + " found after " +
                               std::to_string(kMaxAttempts) + " draws");
}

DensityMatrix random_density_matrix(int dim, std::uint64_t seed) {
    Rng rng(seed);
    Operator g(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) g(r, c) = Complex(rng.normal(), rng.normal());
    Operator rho = detail::hermitian_part(g * g.adjoint());
    rho /= rho.trace().real();
    return DensityMatrix(std::move(rho));
}

namespace detail {

Operator hermitian_part(const Operator& a) { return 0.5 * (a + a.adjoint()); }

Operator log_hermitian(const Operator& a) {
    Eigen::SelfAdjointEigenSolver<Operator> es(a);
    const RealVector& ev = es.eigenvalues();
    if (ev.minCoeff() <= 0.0) throw SupportError("matrix logarithm of a singular operator");
    const Operator& v = es.eigenvectors();
    return v * ev.array().log().matrix().cast<Complex>().asDiagonal() * v.adjoint();
}

void require_dim(const DensityMatrix& rho, Eigen::Index dim, const char* what) {
    if (rho.dim() != dim)
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(dim) +
                             ", got " + std::to_string(rho.dim()));
}

} // namespace detail

} // namespace spinphase
