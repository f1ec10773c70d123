#pragma once

// Spin algebra, density matrices and the state functionals built on them
// (entropies, coherence measures, non-equilibrium free energy).
//
// Basis convention: level index k = 0, 1, ..., 2J carries J_z eigenvalue
// m = J - k, so index 0 is the maximal-weight state |J>.

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

#include "spinphase/errors.hpp"

namespace spinphase {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Spin quantum number, stored as 2J so half-integers are exact.
class SpinJ {
public:
    explicit SpinJ(int two_j);

    int two_j() const { return two_j_; }
    int dim() const { return two_j_ + 1; }
    double j() const { return 0.5 * two_j_; }
    /// J_z eigenvalue of basis level `level`.
    double m(Eigen::Index level) const { return j() - static_cast<double>(level); }

    friend bool operator==(const SpinJ&, const SpinJ&) = default;

private:
    int two_j_;
};

/// Spin J that acts on a Hilbert space of dimension `dim`.
SpinJ spin_for_dim(Eigen::Index dim);

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
public:
    /// Validates: Hermitian to 1e-12, trace 1 to 1e-12, min eigenvalue >= -1e-10.
    explicit DensityMatrix(Operator entries);

    /// Skips validation. For producers that monitor validity themselves
    /// (the integrator reports positivity through warnings instead).
    static DensityMatrix unchecked(Operator entries);

    Eigen::Index dim() const { return m_.rows(); }
    const Operator& matrix() const { return m_; }
    const Complex& operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

    /// Eigenvalues in ascending order.
    RealVector eigenvalues() const;

private:
    struct NoCheck {};
    DensityMatrix(Operator entries, NoCheck) : m_(std::move(entries)) {}

    Operator m_;
};

DensityMatrix maximally_mixed(int dim);

/// |psi><psi| for a (not necessarily normalized) state vector.
DensityMatrix pure_state(const Eigen::VectorXcd& psi);

/// Qubit Bloch vector; |tau| <= 1 + 1e-12 enforced at construction.
class BlochVector {
public:
    BlochVector(double x, double y, double z);
    explicit BlochVector(const Eigen::Vector3d& tau);

    double x() const { return tau_.x(); }
    double y() const { return tau_.y(); }
    double z() const { return tau_.z(); }
    double norm() const { return tau_.norm(); }
    double transverse_sq() const { return tau_.x() * tau_.x() + tau_.y() * tau_.y(); }
    const Eigen::Vector3d& vec() const { return tau_; }

private:
    Eigen::Vector3d tau_;
};

struct SpinOperators {
    Operator jx, jy, jz, jplus, jminus;
};

struct FreeEnergySplit {
    double f_eq = 0.0;
    double classical_excess = 0.0; // T * KL(P || P_eq)
    double quantum_excess = 0.0;   // T * C(rho)
    double total = 0.0;
};

SpinOperators make_spin_operators(SpinJ j);

DensityMatrix bloch_to_rho(const BlochVector& tau);
BlochVector rho_to_bloch(const DensityMatrix& rho);

/// Sum of |rho_ij| over i != j in the J_z basis.
double l1_coherence(const DensityMatrix& rho);

/// 2 (tau_x^2 + tau_y^2): the coherence used on the qubit figure axes.
/// Differs from l1_coherence, which gives sqrt(tau_x^2 + tau_y^2) for a qubit.
double figure_coherence_qubit(const BlochVector& tau);

double von_neumann_entropy(const DensityMatrix& rho);

/// Shannon entropy of a probability vector, natural log, 0 ln 0 = 0.
double shannon_entropy(const RealVector& p);

/// Tr rho (ln rho - ln sigma). Throws SupportError if rho has weight where
/// sigma has a zero eigenvalue.
double quantum_relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma);

/// S(rho_diag) - S(rho) with rho_diag taken in the J_z basis.
double relative_entropy_of_coherence(const DensityMatrix& rho);

/// e^{-beta H} / Z. beta must be finite and nonnegative.
DensityMatrix gibbs_state(const Operator& h, double beta);

/// ln Tr e^{-beta H}, evaluated with the ground energy factored out.
double log_partition_function(const Operator& h, double beta);

/// Tr(H rho) + T Tr(rho ln rho), split into the equilibrium value plus a
/// population (classical) and a coherence (quantum) excess, both taken in the
/// eigenbasis of H.
FreeEnergySplit nonequilibrium_free_energy(const DensityMatrix& rho, const Operator& h,
                                           double temperature);

/// Random state whose l1 coherence equals `target_c`.
///
/// Draws populations from a flat Dirichlet distribution and a random
/// off-diagonal direction normalized to unit l1 norm, then scales the
/// direction to the target and keeps the draw if the result is positive
/// semidefinite. Off-diagonals are real for dim == 3 and complex otherwise.
/// The same seed always walks the same sequence of draws, so targets below the
/// first draw's positivity limit share one population vector and direction.
DensityMatrix random_state_with_coherence(int dim, double target_c, std::uint64_t seed);

/// Random full-rank state (Hilbert-Schmidt measure), for property tests.
DensityMatrix random_density_matrix(int dim, std::uint64_t seed);

namespace detail {

constexpr double kHermiticityTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kEigenFloor = -1e-10;

/// (A + A^dagger) / 2
Operator hermitian_part(const Operator& a);

/// Matrix logarithm of a Hermitian positive-definite operator.
Operator log_hermitian(const Operator& a);

void require_dim(const DensityMatrix& rho, Eigen::Index dim, const char* what);

} // namespace detail

} // namespace spinphase
