#pragma once

// Spin coherent states, Husimi-Q fields on a spherical quadrature grid, the
// phase-space images of J_z and J_+-, and Wehrl entropy with its dissipative rate.

#include <memory>

#include "spinphase/dynamics.hpp"
#include "spinphase/spin.hpp"

namespace spinphase {

/// theta in [0, pi], phi in [0, 2 pi].
struct SolidAngle {
    double theta;
    double phi;

    SolidAngle(double theta, double phi);
    Eigen::Vector3d unit_vector() const;
};

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
std::pair<RealVector, RealVector> gauss_legendre(int n);

/// Product grid: Gauss-Legendre in cos(theta) times uniform trapezoid in phi.
///
/// The polar axis of the product grid can be tilted away from +z; nodes are then
/// rotated rigidly (the weights are unchanged) and reported in the laboratory
/// (theta, phi) frame. Aligning the axis with an isolated zero of Q puts that
/// zero at a grid pole, where the integrands are smooth in the rotated polar
/// coordinates. No node ever sits on the laboratory poles.
class SphereGrid {
public:
    SphereGrid(int n_theta, int n_phi);
    SphereGrid(int n_theta, int n_phi, const Eigen::Vector3d& polar_axis);

    int n_theta() const { return n_theta_; }
    int n_phi() const { return n_phi_; }
    Eigen::Index size() const { return theta_.size(); }

    /// Local polar angles of the rings and their Gauss-Legendre weights.
    const RealVector& theta_nodes() const { return theta_nodes_; }
    const RealVector& theta_weights() const { return theta_weights_; }

    /// Per-node laboratory angles and full solid-angle weights (sum = 4 pi).
    const Eigen::ArrayXd& theta() const { return theta_; }
    const Eigen::ArrayXd& phi() const { return phi_; }
    const Eigen::ArrayXd& weight() const { return weight_; }

    const Eigen::Vector3d& polar_axis() const { return axis_; }

private:
    void build(double phi_offset);

    int n_theta_;
    int n_phi_;
    Eigen::Vector3d axis_;
    RealVector theta_nodes_;
    RealVector theta_weights_;
    Eigen::ArrayXd theta_;
    Eigen::ArrayXd phi_;
    Eigen::ArrayXd weight_;
};

enum class Reduction {
    Pairwise,   // fixed binary tree, reproducible and accurate
    Sequential, // left-to-right
};

/// Sum of weight * value over the grid.
double integrate(const SphereGrid& grid, const Eigen::ArrayXd& values,
                 Reduction mode = Reduction::Pairwise);

/// Pairwise (cascade) summation.
double pairwise_sum(const double* values, Eigen::Index n);

/// Real parts a_m(theta) of <J,m|Omega> = e^{-i m phi} a_m(theta), ordered
/// m = J, J-1, ..., -J, with analytic first and second theta derivatives.
struct CoherentAmplitudes {
    SpinJ j;
    double theta;
    RealVector a;
    RealVector da;
    RealVector d2a;
};

CoherentAmplitudes coherent_amplitudes(SpinJ j, double theta);

/// Components <J,m|Omega>.
Eigen::VectorXcd coherent_state(SpinJ j, const SolidAngle& omega);

/// <Omega|rho|Omega>
double husimi_q(const DensityMatrix& rho, const SolidAngle& omega);

/// Coherent-state vectors and their angular derivatives at every grid node,
/// reusable across many fields on the same grid.
class CoherentBasis {
public:
    CoherentBasis(SpinJ j, std::shared_ptr<const SphereGrid> grid);

    SpinJ spin() const { return j_; }
    const std::shared_ptr<const SphereGrid>& grid() const { return grid_; }

    // d x N matrices, column n = node n.
    const Eigen::MatrixXcd& u() const { return u_; }
    const Eigen::MatrixXcd& u_theta() const { return u_t_; }
    const Eigen::MatrixXcd& u_phi() const { return u_p_; }
    const Eigen::MatrixXcd& u_theta2() const { return u_tt_; }
    const Eigen::MatrixXcd& u_theta_phi() const { return u_tp_; }
    const Eigen::MatrixXcd& u_phi2() const { return u_pp_; }

private:
    SpinJ j_;
    std::shared_ptr<const SphereGrid> grid_;
    Eigen::MatrixXcd u_, u_t_, u_p_, u_tt_, u_tp_, u_pp_;
};

/// Q and its analytic angular derivatives sampled on a grid.
struct HusimiField {
    std::shared_ptr<const SphereGrid> grid;
    SpinJ j;
    Eigen::ArrayXd q;
    Eigen::ArrayXd dq_dtheta;
    Eigen::ArrayXd dq_dphi;
    Eigen::ArrayXd d2q_dtheta2;
    Eigen::ArrayXd d2q_dtheta_dphi;
    Eigen::ArrayXd d2q_dphi2;
};

HusimiField husimi_field(const DensityMatrix& rho, std::shared_ptr<const SphereGrid> grid);
HusimiField husimi_field(const DensityMatrix& rho, const CoherentBasis& basis);

/// <Omega|X|Omega> with derivatives for any Hermitian X (e.g. L[rho]).
HusimiField husimi_symbol_field(const Operator& x, const CoherentBasis& basis);

/// -i dQ/dphi
Eigen::ArrayXcd phase_space_jz(const HusimiField& field);
/// e^{i phi} (d_theta + i cot(theta) d_phi) Q
Eigen::ArrayXcd phase_space_jplus(const HusimiField& field);
/// -e^{-i phi} (d_theta - i cot(theta) d_phi) Q
Eigen::ArrayXcd phase_space_jminus(const HusimiField& field);

/// Phase-space image D(Q) of the channel's dissipator. Dephasing gives
/// -(lambda/2) J_z(J_z(Q)); amplitude damping gives
/// (Gamma/2) [J_-(f(Q)) - J_+(f*(Q))] with
/// f(Q) = 1/2 [2J Q - J_z(Q)] e^{i phi} sin(theta) + 1/2 [cos(theta) - (2 nbar + 1)] J_+(Q).
/// Other channel kinds throw InvalidChannelError.
Eigen::ArrayXd phase_space_dissipator(const HusimiField& field, const ChannelSpec& channel);

/// Nodes with Q below this value are dropped from integrands that divide by
/// or take the log of Q.
inline constexpr double kQFloor = 1e-14;

/// -(2J+1)/(4 pi) * integral of Q ln Q.
double wehrl_entropy(const HusimiField& field, Reduction mode = Reduction::Pairwise);

struct RateEstimate {
    double value = 0.0;
    Warnings warnings;
};

/// -(2J+1)/(4 pi) * integral of D(Q) ln Q, the dissipative part of dS_Q/dt.
RateEstimate wehrl_rate_dissipative(const HusimiField& field, const ChannelSpec& channel,
                                    Reduction mode = Reduction::Pairwise);

namespace detail {

/// Mask of nodes with q >= kQFloor and a warning describing the excluded mass.
Eigen::Array<bool, Eigen::Dynamic, 1> q_floor_mask(const HusimiField& field, Warnings& warnings,
                                                   const char* where);

/// (2J+1)/(4 pi)
double husimi_prefactor(SpinJ j);

} // namespace detail

} // namespace spinphase
