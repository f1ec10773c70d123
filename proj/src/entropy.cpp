#include "spinphase/entropy.hpp"

#include <cmath>
#include <string>

namespace spinphase {

namespace {

constexpr double kPurityEdge = 1.0 - 1e-12;
constexpr double kRankFloor = 1e-12;

Operator log_full_rank(const DensityMatrix& rho, const char* what) {
    Eigen::SelfAdjointEigenSolver<Operator> es(rho.matrix());
    const RealVector& ev = es.eigenvalues();
    if (ev.minCoeff() < kRankFloor)
        throw SupportError(std::string(what) + " is rank deficient (eigenvalue " +
                           std::to_string(ev.minCoeff()) + ")");
    const Operator& v = es.eigenvectors();
    return v * ev.array().log().matrix().cast<Complex>().asDiagonal() * v.adjoint();
}

double trace_product(const Operator& a, const Operator& b) {
    return (a.transpose().cwiseProduct(b)).sum().real();
}

} // namespace

double wehrl_bracket(double x) {
    const double a = std::abs(x);
    if (a >= 1.0) return 1.0;
    if (a < 1e-2) {
        const double x2 = x * x;
        return 2.0 / 3.0 + x2 * (2.0 / 15.0 + x2 * (2.0 / 35.0 + x2 * (2.0 / 63.0)));
    }
    return (a - (1.0 - a * a) * std::atanh(a)) / (a * a * a);
}

double atanh_over_x(double x) {
    const double a = std::abs(x);
    if (a < 1e-4) {
        const double x2 = x * x;
        return 1.0 + x2 * (1.0 / 3.0 + x2 / 5.0);
    }
    return std::atanh(a) / a;
}

EpReport ep_rate_dephasing_quad(const HusimiField& f, double lambda, Reduction mode) {
    if (lambda < 0.0) throw RangeError("dephasing rate must be >= 0");
    EpReport out;
    out.route = Route::Quadrature;
    const auto mask = detail::q_floor_mask(f, out.warnings, "ep_rate_dephasing_quad");
    const Eigen::ArrayXd integrand =
        mask.select(f.dq_dphi.square() / f.q.max(kQFloor), 0.0);
    out.sigma_dot = 0.5 * lambda * detail::husimi_prefactor(f.j) * integrate(*f.grid, integrand, mode);
    out.phi_dot = 0.0;
    out.ds_dt = out.sigma_dot;
    return out;
}

EpReport ep_rate_damping_quad(const HusimiField& f, const BathParams& bath, Reduction mode) {
    EpReport out;
    out.route = Route::Quadrature;
    const auto mask = detail::q_floor_mask(f, out.warnings, "ep_rate_damping_quad");

    const double tz = bath.tau_bar_z;
    const double two_j = f.j.two_j();
    const Eigen::ArrayXd s = f.grid->theta().sin();
    const Eigen::ArrayXd c = f.grid->theta().cos();

    // Gamma = -gamma_bar tau_bar_z and 2 nbar + 1 = -1 / tau_bar_z, multiplied through.
    const Eigen::ArrayXd drift = tz * (two_j * f.q * s + c * f.dq_dtheta) + f.dq_dtheta;
    const Eigen::ArrayXd radial = drift.square() / (1.0 + c * tz);
    const Eigen::ArrayXd azimuthal = f.dq_dphi.square() * (c + tz) * c / s.square();
    const Eigen::ArrayXd integrand = mask.select((radial + azimuthal) / f.q.max(kQFloor), 0.0);
    out.sigma_dot =
        0.5 * bath.gamma_bar * detail::husimi_prefactor(f.j) * integrate(*f.grid, integrand, mode);

    const ChannelSpec channel = ChannelSpec::amplitude_damping(f.j, bath);
    const RateEstimate wehrl = wehrl_rate_dissipative(f, channel, mode);
    out.ds_dt = wehrl.value;
    out.phi_dot = out.sigma_dot - out.ds_dt;
    return out;
}

double ep_qubit_dephasing_closed(const BlochVector& tau, double lambda) {
    return 0.25 * lambda * tau.transverse_sq() * wehrl_bracket(tau.norm());
}

double ep_vn_qubit_dephasing(const BlochVector& tau, double lambda) {
    const double t = tau.norm();
    if (t >= kPurityEdge && tau.transverse_sq() > 0.0)
        throw PurityDivergence("von Neumann dephasing EP diverges for a pure state");
    if (tau.transverse_sq() == 0.0) return 0.0;
    return 0.5 * lambda * tau.transverse_sq() * atanh_over_x(t);
}

double ep_qubit_damping_closed(const BlochVector& tau, const BathParams& bath) {
    const double gb = bath.gamma_bar;
    const double tbz = bath.tau_bar_z;
    const double t = tau.norm();
    const double tz = tau.z();
    return 0.25 * gb * (t * t + tz * tz - 2.0 * tbz * tz) * wehrl_bracket(t) -
           0.5 * gb * tbz * (tz - tbz) * wehrl_bracket(tbz);
}

double ep_vn_qubit_damping(const BlochVector& tau, const BathParams& bath) {
    const double t = tau.norm();
    if (t >= kPurityEdge)
        throw PurityDivergence("von Neumann damping EP diverges for a pure state");
    const double tbz = bath.tau_bar_z;
    if (tbz <= -kPurityEdge)
        throw TemperatureDivergence("von Neumann damping EP diverges at zero temperature");
    const double gb = bath.gamma_bar;
    const double tz = tau.z();
    return -gb * std::atanh(tbz) * (tz - tbz) +
           0.5 * gb * atanh_over_x(t) * (t * t + tz * tz - 2.0 * tz * tbz);
}

EpReport ep_vn_general(const DensityMatrix& rho, const ChannelSpec& spec,
                       const DensityMatrix& rho_eq) {
    if (rho.dim() != spec.dim() || rho_eq.dim() != spec.dim())
        throw DimensionError("ep_vn_general: dimension mismatch");
    const Operator lrho = apply_liouvillian(spec, rho);
    const Operator ln_rho = log_full_rank(rho, "rho");
    const Operator ln_eq = log_full_rank(rho_eq, "rho_eq");

    EpReport out;
    out.route = Route::VonNeumann;
    out.sigma_dot = -trace_product(lrho, ln_rho - ln_eq);
    out.phi_dot = trace_product(lrho, ln_eq);
    out.ds_dt = -trace_product(lrho, ln_rho);
    return out;
}

} // namespace spinphase
