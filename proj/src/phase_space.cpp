#include "spinphase/phase_space.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace spinphase {

namespace {

using std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

// Rotation taking +z onto the unit vector `axis`.
Eigen::Matrix3d rotation_from_z(const Eigen::Vector3d& axis) {
    const Eigen::Vector3d z(0.0, 0.0, 1.0);
    const Eigen::Vector3d a = axis.normalized();
    const Eigen::Vector3d k = z.cross(a);
    const double s = k.norm();
    const double c = z.dot(a);
    if (s < 1e-15) {
        Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
        if (c < 0.0) r.diagonal() << 1.0, -1.0, -1.0;
        return r;
    }
    const Eigen::Vector3d u = k / s;
    Eigen::Matrix3d kx;
    kx << 0.0, -u.z(), u.y(), u.z(), 0.0, -u.x(), -u.y(), u.x(), 0.0;
    return Eigen::Matrix3d::Identity() + s * kx + (1.0 - c) * kx * kx;
}

HusimiField field_from_operator(const Operator& x, const CoherentBasis& b) {
    const int d = b.spin().dim();
    if (x.rows() != d || x.cols() != d)
        throw DimensionError("husimi field: operator dimension " + std::to_string(x.rows()) +
                             " does not match spin dimension " + std::to_string(d));
    const Eigen::MatrixXcd xu = x * b.u();
    const Eigen::MatrixXcd xut = x * b.u_theta();
    const Eigen::MatrixXcd xup = x * b.u_phi();

    // Re sum_m conj(a_mn) c_mn, column by column.
    auto rdot = [](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& c) -> Eigen::ArrayXd {
        return (a.conjugate().cwiseProduct(c)).colwise().sum().real().transpose().array();
    };

    HusimiField f{b.grid(), b.spin(), {}, {}, {}, {}, {}, {}};
    f.q = rdot(b.u(), xu);
    f.dq_dtheta = 2.0 * rdot(b.u_theta(), xu);
    f.dq_dphi = 2.0 * rdot(b.u_phi(), xu);
    f.d2q_dtheta2 = 2.0 * (rdot(b.u_theta2(), xu) + rdot(b.u_theta(), xut));
    f.d2q_dtheta_dphi = 2.0 * (rdot(b.u_theta_phi(), xu) + rdot(b.u_theta(), xup));
    f.d2q_dphi2 = 2.0 * (rdot(b.u_phi2(), xu) + rdot(b.u_phi(), xup));
    return f;
}

} // namespace

SolidAngle::SolidAngle(double theta_, double phi_) : theta(theta_), phi(phi_) {
    if (!(theta >= 0.0 && theta <= pi))
        throw RangeError("solid angle: theta " + std::to_string(theta) + " outside [0, pi]");
    if (!(phi >= 0.0 && phi <= 2.0 * pi))
        throw RangeError("solid angle: phi " + std::to_string(phi) + " outside [0, 2 pi]");
}

Eigen::Vector3d SolidAngle::unit_vector() const {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::pair<RealVector, RealVector> gauss_legendre(int n) {
    if (n < 1) throw RangeError("gauss_legendre: n must be >= 1");
    RealVector x(n), w(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        // Recompute the derivative at the converged root.
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        x(i) = -z;
        x(n - 1 - i) = z;
        w(i) = w(n - 1 - i) = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return {x, w};
}

SphereGrid::SphereGrid(int n_theta, int n_phi)
    : SphereGrid(n_theta, n_phi, Eigen::Vector3d(0.0, 0.0, 1.0)) {}

SphereGrid::SphereGrid(int n_theta, int n_phi, const Eigen::Vector3d& polar_axis)
    : n_theta_(n_theta), n_phi_(n_phi), axis_(polar_axis) {
    if (n_theta < 1 || n_phi < 1) throw RangeError("sphere grid: sizes must be >= 1");
    if (!(axis_.norm() > 0.0)) throw RangeError("sphere grid: polar axis must be nonzero");
    axis_.normalize();
    auto [x, w] = gauss_legendre(n_theta);
    theta_nodes_ = x.array().acos().matrix();
    theta_weights_ = w;

    // A tilted grid can land a node on the laboratory pole; twist it off.
    double offset = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        build(offset);
        if (theta_.sin().minCoeff() > 1e-9) return;
        offset += 0.25 * 2.0 * pi / n_phi_;
    }
    throw RangeError("sphere grid: could not place nodes away from the poles");
}

void SphereGrid::build(double phi_offset) {
    const Eigen::Matrix3d rot = rotation_from_z(axis_);
    const Eigen::Index n = static_cast<Eigen::Index>(n_theta_) * n_phi_;
    theta_.resize(n);
    phi_.resize(n);
    weight_.resize(n);
    const double dphi = 2.0 * pi / n_phi_;
    Eigen::Index idx = 0;
    for (int i = 0; i < n_theta_; ++i) {
        const double t = theta_nodes_(i);
        for (int k = 0; k < n_phi_; ++k, ++idx) {
            const double p = phi_offset + k * dphi;
            const Eigen::Vector3d local(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p),
                                        std::cos(t));
            const Eigen::Vector3d g = rot * local;
            theta_(idx) = std::acos(std::clamp(g.z(), -1.0, 1.0));
            double ph = std::atan2(g.y(), g.x());
            if (ph < 0.0) ph += 2.0 * pi;
            phi_(idx) = ph;
            weight_(idx) = theta_weights_(i) * dphi;
        }
    }
}

double pairwise_sum(const double* v, Eigen::Index n) {
    if (n <= 8) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const Eigen::Index h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double integrate(const SphereGrid& grid, const Eigen::ArrayXd& values, Reduction mode) {
    if (values.size() != grid.size())
        throw DimensionError("integrate: field size does not match the grid");
    const Eigen::ArrayXd wv = grid.weight() * values;
    if (mode == Reduction::Sequential) {
        double s = 0.0;
        for (double v : wv) s += v;
        return s;
    }
    return pairwise_sum(wv.data(), wv.size());
}

CoherentAmplitudes coherent_amplitudes(SpinJ j, double theta) {
    if (!(theta >= 0.0 && theta <= pi))
        throw RangeError("coherent_amplitudes: theta " + std::to_string(theta) + " outside [0, pi]");
    const int n = j.two_j();
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    // coef * c^pc * s^ps, skipping terms whose coefficient vanishes.
    auto term = [&](double coef, int pc, int ps) {
        return coef == 0.0 ? 0.0 : coef * std::pow(c, pc) * std::pow(s, ps);
    };

    CoherentAmplitudes out{j, theta, RealVector(n + 1), RealVector(n + 1), RealVector(n + 1)};
    for (int k = 0; k <= n; ++k) {
        // m = J - k: cos power p = J + m = n - k, sin power q = J - m = k.
        const int p = n - k;
        const int q = k;
        const double norm = std::sqrt(binomial(n, q));
        out.a(k) = norm * term(1.0, p, q);
        out.da(k) = 0.5 * norm * (term(-p, p - 1, q + 1) + term(q, p + 1, q - 1));
        out.d2a(k) = 0.25 * norm *
                     (term(p * (p - 1.0), p - 2, q + 2) - term(p * (q + 1.0) + q * (p + 1.0), p, q) +
                      term(q * (q - 1.0), p + 2, q - 2));
    }
    return out;
}

Eigen::VectorXcd coherent_state(SpinJ j, const SolidAngle& omega) {
    const CoherentAmplitudes amp = coherent_amplitudes(j, omega.theta);
    Eigen::VectorXcd v(j.dim());
    for (int k = 0; k < j.dim(); ++k) v(k) = amp.a(k) * std::exp(-kI * (j.m(k) * omega.phi));
    return v;
}

double husimi_q(const DensityMatrix& rho, const SolidAngle& omega) {
    const SpinJ j = spin_for_dim(rho.dim());
    const Eigen::VectorXcd v = coherent_state(j, omega);
    return (v.adjoint() * rho.matrix() * v)(0, 0).real();
}

CoherentBasis::CoherentBasis(SpinJ j, std::shared_ptr<const SphereGrid> grid)
    : j_(j), grid_(std::move(grid)) {
    const int d = j.dim();
    const Eigen::Index n = grid_->size();
    u_.resize(d, n);
    u_t_.resize(d, n);
    u_tt_.resize(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const CoherentAmplitudes amp = coherent_amplitudes(j, grid_->theta()(i));
        const double ph = grid_->phi()(i);
        for (int k = 0; k < d; ++k) {
            const Complex e = std::exp(-kI * (j.m(k) * ph));
            u_(k, i) = amp.a(k) * e;
            u_t_(k, i) = amp.da(k) * e;
            u_tt_(k, i) = amp.d2a(k) * e;
        }
    }
    // d/dphi multiplies component m by -i m.
    Eigen::VectorXcd dm(d);
    for (int k = 0; k < d; ++k) dm(k) = -kI * j.m(k);
    u_p_ = dm.asDiagonal() * u_;
    u_tp_ = dm.asDiagonal() * u_t_;
    u_pp_ = dm.asDiagonal() * u_p_;
}

HusimiField husimi_field(const DensityMatrix& rho, std::shared_ptr<const SphereGrid> grid) {
    return husimi_field(rho, CoherentBasis(spin_for_dim(rho.dim()), std::move(grid)));
}

HusimiField husimi_field(const DensityMatrix& rho, const CoherentBasis& basis) {
    return field_from_operator(rho.matrix(), basis);
}

HusimiField husimi_symbol_field(const Operator& x, const CoherentBasis& basis) {
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if ((x - x.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidStateError("husimi symbol: operator must be Hermitian");
    return field_from_operator(x, basis);
}

Eigen::ArrayXcd phase_space_jz(const HusimiField& f) {
    return -kI * f.dq_dphi.cast<Complex>();
}

Eigen::ArrayXcd phase_space_jplus(const HusimiField& f) {
    const Eigen::ArrayXd& th = f.grid->theta();
    const Eigen::ArrayXd cot = th.cos() / th.sin();
    const Eigen::ArrayXcd e = (kI * f.grid->phi().cast<Complex>()).exp();
    return e * (f.dq_dtheta.cast<Complex>() + kI * (cot * f.dq_dphi).cast<Complex>());
}

Eigen::ArrayXcd phase_space_jminus(const HusimiField& f) {
    const Eigen::ArrayXd& th = f.grid->theta();
    const Eigen::ArrayXd cot = th.cos() / th.sin();
    const Eigen::ArrayXcd e = (-kI * f.grid->phi().cast<Complex>()).exp();
    return -e * (f.dq_dtheta.cast<Complex>() - kI * (cot * f.dq_dphi).cast<Complex>());
}

Eigen::ArrayXd phase_space_dissipator(const HusimiField& f, const ChannelSpec& channel) {
    if (channel.spin() != f.j) throw DimensionError("phase-space dissipator: spin mismatch");
    if (const auto* deph = std::get_if<Dephasing>(&channel.dissipator())) {
        // J_z(J_z(Q)) = -d^2Q/dphi^2
        return 0.5 * deph->lambda * f.d2q_dphi2;
    }
    const auto* damp = std::get_if<AmplitudeDamping>(&channel.dissipator());
    if (!damp)
        throw InvalidChannelError(
            "phase-space dissipator: only dephasing and amplitude damping are supported");

    // Gamma f(Q) = e^{i phi} g with
    //   g = 1/2 kappa (2J Q + i Q_phi) sin + 1/2 (kappa cos - gamma_bar) P,
    //   P = Q_theta + i cot Q_phi,  kappa = Gamma = -gamma_bar tau_bar_z.
    // Then Gamma J_-(f) = -(g_theta + cot g - i cot g_phi) and, because Q is real,
    // D(Q) = (Gamma/2)[J_-(f) - J_+(f*)] = Re(Gamma J_-(f)).
    const double two_j = f.j.two_j();
    const double gbar = damp->bath.gamma_bar;
    const double kappa = -gbar * damp->bath.tau_bar_z;
    const Eigen::ArrayXd& th = f.grid->theta();
    const Eigen::ArrayXd s = th.sin();
    const Eigen::ArrayXd c = th.cos();
    const Eigen::ArrayXd cot = c / s;

    const Eigen::ArrayXd& q = f.q;
    const Eigen::ArrayXd& qt = f.dq_dtheta;
    const Eigen::ArrayXd& qp = f.dq_dphi;
    const Eigen::ArrayXd& qtt = f.d2q_dtheta2;
    const Eigen::ArrayXd& qtp = f.d2q_dtheta_dphi;
    const Eigen::ArrayXd& qpp = f.d2q_dphi2;

    auto cplx = [](const Eigen::ArrayXd& re, const Eigen::ArrayXd& im) {
        Eigen::ArrayXcd z(re.size());
        z.real() = re;
        z.imag() = im;
        return z;
    };

    const Eigen::ArrayXcd pp = cplx(qt, cot * qp);
    const Eigen::ArrayXcd pp_t = cplx(qtt, -qp / (s * s) + cot * qtp);
    const Eigen::ArrayXcd pp_p = cplx(qtp, cot * qpp);
    const Eigen::ArrayXd lin = kappa * c - gbar;

    const Eigen::ArrayXcd g =
        0.5 * kappa * cplx(two_j * q * s, qp * s) + 0.5 * lin.cast<Complex>() * pp;
    const Eigen::ArrayXcd g_t = 0.5 * kappa * cplx(two_j * qt * s + two_j * q * c, qtp * s + qp * c) -
                                0.5 * (kappa * s).cast<Complex>() * pp +
                                0.5 * lin.cast<Complex>() * pp_t;
    const Eigen::ArrayXcd g_p =
        0.5 * kappa * cplx(two_j * qp * s, qpp * s) + 0.5 * lin.cast<Complex>() * pp_p;

    const Eigen::ArrayXcd jminus_f = -(g_t + cot.cast<Complex>() * g - kI * cot.cast<Complex>() * g_p);
    return jminus_f.real();
}

double wehrl_entropy(const HusimiField& f, Reduction mode) {
    const Eigen::ArrayXd integrand =
        (f.q >= kQFloor).select(f.q * f.q.max(kQFloor).log(), 0.0);
    return -detail::husimi_prefactor(f.j) * integrate(*f.grid, integrand, mode);
}

RateEstimate wehrl_rate_dissipative(const HusimiField& f, const ChannelSpec& channel,
                                    Reduction mode) {
    RateEstimate out;
    const auto mask = detail::q_floor_mask(f, out.warnings, "wehrl_rate_dissipative");
    const Eigen::ArrayXd dq = phase_space_dissipator(f, channel);
    const Eigen::ArrayXd integrand = mask.select(dq * f.q.max(kQFloor).log(), 0.0);
    out.value = -detail::husimi_prefactor(f.j) * integrate(*f.grid, integrand, mode);
    return out;
}

namespace detail {

double husimi_prefactor(SpinJ j) { return (j.two_j() + 1.0) / (4.0 * pi); }

Eigen::Array<bool, Eigen::Dynamic, 1> q_floor_mask(const HusimiField& f, Warnings& warnings,
                                                   const char* where) {
    Eigen::Array<bool, Eigen::Dynamic, 1> mask = f.q >= kQFloor;
    const Eigen::Index dropped = mask.size() - mask.count();
    if (dropped > 0) {
        const double mass = (mask.select(0.0, f.grid->weight())).sum();
        warnings.push_back({Warning::Kind::QFloor,
                            std::string(where) + ": dropped " + std::to_string(dropped) +
                                " nodes with Q < 1e-14 (solid angle " + std::to_string(mass) + ")",
                            mass});
    }
    return mask;
}

} // namespace detail

} // namespace spinphase
