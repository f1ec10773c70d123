#pragma once

// Entropy production and flux rates: Wehrl/Husimi quadrature, closed forms for
// the qubit, and the von Neumann route.

#include "spinphase/dynamics.hpp"
#include "spinphase/phase_space.hpp"

namespace spinphase {

enum class Route { Quadrature, ClosedForm, VonNeumann };

/// dS/dt = sigma_dot - phi_dot.
struct EpReport {
    double sigma_dot = 0.0;
    double phi_dot = 0.0;
    double ds_dt = 0.0;
    Route route = Route::Quadrature;
    Warnings warnings;
};

/// (lambda/2) (2J+1)/(4 pi) * integral |J_z(Q)|^2 / Q. Flux is zero.
EpReport ep_rate_dephasing_quad(const HusimiField& field, double lambda,
                                Reduction mode = Reduction::Pairwise);

/// Amplitude-damping EP integral, evaluated in the (gamma_bar, tau_bar_z) form so
/// that tau_bar_z = 0 is regular. The flux is fixed by balance against the
/// dissipative Wehrl rate, so ds_dt is that rate.
EpReport ep_rate_damping_quad(const HusimiField& field, const BathParams& bath,
                              Reduction mode = Reduction::Pairwise);

double ep_qubit_dephasing_closed(const BlochVector& tau, double lambda);
double ep_vn_qubit_dephasing(const BlochVector& tau, double lambda);

double ep_qubit_damping_closed(const BlochVector& tau, const BathParams& bath);
double ep_vn_qubit_damping(const BlochVector& tau, const BathParams& bath);

/// sigma_dot = -Tr{L[rho](ln rho - ln rho_eq)}, phi_dot = Tr{L[rho] ln rho_eq},
/// ds_dt = -Tr{L[rho] ln rho}. Both states must have full rank.
EpReport ep_vn_general(const DensityMatrix& rho, const ChannelSpec& spec,
                       const DensityMatrix& rho_eq);

/// [x - (1 - x^2) atanh x] / x^3, with f(0) = 2/3 and f(+-1) = 1.
double wehrl_bracket(double x);

/// atanh(x) / x, with the value 1 at x = 0.
double atanh_over_x(double x);

} // namespace spinphase
