#pragma once
// Everything derived from the cavity coherent amplitudes: the amplitude ODE,
// steady states, beta coefficients, measurement rates and operators,
// dephasing/Stark matrices, outcome separations.

#include <array>

#include "wsim/algebra.hpp"

namespace wsim {

// All rates in units of kappa, all times in units of 1/kappa.
struct SystemParams {
  double kappa = 1.0;                          // the unit
  double chi = -0.11;                          // dispersive coupling
  double epsilon = 2.0;                        // measurement drive
  double g = 10.0;                             // qubit-cavity coupling
  std::array<double, 3> gamma{4e-3, 4e-3, 4e-3};  // per-qubit decay
  double eta = 1.0;                            // detection efficiency
  double phi = 0.0;                            // local-oscillator phase
  double f_max = 2.0;                          // bang-bang amplitude
  double dt = 1e-3;                            // integrator step
  bool include_stray_drive = false;            // eps*lambda (sigma+ e^{i dt t} + h.c.)
  bool steady_start = false;                   // amplitudes begin steady, not vacuum

  double lambda() const { return chi / g; }
  double delta() const;  // g^2/chi; throws for chi == 0
  double purcell_rate() const { return kappa * lambda() * lambda(); }
  double gamma_m() const {
    return 64.0 * epsilon * epsilon * chi * chi / (kappa * kappa * kappa);
  }
  void validate() const;  // throws std::invalid_argument on bad fields
};

// chi_x = <x| sum_j chi sigma_j^z |x> = chi * (2*excitations - 3)
double chi_of_state(int x, const SystemParams& p);

struct CoherentAmplitudeSet {
  std::array<Complex, 8> alpha{};  // cavity amplitude per logical state
  std::array<double, 8> chi_x{};

  static CoherentAmplitudeSet vacuum(const SystemParams& p);
};

// d alpha_x / dt for the driven, dispersively pulled cavity
Complex amplitude_derivative(Complex alpha_x, double chi_x, const SystemParams& p);

// alpha_x = -i eps / (i chi_x + kappa/2)
CoherentAmplitudeSet steady_amplitudes(const SystemParams& p);

// one classical RK4 step of all eight amplitudes
CoherentAmplitudeSet evolve_amplitudes(const CoherentAmplitudeSet& s,
                                       const SystemParams& p, double dt);

// beta_a = 1/4 sum_x (-1)^{a.b(x)} alpha_x, b = bitwise complement; index a
// packs (i,j,k) with i the most significant bit
std::array<Complex, 8> beta_coefficients(const CoherentAmplitudeSet& amps);

struct RateEntry {
  double rate;   // |beta|^2 cos^2(phi - theta); kappa*eta*rate is physical
  double theta;  // arg(beta)
};
std::array<RateEntry, 8> measurement_rates(const std::array<Complex, 8>& beta,
                                           double phi);

struct MeasurementModel {
  std::array<Complex, 8> beta{};
  std::array<RateEntry, 8> rates{};
  // both homodyne operators are real and diagonal in the logical basis:
  // alpha_x e^{-i phi} = c_phi - i c_{phi-pi/2} cell by cell
  Vector8d c_phi_diag;
  Vector8d c_quad_diag;
  // signed square-root rates; real at steady state (imaginary parts are
  // monitored, not truncated)
  Complex sqrt_gamma0, sqrt_gamma1, sqrt_gamma2;
  Matrix8d dephasing;  // Gamma_d^{xy} = (chi_x - chi_y) Im[alpha_x alpha_y*]
  Matrix8d stark;      // A_c^{xy}    = (chi_x - chi_y) Re[alpha_x alpha_y*]

  QubitOperator c_phi_operator() const;
  QubitOperator c_quadrature_operator() const;
};

MeasurementModel build_measurement_operators(const CoherentAmplitudeSet& amps,
                                             const SystemParams& p);

struct SteadyRates {
  double sqrt_kappa_gamma0;
  double sqrt_kappa_gamma1;
  double sqrt_kappa_gamma2;
  double gamma_m;
};
// closed forms valid once the amplitudes are steady
SteadyRates steady_rate_formulas(double chi_over_kappa, const SystemParams& p);

// kappa |a_x - a_y|^2 over the pair dephasing rate; 2 for antipodal pairs at
// steady state.  Throws for degenerate pairs (chi_x == chi_y).
double measurement_to_dephasing_ratio(int x, int y,
                                      const CoherentAmplitudeSet& amps,
                                      const SystemParams& p);

// 2 sqrt(G0) - 2 sqrt(G1): ground vs single-excited outcome separation
double outcome_separation(double chi_over_kappa, const SystemParams& p);

}  // namespace wsim
