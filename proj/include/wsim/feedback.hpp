#pragma once
// Adaptive bang-bang feedback: fidelity gradient, switching law, and the
// state-estimation filter driven by the measured current.

#include "wsim/trajectory.hpp"

namespace wsim {

struct FeedbackLaw {
  double f_max = 2.0;
  PureState target = named_state(StateLabel::w_minus);
  Engine filter_engine = Engine::polaron;
  // filter estimate rho_hat; a zero matrix means "initialize from the plant's
  // initial state" inside run_trajectory
  DensityMatrix filter_state = DensityMatrix::Zero();
  CoherentAmplitudeSet filter_amps{};
  bool filter_amps_ready = false;
  // value of sgn(0): drive applied when a gradient component vanishes exactly
  int sign_rule_at_zero = 0;
  // estimator coupling: false = reconstruct the innovation from the measured
  // current (a realizable filter); true = integrate the filter equation with
  // the plant's own Wiener increments (the model-mismatch benchmark, where a
  // realizable innovation filter would instead re-lock onto the target)
  bool share_plant_noise = false;
  // coefficients chosen on the current step; the filter propagates with the
  // same drive the plant just received
  std::array<double, 3> last_f{0, 0, 0};
};

// g_j = d/df_j dF/dt = Tr(-i[|target><target|, sigma_j^x] rho_hat)
std::array<double, 3> gradient_expectations(const DensityMatrix& rho_hat,
                                            const PureState& target);

// f_j = f_max sgn(g_j), with sgn(0) given by the law
std::array<double, 3> bang_bang_coefficients(const std::array<double, 3>& g,
                                             const FeedbackLaw& law);

QubitOperator feedback_hamiltonian(const std::array<double, 3>& f);

// advance the filter one step from the measured current: the innovation
// xi_hat = (I - k eta <c+c^dag>_rho_hat)/sqrt(k eta) replaces the (unknown)
// plant noise in the filter's own conditional equation
FeedbackLaw filter_update(const FeedbackLaw& law, double measured_current,
                          const SystemParams& p, double t, double dt);

// same step but driven directly by the plant's noise sample (share_plant_noise
// coupling); bypasses the innovation reconstruction
FeedbackLaw filter_update_shared(const FeedbackLaw& law, double xi,
                                 const SystemParams& p, double t, double dt);

}  // namespace wsim
