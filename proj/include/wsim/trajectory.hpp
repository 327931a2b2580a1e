#pragma once
// Stochastic integrators for the qubit-only conditional master equations:
// the polaron-frame engine (amplitude-resolved) and the adiabatic-elimination
// engine, plus the deterministic unconditional propagator.

#include <cstdint>
#include <random>
#include <vector>

#include "wsim/cavity.hpp"

namespace wsim {

enum class Engine { polaron, adiabatic };

struct FeedbackLaw;  // see feedback.hpp

// Gaussian white noise xi(t) sampled as N(0,1)/sqrt(dt)
struct NoiseProcess {
  std::mt19937_64 rng;
  std::normal_distribution<double> normal{0.0, 1.0};
  double inv_sqrt_dt;

  NoiseProcess(uint64_t seed, double dt)
      : rng(seed), inv_sqrt_dt(1.0 / std::sqrt(dt)) {}
  double sample() { return normal(rng) * inv_sqrt_dt; }
};

// per-trajectory seed derivation (pure function of master seed and index)
uint64_t trajectory_seed(uint64_t master_seed, int index);

struct TrajectoryRecord {
  SystemParams params;
  Engine engine = Engine::polaron;
  uint64_t seed = 0;
  int stride = 1;

  std::vector<double> times;
  std::vector<double> fidelity;    // w.r.t. the controller target (default W-)
  std::vector<double> expect_c;    // <c_phi + c_phi^dag>_c, the outcome signal
  std::vector<double> current;     // raw homodyne samples at the sample times
  std::vector<std::array<double, 3>> feedback;
  std::vector<double> filter_fidelity;  // estimator's F, empty without controller

  DensityMatrix final_state;
  double max_trace_drift = 0;   // worst |tr-1| seen before renormalization
  double min_eigenvalue = 0;    // most negative eigenvalue at sample points
};

// reference (literal) drift of the polaron-frame master equation
Matrix8c polaron_drift(const DensityMatrix& rho, const CoherentAmplitudeSet& amps,
                       const SystemParams& p, double t);

// one Euler-Maruyama step of the conditional equation (fused fast path)
DensityMatrix polaron_sme_step(const DensityMatrix& rho,
                               const CoherentAmplitudeSet& amps,
                               const SystemParams& p, double xi_n, double t,
                               double dt);

DensityMatrix adiabatic_sme_step(const DensityMatrix& rho, const SystemParams& p,
                                 double xi_n, double t, double dt);

// homodyne record value I_c = k eta <c_phi + c_phi^dag> + sqrt(k eta) xi
double homodyne_sample(const DensityMatrix& rho, const MeasurementModel& model,
                       const SystemParams& p, double xi_n);

// deterministic RK4 step of the ensemble-averaged equation; advances amps to
// t + dt as a side effect (the generator is evaluated at the substep times)
DensityMatrix unconditional_step(const DensityMatrix& rho,
                                 CoherentAmplitudeSet& amps,
                                 const SystemParams& p, double t, double dt);

// integrate one conditional trajectory from a pure initial state; controller
// may be null (measurement only).  stride = steps between recorded samples.
TrajectoryRecord run_trajectory(const SystemParams& p, const PureState& initial,
                                Engine engine, const FeedbackLaw* controller,
                                double t_final, uint64_t seed, int stride);

}  // namespace wsim
