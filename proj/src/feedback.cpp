#include "wsim/feedback.hpp"

#include <cmath>
#include <stdexcept>

#include "kernel.hpp"

namespace wsim {

std::array<double, 3> gradient_expectations(const DensityMatrix& rho_hat,
                                            const PureState& target) {
  const DensityMatrix pt = projector(target);
  std::array<double, 3> g;
  for (int j = 1; j <= 3; ++j) {
    const QubitOperator sx = pauli(j, PauliAxis::x);
    const Matrix8c comm = Complex(0, -1) * (pt * sx - sx * pt);
    g[j - 1] = (comm * rho_hat).trace().real();
  }
  return g;
}

std::array<double, 3> bang_bang_coefficients(const std::array<double, 3>& g,
                                             const FeedbackLaw& law) {
  std::array<double, 3> f;
  for (int j = 0; j < 3; ++j) {
    if (g[j] > 0)
      f[j] = law.f_max;
    else if (g[j] < 0)
      f[j] = -law.f_max;
    else
      f[j] = law.f_max * double(law.sign_rule_at_zero);
  }
  return f;
}

QubitOperator feedback_hamiltonian(const std::array<double, 3>& f) {
  QubitOperator h = QubitOperator::Zero();
  for (int j = 1; j <= 3; ++j) h += f[j - 1] * pauli(j, PauliAxis::x);
  return h;
}

namespace {

// shared body of the two coupling modes; `innovation` says whether `signal`
// is a measured current (to be converted) or already a noise sample
FeedbackLaw advance_filter(const FeedbackLaw& law, double signal,
                           bool innovation, const SystemParams& p, double t,
                           double dt) {
  FeedbackLaw out = law;

  detail::StepTables tab;
  if (law.filter_engine == Engine::polaron) {
    if (!out.filter_amps_ready) {
      out.filter_amps = CoherentAmplitudeSet::vacuum(p);
      out.filter_amps_ready = true;
    }
    detail::build_polaron_tables(tab, out.filter_amps, p);
  } else {
    detail::build_adiabatic_tables(tab, p);
  }

  detail::Rho64 r;
  detail::to_flat(out.filter_state, r);
  const double ke = p.kappa * p.eta;
  if (innovation && !(ke > 0))
    throw std::invalid_argument("filter cannot be driven with kappa*eta = 0");
  const double drive =
      innovation ? (signal - ke * detail::expect_c(r, tab)) / std::sqrt(ke)
                 : signal;
  detail::em_step(r, tab, out.last_f, drive, t, dt);
  detail::hygiene64(r);
  out.filter_state = detail::from_flat(r);

  if (law.filter_engine == Engine::polaron)
    out.filter_amps = evolve_amplitudes(out.filter_amps, p, dt);
  return out;
}

}  // namespace

FeedbackLaw filter_update(const FeedbackLaw& law, double measured_current,
                          const SystemParams& p, double t, double dt) {
  return advance_filter(law, measured_current, true, p, t, dt);
}

FeedbackLaw filter_update_shared(const FeedbackLaw& law, double xi,
                                 const SystemParams& p, double t, double dt) {
  return advance_filter(law, xi, false, p, t, dt);
}

}  // namespace wsim
