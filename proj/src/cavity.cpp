#include "wsim/cavity.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace wsim {

double SystemParams::delta() const {
  if (chi == 0.0) throw std::invalid_argument("delta undefined for chi = 0");
  return g * g / chi;
}

void SystemParams::validate() const {
  if (kappa <= 0) throw std::invalid_argument("kappa must be positive");
  if (eta < 0 || eta > 1) throw std::invalid_argument("eta must lie in [0,1]");
  if (dt <= 0) throw std::invalid_argument("dt must be positive");
  if (g <= 0) throw std::invalid_argument("g must be positive");
  for (double gj : gamma)
    if (gj < 0) throw std::invalid_argument("gamma must be non-negative");
  if (f_max < 0) throw std::invalid_argument("f_max must be non-negative");
}

double chi_of_state(int x, const SystemParams& p) {
  return p.chi * (2 * excitation_number(x) - 3);
}

CoherentAmplitudeSet CoherentAmplitudeSet::vacuum(const SystemParams& p) {
  CoherentAmplitudeSet s;
  for (int x = 0; x < 8; ++x) {
    s.alpha[x] = 0.0;
    s.chi_x[x] = chi_of_state(x, p);
  }
  return s;
}

Complex amplitude_derivative(Complex alpha_x, double chi_x, const SystemParams& p) {
  return Complex(0, -chi_x) * alpha_x - Complex(0, p.epsilon) -
         0.5 * p.kappa * alpha_x;
}

CoherentAmplitudeSet steady_amplitudes(const SystemParams& p) {
  CoherentAmplitudeSet s = CoherentAmplitudeSet::vacuum(p);
  for (int x = 0; x < 8; ++x)
    s.alpha[x] = Complex(0, -p.epsilon) / Complex(0.5 * p.kappa, s.chi_x[x]);
  return s;
}

CoherentAmplitudeSet evolve_amplitudes(const CoherentAmplitudeSet& s,
                                       const SystemParams& p, double dt) {
  CoherentAmplitudeSet out = s;
  for (int x = 0; x < 8; ++x) {
    const double cx = s.chi_x[x];
    const Complex a = s.alpha[x];
    const Complex k1 = amplitude_derivative(a, cx, p);
    const Complex k2 = amplitude_derivative(a + 0.5 * dt * k1, cx, p);
    const Complex k3 = amplitude_derivative(a + 0.5 * dt * k2, cx, p);
    const Complex k4 = amplitude_derivative(a + dt * k3, cx, p);
    out.alpha[x] = a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return out;
}

std::array<Complex, 8> beta_coefficients(const CoherentAmplitudeSet& amps) {
  std::array<Complex, 8> beta{};
  for (int a = 0; a < 8; ++a) {
    Complex sum = 0.0;
    for (int x = 0; x < 8; ++x) {
      const int parity = std::popcount(unsigned(a & (~x & 7)));
      sum += (parity & 1) ? -amps.alpha[x] : amps.alpha[x];
    }
    beta[a] = 0.25 * sum;
  }
  return beta;
}

std::array<RateEntry, 8> measurement_rates(const std::array<Complex, 8>& beta,
                                           double phi) {
  std::array<RateEntry, 8> out{};
  for (int a = 0; a < 8; ++a) {
    const double theta = std::arg(beta[a]);
    const double c = std::cos(phi - theta);
    out[a] = {std::norm(beta[a]) * c * c, theta};
  }
  return out;
}

MeasurementModel build_measurement_operators(const CoherentAmplitudeSet& amps,
                                             const SystemParams& p) {
  MeasurementModel m;
  m.beta = beta_coefficients(amps);
  m.rates = measurement_rates(m.beta, p.phi);

  const Complex lo = std::polar(1.0, -p.phi);
  for (int x = 0; x < 8; ++x) {
    const Complex rotated = amps.alpha[x] * lo;
    m.c_phi_diag(x) = rotated.real();
    m.c_quad_diag(x) = -rotated.imag();
  }

  // signed roots by their alpha combinations; the triple-z coefficient is the
  // negated beta_111 so that both closed forms of c_0 agree
  m.sqrt_gamma0 = m.beta[0b100];
  m.sqrt_gamma1 = -m.beta[0b111];
  m.sqrt_gamma2 = Complex(0, 1) * m.beta[0b011];

  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      const Complex cross = amps.alpha[x] * std::conj(amps.alpha[y]);
      const double dchi = amps.chi_x[x] - amps.chi_x[y];
      m.dephasing(x, y) = dchi * cross.imag();
      m.stark(x, y) = dchi * cross.real();
    }
  return m;
}

QubitOperator MeasurementModel::c_phi_operator() const {
  QubitOperator op = QubitOperator::Zero();
  for (int x = 0; x < 8; ++x) op(x, x) = c_phi_diag(x);
  return op;
}

QubitOperator MeasurementModel::c_quadrature_operator() const {
  QubitOperator op = QubitOperator::Zero();
  for (int x = 0; x < 8; ++x) op(x, x) = c_quad_diag(x);
  return op;
}

SteadyRates steady_rate_formulas(double chi_over_kappa, const SystemParams& p) {
  const double u = chi_over_kappa;
  const double u2 = u * u;
  const double poly = 1.0 + 40.0 * u2 + 144.0 * u2 * u2;
  const double gm = 64.0 * p.epsilon * p.epsilon * u2 / p.kappa;  // eps in kappa units
  const double root_gm = std::sqrt(gm);
  return {root_gm * (1.0 + 12.0 * u2) / poly, root_gm * 24.0 * u2 / poly,
          root_gm * (-4.0 * u) / poly, gm};
}

double measurement_to_dephasing_ratio(int x, int y,
                                      const CoherentAmplitudeSet& amps,
                                      const SystemParams& p) {
  const double dchi = amps.chi_x[x] - amps.chi_x[y];
  if (dchi == 0.0)
    throw std::invalid_argument("ratio undefined for a degenerate pair");
  // denominator written with the conjugation order that makes the pair
  // dephasing rate positive
  const double denom =
      -dchi * (amps.alpha[x] * std::conj(amps.alpha[y])).imag();
  const double num = p.kappa * std::norm(amps.alpha[x] - amps.alpha[y]);
  return num / denom;
}

double outcome_separation(double chi_over_kappa, const SystemParams& p) {
  const SteadyRates r = steady_rate_formulas(chi_over_kappa, p);
  // signed variant: the beta-route sqrt(G0), sqrt(G1) for chi < 0 coincide
  // with the closed forms above
  return (2.0 * r.sqrt_kappa_gamma0 - 2.0 * r.sqrt_kappa_gamma1) /
         std::sqrt(p.kappa);
}

}  // namespace wsim
