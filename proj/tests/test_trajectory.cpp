#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "wsim/feedback.hpp"
#include "wsim/trajectory.hpp"

using namespace wsim;

namespace {

DensityMatrix random_density(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix8c m;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) m(i, j) = Complex(u(rng), u(rng));
  DensityMatrix rho = m * m.adjoint();
  rho /= rho.trace();
  return rho;
}

// literal adiabatic-limit drift built from operators, for kernel comparison
Matrix8c adiabatic_reference_drift(const DensityMatrix& rho,
                                   const SystemParams& p) {
  const double nbar = 4.0 * p.epsilon * p.epsilon / (p.kappa * p.kappa);
  QubitOperator h = QubitOperator::Zero();
  QubitOperator sz_sum = QubitOperator::Zero();
  QubitOperator jm = QubitOperator::Zero();
  for (int j = 1; j <= 3; ++j) {
    sz_sum += pauli(j, PauliAxis::z);
    jm += pauli(j, PauliAxis::minus);
  }
  h += (0.5 * p.chi + p.chi * nbar) * sz_sum;
  for (int i = 1; i <= 3; ++i)
    for (int j = i + 1; j <= 3; ++j)
      h += p.chi * (pauli(i, PauliAxis::minus) * pauli(j, PauliAxis::plus) +
                    pauli(i, PauliAxis::plus) * pauli(j, PauliAxis::minus));

  Matrix8c out = Complex(0, -1) * (h * rho - rho * h);
  for (int j = 1; j <= 3; ++j)
    out += p.gamma[j - 1] * dissipator(pauli(j, PauliAxis::minus), rho);
  out += p.purcell_rate() * dissipator(jm, rho);
  out += 0.5 * (0.5 * p.gamma_m()) * dissipator(sz_sum, rho);
  return out;
}

}  // namespace

TEST_CASE("fused polaron step matches the literal drift (xi = 0)") {
  SystemParams p;
  p.gamma = {4e-3, 6e-3, 8e-3};  // break the symmetry on purpose

  // mid-transient amplitudes so the time-dependent pieces are exercised
  auto amps = CoherentAmplitudeSet::vacuum(p);
  for (int n = 0; n < 2000; ++n) amps = evolve_amplitudes(amps, p, 1e-3);

  for (uint64_t s : {1ull, 2ull, 3ull}) {
    const DensityMatrix rho = random_density(s);
    const double dt = 1e-3;
    const DensityMatrix stepped = polaron_sme_step(rho, amps, p, 0.0, 0.0, dt);
    const DensityMatrix expected = rho + dt * polaron_drift(rho, amps, p, 0.0);
    CHECK((stepped - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("fused polaron step matches the literal drift with stray drive") {
  SystemParams p;
  p.include_stray_drive = true;
  const auto amps = steady_amplitudes(p);
  const DensityMatrix rho = random_density(7);
  const double dt = 1e-3, t = 0.37;
  const DensityMatrix stepped = polaron_sme_step(rho, amps, p, 0.0, t, dt);
  const DensityMatrix expected = rho + dt * polaron_drift(rho, amps, p, t);
  CHECK((stepped - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("noise term equals the measurement superoperators") {
  SystemParams p;
  const auto amps = steady_amplitudes(p);
  const auto model = build_measurement_operators(amps, p);
  const DensityMatrix rho = random_density(11);
  const double dt = 1e-3, xi = 1.37;

  const DensityMatrix stepped = polaron_sme_step(rho, amps, p, xi, 0.0, dt);
  const Matrix8c c0 = model.c_phi_operator();
  const Matrix8c cq = model.c_quadrature_operator();
  DensityMatrix expected = rho + dt * polaron_drift(rho, amps, p, 0.0);
  const double w = std::sqrt(p.kappa * p.eta) * xi * dt;
  expected += w * measurement_superop(c0, rho);
  expected += w * Complex(0, -1) * (cq * rho - rho * cq);
  expected /= expected.trace().real();
  CHECK((stepped - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("fused adiabatic step matches its literal drift") {
  SystemParams p;
  p.gamma = {4e-3, 6e-3, 8e-3};
  const DensityMatrix rho = random_density(5);
  const double dt = 1e-3;
  const DensityMatrix stepped = adiabatic_sme_step(rho, p, 0.0, 0.0, dt);
  const DensityMatrix expected = rho + dt * adiabatic_reference_drift(rho, p);
  CHECK((stepped - expected).cwiseAbs().maxCoeff() < 1e-13);

  // with noise: H[c0] with c0 = sqrt(Gm/k)/2 sum sz
  const double xi = -0.83;
  QubitOperator sz_sum = QubitOperator::Zero();
  for (int j = 1; j <= 3; ++j) sz_sum += pauli(j, PauliAxis::z);
  const QubitOperator c0 = 0.5 * std::sqrt(p.gamma_m() / p.kappa) * sz_sum;
  DensityMatrix with_noise = rho + dt * adiabatic_reference_drift(rho, p);
  with_noise += std::sqrt(p.kappa * p.eta) * xi * dt * measurement_superop(c0, rho);
  with_noise /= with_noise.trace().real();
  const DensityMatrix stepped2 = adiabatic_sme_step(rho, p, xi, 0.0, dt);
  CHECK((stepped2 - with_noise).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("homodyne sample") {
  SystemParams p;
  p.eta = 0.4;
  const auto model = build_measurement_operators(steady_amplitudes(p), p);
  const DensityMatrix rho = projector(named_state(StateLabel::excited));
  // I = k eta <c+c^dag> + sqrt(k eta) xi; on |111> the mean is 3.6779047
  const double i0 = homodyne_sample(rho, model, p, 0.0);
  CHECK(i0 == doctest::Approx(0.4 * 3.6779047).epsilon(1e-6));
  const double i1 = homodyne_sample(rho, model, p, 2.0);
  CHECK(i1 - i0 == doctest::Approx(std::sqrt(0.4) * 2.0).epsilon(1e-12));
}

TEST_CASE("ground state is stationary under the unconditional equation") {
  SystemParams p;
  CoherentAmplitudeSet amps = steady_amplitudes(p);
  DensityMatrix rho = projector(named_state(StateLabel::ground));
  for (int n = 0; n < 200; ++n)
    rho = unconditional_step(rho, amps, p, n * p.dt, p.dt);
  CHECK((rho - projector(named_state(StateLabel::ground))).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("unconditional RK4 step agrees with an independent integration") {
  SystemParams p;
  // independent: Euler at much finer dt on the literal drift
  DensityMatrix rho_ref = projector(named_state(StateLabel::separable_plus));
  auto amps_ref = CoherentAmplitudeSet::vacuum(p);
  const double fine = 2.5e-5;
  const double t_end = 0.5;
  const long n_fine = std::lround(t_end / fine);
  for (long n = 0; n < n_fine; ++n) {
    rho_ref += fine * polaron_drift(rho_ref, amps_ref, p, n * fine);
    amps_ref = evolve_amplitudes(amps_ref, p, fine);
  }

  DensityMatrix rho = projector(named_state(StateLabel::separable_plus));
  auto amps = CoherentAmplitudeSet::vacuum(p);
  const double dt = 1e-3;
  for (long n = 0; n < std::lround(t_end / dt); ++n)
    rho = unconditional_step(rho, amps, p, n * dt, dt);

  CHECK((rho - rho_ref).cwiseAbs().maxCoeff() < 5e-5);  // Euler reference is O(dt)
  CHECK(std::abs(rho.trace() - Complex(1.0)) < 1e-12);
  // amplitude co-evolution stayed in sync
  for (int x = 0; x < 8; ++x)
    CHECK(std::abs(amps.alpha[x] - amps_ref.alpha[x]) < 1e-8);
}

TEST_CASE("trajectory collapse statistics from the separable state") {
  SystemParams p;
  p.gamma = {0, 0, 0};
  const PureState psi = named_state(StateLabel::separable_plus);
  const auto model = build_measurement_operators(steady_amplitudes(p), p);
  const double plateau[4] = {2 * model.c_phi_diag(7), 2 * model.c_phi_diag(3),
                             2 * model.c_phi_diag(1), 2 * model.c_phi_diag(0)};

  const int n_traj = 200;
  int counts[4] = {0, 0, 0, 0};
  double w_minus_fid_sum = 0;
  int w_minus_n = 0;
  double worst_eig = 0, worst_drift = 0;

  for (int i = 0; i < n_traj; ++i) {
    const auto rec = run_trajectory(p, psi, Engine::polaron, nullptr, 10.0,
                                    trajectory_seed(99, i), 100);
    // average the outcome signal over the final 20% of the run
    const size_t n = rec.times.size();
    double avg = 0;
    size_t m = 0;
    for (size_t k = n - n / 5; k < n; ++k, ++m) avg += rec.expect_c[k];
    avg /= double(m);
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (std::abs(avg - plateau[c]) < std::abs(avg - plateau[best])) best = c;
    REQUIRE(std::abs(avg - plateau[best]) < 1.0);  // half the minimum gap
    ++counts[best];
    if (best == 2) {
      w_minus_fid_sum += rec.fidelity.back();
      ++w_minus_n;
    }
    worst_eig = std::min(worst_eig, rec.min_eigenvalue);
    worst_drift = std::max(worst_drift, rec.max_trace_drift);
  }

  // binomial 3 sigma around {25, 75, 75, 25}
  CHECK(std::abs(counts[0] - 25) <= 15);
  CHECK(std::abs(counts[1] - 75) <= 21);
  CHECK(std::abs(counts[2] - 75) <= 21);
  CHECK(std::abs(counts[3] - 25) <= 15);

  // collapsed W- trajectories purify onto the target
  REQUIRE(w_minus_n > 0);
  CHECK(w_minus_fid_sum / w_minus_n > 0.95);

  // integrator hygiene stayed sane
  CHECK(worst_drift < 1e-2);
  CHECK(worst_eig > -1e-2);
}

TEST_CASE("polaron and adiabatic engines agree for small chi, same noise") {
  // compare from the target state: from a superposition both engines undergo
  // stochastic collapse, and near the basin boundary the tiny O(chi^2) model
  // difference flips outcomes, which says nothing about the models themselves
  auto sup_distance = [](double chi, uint64_t seed) {
    SystemParams p;
    p.chi = chi;
    p.steady_start = true;
    const auto amps = steady_amplitudes(p);
    DensityMatrix ra = projector(named_state(StateLabel::w_minus));
    DensityMatrix rb = ra;
    NoiseProcess noise(seed, p.dt);
    double dmax = 0;
    const long n = std::lround(50.0 / p.dt);
    for (long k = 0; k < n; ++k) {
      const double xi = noise.sample();
      ra = polaron_sme_step(ra, amps, p, xi, k * p.dt, p.dt);
      rb = adiabatic_sme_step(rb, p, xi, k * p.dt, p.dt);
      if (k % 100 == 99) {
        Eigen::SelfAdjointEigenSolver<Matrix8c> es(ra - rb);
        dmax = std::max(dmax, 0.5 * es.eigenvalues().cwiseAbs().sum());
      }
    }
    return dmax;
  };

  CHECK(sup_distance(-0.01, trajectory_seed(11, 0)) < 1e-2);
  CHECK(sup_distance(-0.01, trajectory_seed(11, 1)) < 1e-2);
  // by chi = -0.05 the same comparison visibly diverges
  CHECK(sup_distance(-0.05, trajectory_seed(11, 0)) > 1e-2);
}

TEST_CASE("same seed reproduces the trajectory exactly") {
  SystemParams p;
  const PureState psi = named_state(StateLabel::separable_plus);
  const auto a = run_trajectory(p, psi, Engine::polaron, nullptr, 3.0, 1234, 50);
  const auto b = run_trajectory(p, psi, Engine::polaron, nullptr, 3.0, 1234, 50);
  REQUIRE(a.fidelity.size() == b.fidelity.size());
  for (size_t k = 0; k < a.fidelity.size(); ++k) {
    CHECK(a.fidelity[k] == b.fidelity[k]);
    CHECK(a.current[k] == b.current[k]);
  }
  CHECK((a.final_state - b.final_state).cwiseAbs().maxCoeff() == 0.0);

  // different index: different stream
  CHECK(trajectory_seed(1234, 0) != trajectory_seed(1234, 1));
  CHECK(trajectory_seed(1234, 0) != trajectory_seed(1235, 0));
  // derivation is a pure function
  CHECK(trajectory_seed(1234, 7) == trajectory_seed(1234, 7));
}
