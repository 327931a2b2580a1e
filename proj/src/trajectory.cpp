#include "wsim/trajectory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kernel.hpp"
#include "wsim/feedback.hpp"

namespace wsim {

namespace {

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// sparse view of an 8-vector for the per-step gradient evaluation
struct SparseVec {
  int n = 0;
  int idx[8];
  Complex val[8];
};

SparseVec sparsify(const Vector8c& v) {
  SparseVec s;
  for (int i = 0; i < 8; ++i)
    if (std::abs(v(i)) > 1e-14) {
      s.idx[s.n] = i;
      s.val[s.n++] = v(i);
    }
  return s;
}

// 2 Im <v_j| rho |target> for the three flip directions
void gradient_flat(const detail::Rho64& rho, const SparseVec& tgt,
                   const SparseVec vj[3], std::array<double, 3>& g) {
  Complex rt[8];
  for (int a = 0; a < 8; ++a) {
    Complex acc = 0;
    for (int k = 0; k < tgt.n; ++k) acc += rho[a * 8 + tgt.idx[k]] * tgt.val[k];
    rt[a] = acc;
  }
  for (int j = 0; j < 3; ++j) {
    Complex acc = 0;
    for (int k = 0; k < vj[j].n; ++k)
      acc += std::conj(vj[j].val[k]) * rt[vj[j].idx[k]];
    g[j] = 2.0 * acc.imag();
  }
}

double fidelity_flat(const detail::Rho64& rho, const SparseVec& tgt) {
  Complex acc = 0;
  for (int a = 0; a < tgt.n; ++a)
    for (int b = 0; b < tgt.n; ++b)
      acc += std::conj(tgt.val[a]) * rho[tgt.idx[a] * 8 + tgt.idx[b]] * tgt.val[b];
  return acc.real();
}

bool amps_converged(const CoherentAmplitudeSet& amps,
                    const CoherentAmplitudeSet& steady) {
  double dev = 0;
  for (int x = 0; x < 8; ++x)
    dev = std::max(dev, std::abs(amps.alpha[x] - steady.alpha[x]));
  return dev < 1e-10;
}

}  // namespace

uint64_t trajectory_seed(uint64_t master_seed, int index) {
  return splitmix64(master_seed ^ splitmix64(uint64_t(index) + 1));
}

Matrix8c polaron_drift(const DensityMatrix& rho, const CoherentAmplitudeSet& amps,
                       const SystemParams& p, double t) {
  // literal, operator-built form; the fused kernel is tested against this
  QubitOperator h = QubitOperator::Zero();
  for (int j = 1; j <= 3; ++j) h += 0.5 * p.chi * pauli(j, PauliAxis::z);
  QubitOperator xex = QubitOperator::Zero();
  for (int i = 1; i <= 3; ++i)
    for (int j = i + 1; j <= 3; ++j)
      xex += pauli(i, PauliAxis::minus) * pauli(j, PauliAxis::plus) +
             pauli(i, PauliAxis::plus) * pauli(j, PauliAxis::minus);
  h += p.chi * xex;
  if (p.include_stray_drive && p.chi != 0.0) {
    const Complex ph = std::polar(p.epsilon * p.lambda(), p.delta() * t);
    for (int j = 1; j <= 3; ++j)
      h += ph * pauli(j, PauliAxis::plus) +
           std::conj(ph) * pauli(j, PauliAxis::minus);
  }

  Matrix8c out = Complex(0, -1) * (h * rho - rho * h);
  for (int j = 1; j <= 3; ++j)
    out += p.gamma[j - 1] * dissipator(pauli(j, PauliAxis::minus), rho);
  QubitOperator jm = pauli(1, PauliAxis::minus) + pauli(2, PauliAxis::minus) +
                     pauli(3, PauliAxis::minus);
  out += p.purcell_rate() * dissipator(jm, rho);

  const MeasurementModel m = build_measurement_operators(amps, p);
  const Matrix8c k = m.dephasing.cast<Complex>() -
                     Complex(0, 1) * m.stark.cast<Complex>();
  out += k.cwiseProduct(rho);
  return out;
}

DensityMatrix polaron_sme_step(const DensityMatrix& rho,
                               const CoherentAmplitudeSet& amps,
                               const SystemParams& p, double xi_n, double t,
                               double dt) {
  detail::StepTables tab;
  detail::build_polaron_tables(tab, amps, p);
  detail::Rho64 r;
  detail::to_flat(rho, r);
  detail::em_step(r, tab, {0, 0, 0}, xi_n, t, dt);
  detail::hygiene64(r);
  return detail::from_flat(r);
}

DensityMatrix adiabatic_sme_step(const DensityMatrix& rho, const SystemParams& p,
                                 double xi_n, double t, double dt) {
  detail::StepTables tab;
  detail::build_adiabatic_tables(tab, p);
  detail::Rho64 r;
  detail::to_flat(rho, r);
  detail::em_step(r, tab, {0, 0, 0}, xi_n, t, dt);
  detail::hygiene64(r);
  return detail::from_flat(r);
}

double homodyne_sample(const DensityMatrix& rho, const MeasurementModel& model,
                       const SystemParams& p, double xi_n) {
  double mean = 0;
  for (int x = 0; x < 8; ++x) mean += 2.0 * model.c_phi_diag(x) * rho(x, x).real();
  const double ke = p.kappa * p.eta;
  return ke * mean + std::sqrt(ke) * xi_n;
}

DensityMatrix unconditional_step(const DensityMatrix& rho,
                                 CoherentAmplitudeSet& amps,
                                 const SystemParams& p, double t, double dt) {
  detail::StepTables t0, th, t1;
  detail::build_polaron_tables(t0, amps, p);
  const CoherentAmplitudeSet half = evolve_amplitudes(amps, p, 0.5 * dt);
  detail::build_polaron_tables(th, half, p);
  const CoherentAmplitudeSet full = evolve_amplitudes(half, p, 0.5 * dt);
  detail::build_polaron_tables(t1, full, p);

  detail::Rho64 r, k1, k2, k3, k4, tmp;
  detail::to_flat(rho, r);
  detail::apply_drift(r, t0, t, k1);
  for (int i = 0; i < 64; ++i) tmp[i] = r[i] + 0.5 * dt * k1[i];
  detail::apply_drift(tmp, th, t + 0.5 * dt, k2);
  for (int i = 0; i < 64; ++i) tmp[i] = r[i] + 0.5 * dt * k2[i];
  detail::apply_drift(tmp, th, t + 0.5 * dt, k3);
  for (int i = 0; i < 64; ++i) tmp[i] = r[i] + dt * k3[i];
  detail::apply_drift(tmp, t1, t + dt, k4);
  for (int i = 0; i < 64; ++i)
    r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  detail::hygiene64(r);

  amps = full;
  return detail::from_flat(r);
}

TrajectoryRecord run_trajectory(const SystemParams& p, const PureState& initial,
                                Engine engine, const FeedbackLaw* controller,
                                double t_final, uint64_t seed, int stride) {
  p.validate();
  if (stride < 1) stride = 1;
  const double dt = p.dt;
  const long n_steps = std::lround(t_final / dt);

  TrajectoryRecord rec;
  rec.params = p;
  rec.engine = engine;
  rec.seed = seed;
  rec.stride = stride;
  rec.min_eigenvalue = 1.0;
  rec.times.reserve(size_t(n_steps / stride) + 2);

  detail::Rho64 rho;
  {
    DensityMatrix r0 = projector(initial);
    detail::to_flat(r0, rho);
  }

  // plant generator
  const CoherentAmplitudeSet steady = steady_amplitudes(p);
  CoherentAmplitudeSet amps =
      p.steady_start ? steady : CoherentAmplitudeSet::vacuum(p);
  bool amps_steady = p.steady_start;
  detail::StepTables tab;
  if (engine == Engine::polaron)
    detail::build_polaron_tables(tab, amps, p);
  else
    detail::build_adiabatic_tables(tab, p);

  // controller / filter
  const PureState target =
      controller ? controller->target : named_state(StateLabel::w_minus);
  const SparseVec tgt = sparsify(target);
  SparseVec vj[3];
  detail::Rho64 rho_hat{};
  detail::StepTables ftab;
  CoherentAmplitudeSet famps =
      p.steady_start ? steady : CoherentAmplitudeSet::vacuum(p);
  bool famps_steady = p.steady_start;
  FeedbackLaw law;
  if (controller) {
    law = *controller;
    for (int j = 0; j < 3; ++j)
      vj[j] = sparsify(pauli(j + 1, PauliAxis::x) * target);
    DensityMatrix f0 = law.filter_state;
    if (std::abs(f0.trace()) < 0.5) f0 = projector(initial);
    detail::to_flat(f0, rho_hat);
    if (law.filter_amps_ready) famps = law.filter_amps;
    if (law.filter_engine == Engine::polaron)
      detail::build_polaron_tables(ftab, famps, p);
    else
      detail::build_adiabatic_tables(ftab, p);
  }

  NoiseProcess noise(seed, dt);
  const double sqrt_keta = std::sqrt(p.kappa * p.eta);
  const double kappa_eta = p.kappa * p.eta;

  std::array<double, 3> f{0, 0, 0};
  std::array<double, 3> g{0, 0, 0};

  auto record_sample = [&](double time, double current) {
    rec.times.push_back(time);
    rec.fidelity.push_back(fidelity_flat(rho, tgt));
    rec.expect_c.push_back(detail::expect_c(rho, tab));
    rec.current.push_back(current);
    rec.feedback.push_back(f);
    if (controller) rec.filter_fidelity.push_back(fidelity_flat(rho_hat, tgt));
    DensityMatrix m = detail::from_flat(rho);
    rec.min_eigenvalue = std::min(rec.min_eigenvalue, min_eigenvalue(m));
  };

  record_sample(0.0, 0.0);

  double t = 0.0;
  for (long n = 0; n < n_steps; ++n) {
    if (controller) {
      gradient_flat(rho_hat, tgt, vj, g);
      f = bang_bang_coefficients(g, law);
    }

    const double xi = noise.sample();
    const double current = kappa_eta * detail::expect_c(rho, tab) + sqrt_keta * xi;

    const double drift = detail::em_step(rho, tab, f, xi, t, dt);
    if (!(drift < 0.5))  // also catches NaN
      throw std::runtime_error("conditional state diverged at step " +
                               std::to_string(n));
    rec.max_trace_drift = std::max(rec.max_trace_drift, drift);

    if (controller) {
      const double fdrive =
          law.share_plant_noise
              ? xi
              : (current - kappa_eta * detail::expect_c(rho_hat, ftab)) /
                    sqrt_keta;
      const double fdrift = detail::em_step(rho_hat, ftab, f, fdrive, t, dt);
      if (!(fdrift < 0.5))
        throw std::runtime_error("filter state diverged at step " +
                                 std::to_string(n));
    }

    // advance the cavity amplitudes feeding the polaron generators
    if (engine == Engine::polaron && !amps_steady) {
      amps = evolve_amplitudes(amps, p, dt);
      if (amps_converged(amps, steady)) {
        amps = steady;
        amps_steady = true;
      }
      detail::build_polaron_tables(tab, amps, p);
    }
    if (controller && law.filter_engine == Engine::polaron && !famps_steady) {
      famps = evolve_amplitudes(famps, p, dt);
      if (amps_converged(famps, steady)) {
        famps = steady;
        famps_steady = true;
      }
      detail::build_polaron_tables(ftab, famps, p);
    }

    t = (n + 1) * dt;
    if ((n + 1) % stride == 0 || n + 1 == n_steps) {
      detail::hygiene64(rho);
      if (controller) detail::hygiene64(rho_hat);
      record_sample(t, current);
    }
  }

  rec.final_state = detail::from_flat(rho);
  return rec;
}

}  // namespace wsim
