#pragma once
// Fused 8x8 step kernel shared by the polaron and adiabatic engines.
// Internal to the library; the public reference implementations live in
// trajectory.cpp and are tested against this path.
//
// State is a flat row-major array rho[i*8+j].  Both engines share the same
// drift shape:
//
//   cell terms      : [-i(Hd_i - Hd_j) + K_ij - damping_ij] rho_ij
//   jump refills    : gamma_q sm_q rho sp_q  and the collective Purcell sum
//   exchange        : -i chi [X, rho] - (purcell/2) {X, rho}   (X = pair swaps)
//   stray drive     : -i eps*lambda [sum_j (sp_j e^{i D t} + h.c.), rho]
//
// and the same noise shape sqrt(k eta) (H[c0] - i[cq, .]) rho xi dt with both
// quadrature operators real and diagonal.
//
// The bang-bang drive is NOT part of the Euler drift: an explicit Euler step
// of -i[f sigma^x, rho] amplifies every coherence by |1 - i dt w| > 1, so at
// |f| ~ 2 the map inflates the state by ~exp(f^2 dt t) and positivity is gone
// long before t ~ 100.  The three sigma_j^x terms commute, so the feedback
// unitary is available in closed form and is applied exactly after the
// diffusive update (first-order splitting).

#include <array>
#include <cmath>

#include "wsim/cavity.hpp"

namespace wsim::detail {

using Rho64 = std::array<Complex, 64>;

// exchange adjacency: states reachable by one excitation swap
inline constexpr int kNbrCount[8] = {0, 2, 2, 2, 2, 2, 2, 0};
inline constexpr int kNbr[8][2] = {{0, 0}, {2, 4}, {1, 4}, {5, 6},
                                   {1, 2}, {3, 6}, {3, 5}, {0, 0}};

struct StepTables {
  std::array<Complex, 64> cell{};  // deterministic per-cell factor
  std::array<Complex, 64> smat{};  // (c0_i + c0_j) - i (cq_i - cq_j)
  std::array<double, 8> c0{};      // measured quadrature diagonal
  double sqrt_keta = 0;
  double kappa_eta = 0;
  std::array<double, 3> gamma{};
  double purcell = 0;
  double exchange = 0;
  bool stray = false;
  double stray_amp = 0;
  double stray_delta = 0;
};

inline void fill_common(StepTables& t, const std::array<double, 8>& hd,
                        const std::array<double, 8>& c0,
                        const std::array<double, 8>& cq,
                        const Matrix8c& kmat, const SystemParams& p) {
  t.sqrt_keta = std::sqrt(p.kappa * p.eta);
  t.kappa_eta = p.kappa * p.eta;
  t.gamma = p.gamma;
  t.purcell = p.purcell_rate();
  t.c0 = c0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double damp = 0;
      for (int q = 0; q < 3; ++q) {
        const int m = 4 >> q;
        damp += 0.5 * p.gamma[q] * ((i & m) ? 1 : 0) + 0.5 * p.gamma[q] * ((j & m) ? 1 : 0);
      }
      damp += 0.5 * t.purcell * (excitation_number(i) + excitation_number(j));
      t.cell[i * 8 + j] = Complex(0, -(hd[i] - hd[j])) + kmat(i, j) - damp;
      t.smat[i * 8 + j] = Complex(c0[i] + c0[j], -(cq[i] - cq[j]));
    }
}

inline void build_polaron_tables(StepTables& t, const CoherentAmplitudeSet& amps,
                                 const SystemParams& p) {
  std::array<double, 8> hd, c0, cq;
  Matrix8c kmat;
  const Complex lo = std::polar(1.0, -p.phi);
  for (int x = 0; x < 8; ++x) {
    hd[x] = 0.5 * amps.chi_x[x];
    const Complex r = amps.alpha[x] * lo;
    c0[x] = r.real();
    cq[x] = -r.imag();
  }
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y)
      // Gamma_d - i A_c = -i (chi_x - chi_y) alpha_x alpha_y^*
      kmat(x, y) = Complex(0, -(amps.chi_x[x] - amps.chi_x[y])) *
                   (amps.alpha[x] * std::conj(amps.alpha[y]));
  t.exchange = p.chi;
  t.stray = p.include_stray_drive && p.chi != 0.0;
  if (t.stray) {
    t.stray_amp = p.epsilon * p.lambda();
    t.stray_delta = p.delta();
  }
  fill_common(t, hd, c0, cq, kmat, p);
}

inline void build_adiabatic_tables(StepTables& t, const SystemParams& p) {
  std::array<double, 8> hd, c0, cq{};
  Matrix8c kmat;
  const double nbar = 4.0 * p.epsilon * p.epsilon / (p.kappa * p.kappa);
  const double stark = 0.5 * p.chi + p.chi * nbar;
  const double gm = p.gamma_m();
  const double ge = 0.5 * gm;
  const double half_root = 0.5 * std::sqrt(gm / p.kappa);
  for (int x = 0; x < 8; ++x) {
    const double esz = 2.0 * excitation_number(x) - 3.0;
    hd[x] = stark * esz;
    c0[x] = half_root * esz;
  }
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      const double dz = (2.0 * excitation_number(x) - 3.0) -
                        (2.0 * excitation_number(y) - 3.0);
      kmat(x, y) = -0.25 * ge * dz * dz;
    }
  t.exchange = p.chi;
  t.stray = p.include_stray_drive && p.chi != 0.0;
  if (t.stray) {
    t.stray_amp = p.epsilon * p.lambda();
    t.stray_delta = p.delta();
  }
  fill_common(t, hd, c0, cq, kmat, p);
}

inline double expect_c(const Rho64& rho, const StepTables& t) {
  double m = 0;
  for (int x = 0; x < 8; ++x) m += t.c0[x] * rho[x * 9].real();
  return 2.0 * m;
}

// deterministic generator applied to rho, result written into out (no noise,
// no hygiene); shared by the RK4 unconditional path and the Euler step below
inline void apply_drift(const Rho64& rho, const StepTables& t, double time,
                        Rho64& out) {
  for (int idx = 0; idx < 64; ++idx) out[idx] = t.cell[idx] * rho[idx];

  // decay refills: sigma_q^- rho sigma_r^+ with rate gamma_q (q==r) plus the
  // collective purcell channel for every (q,r)
  for (int q = 0; q < 3; ++q) {
    const int mq = 4 >> q;
    for (int r = 0; r < 3; ++r) {
      const int mr = 4 >> r;
      const double rate = (q == r ? t.gamma[q] + t.purcell : t.purcell);
      if (rate == 0.0) continue;
      for (int i = 0; i < 8; ++i) {
        if (i & mq) continue;
        for (int j = 0; j < 8; ++j) {
          if (j & mr) continue;
          out[i * 8 + j] += rate * rho[(i | mq) * 8 + (j | mr)];
        }
      }
    }
  }

  // exchange Hamiltonian and the off-diagonal part of the collective damping:
  // -i ex (X rho - rho X) - (purcell/2)(X rho + rho X)
  if (t.exchange != 0.0 || t.purcell != 0.0) {
    const Complex cl(-0.5 * t.purcell, -t.exchange);  // multiplies X rho
    const Complex cr(-0.5 * t.purcell, t.exchange);   // multiplies rho X
    for (int i = 0; i < 8; ++i) {
      if (kNbrCount[i]) {
        const int a = kNbr[i][0], b = kNbr[i][1];
        for (int j = 0; j < 8; ++j)
          out[i * 8 + j] += cl * (rho[a * 8 + j] + rho[b * 8 + j]);
      }
    }
    for (int j = 0; j < 8; ++j) {
      if (!kNbrCount[j]) continue;
      const int a = kNbr[j][0], b = kNbr[j][1];
      for (int i = 0; i < 8; ++i)
        out[i * 8 + j] += cr * (rho[i * 8 + a] + rho[i * 8 + b]);
    }
  }

  // stray sigma_x drive left over from the frame choice, far detuned
  if (t.stray) {
    const Complex z = t.stray_amp * std::polar(1.0, t.stray_delta * time);
    const Complex zc = std::conj(z);
    for (int q = 0; q < 3; ++q) {
      const int mq = 4 >> q;
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          // H rho: row mixing, rho H: column mixing
          const Complex hr = (i & mq) ? z * rho[(i & ~mq) * 8 + j]
                                      : zc * rho[(i | mq) * 8 + j];
          const Complex rh = (j & mq) ? zc * rho[i * 8 + (j & ~mq)]
                                      : z * rho[i * 8 + (j | mq)];
          out[i * 8 + j] += Complex(0, -1) * (hr - rh);
        }
    }
  }
}

// exact conjugation by prod_q exp(-i f_q dt sigma_q^x); the terms commute
inline void apply_x_rotations(Rho64& rho, const std::array<double, 3>& f,
                              double dt) {
  for (int q = 0; q < 3; ++q) {
    if (f[q] == 0.0) continue;
    const double c = std::cos(f[q] * dt), s = std::sin(f[q] * dt);
    const double cc = c * c, ss = s * s, cs = c * s;
    const int mq = 4 >> q;
    const Rho64 r = rho;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        rho[i * 8 + j] = cc * r[i * 8 + j] + ss * r[(i ^ mq) * 8 + (j ^ mq)] +
                         Complex(0, cs) *
                             (r[i * 8 + (j ^ mq)] - r[(i ^ mq) * 8 + j]);
  }
}

// one Euler-Maruyama step in place; xi is the white-noise sample N(0,1)/sqrt(dt).
// Returns |tr-1| before the renormalization it applies.
inline double em_step(Rho64& rho, const StepTables& t,
                      const std::array<double, 3>& f, double xi, double time,
                      double dt) {
  Rho64 dr;
  apply_drift(rho, t, time, dr);
  const double m = expect_c(rho, t);  // <c0 + c0^dag>
  const double w = t.sqrt_keta * xi * dt;
  double trace = 0;
  for (int idx = 0; idx < 64; ++idx) {
    const Complex n = (t.smat[idx] - m) * rho[idx];
    rho[idx] += dt * dr[idx] + w * n;
    if ((idx & 7) == (idx >> 3)) trace += rho[idx].real();
  }
  apply_x_rotations(rho, f, dt);  // trace-preserving, so the renorm below holds
  const double inv = 1.0 / trace;
  for (int idx = 0; idx < 64; ++idx) rho[idx] *= inv;
  return std::abs(trace - 1.0);
}

// restore exact hermiticity (cheap; called at sample points)
inline double hygiene64(Rho64& rho) {
  double tr = 0;
  for (int i = 0; i < 8; ++i) {
    rho[i * 9] = Complex(rho[i * 9].real(), 0.0);
    tr += rho[i * 9].real();
    for (int j = i + 1; j < 8; ++j) {
      const Complex avg = 0.5 * (rho[i * 8 + j] + std::conj(rho[j * 8 + i]));
      rho[i * 8 + j] = avg;
      rho[j * 8 + i] = std::conj(avg);
    }
  }
  const double drift = std::abs(tr - 1.0);
  for (int idx = 0; idx < 64; ++idx) rho[idx] /= tr;
  return drift;
}

inline void to_flat(const DensityMatrix& m, Rho64& r) {
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) r[i * 8 + j] = m(i, j);
}

inline DensityMatrix from_flat(const Rho64& r) {
  DensityMatrix m;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) m(i, j) = r[i * 8 + j];
  return m;
}

}  // namespace wsim::detail
