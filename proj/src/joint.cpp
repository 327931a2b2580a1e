#include "wsim/joint.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kernel.hpp"

namespace wsim {

namespace {

inline size_t block_offset(int x, int y, int n) {
  return size_t((x * 8 + y) * n) * n;
}

double joint_trace(const JointState& s) {
  const int n = s.n_fock;
  double tr = 0;
  for (int x = 0; x < 8; ++x) {
    const Complex* b = s.elements.data() + block_offset(x, x, n);
    for (int m = 0; m < n; ++m) tr += b[m * n + m].real();
  }
  return tr;
}

// hermitize across the block structure and renormalize; returns |tr-1|
double joint_hygiene(JointState& s) {
  const int n = s.n_fock;
  for (int x = 0; x < 8; ++x)
    for (int y = x; y < 8; ++y) {
      Complex* a = s.elements.data() + block_offset(x, y, n);
      Complex* b = s.elements.data() + block_offset(y, x, n);
      for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) {
          const Complex avg = 0.5 * (a[m * n + k] + std::conj(b[k * n + m]));
          a[m * n + k] = avg;
          b[k * n + m] = std::conj(avg);
        }
    }
  const double tr = joint_trace(s);
  const double drift = std::abs(tr - 1.0);
  for (auto& z : s.elements) z /= tr;
  return drift;
}

// rho += dt*drift + w*(lo a rho + lo* rho a^dag - <c> rho); returns |tr-1|
// before the renormalization it applies
double em_joint_inplace(JointState& s, const JointGenerator& g,
                        JointState& scratch, double xi, double t, double dt) {
  joint_drift(s, g, t, scratch);
  const double mean = joint_expectation_c(s, g);
  const double w = g.sqrt_keta * xi * dt;
  const int n = s.n_fock;
  const Complex lo = g.lo, loc = std::conj(g.lo);
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      Complex* b = s.elements.data() + block_offset(x, y, n);
      const Complex* d = scratch.elements.data() + block_offset(x, y, n);
      for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) {
          const size_t i = size_t(m) * n + k;
          Complex noise = -mean * b[i];
          if (m + 1 < n) noise += lo * g.sq[m] * b[i + n];
          if (k + 1 < n) noise += loc * g.sq[k] * b[i + 1];
          b[i] += dt * d[i] + w * noise;
        }
    }
  const double tr = joint_trace(s);
  const double drift = std::abs(tr - 1.0);
  for (auto& z : s.elements) z /= tr;
  return drift;
}

void check_monitor(const JointState& s, double& worst) {
  const double pop = top_fock_population(s);
  worst = std::max(worst, pop);
  if (pop > 1e-4)
    throw std::runtime_error(
        "photon-space truncation breached: top two Fock levels hold " +
        std::to_string(pop) + " with n_fock = " + std::to_string(s.n_fock));
}

}  // namespace

JointState JointState::qubits_with_vacuum(const PureState& psi, int n_fock) {
  JointState s;
  s.n_fock = n_fock;
  s.elements.assign(size_t(64) * n_fock * n_fock, Complex(0, 0));
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y)
      s.at(x, y, 0, 0) = psi(x) * std::conj(psi(y));
  return s;
}

int minimum_fock_dimension(const SystemParams& p) {
  const auto amps = steady_amplitudes(p);
  double worst = 0;
  for (const auto& a : amps.alpha) worst = std::max(worst, std::norm(a));
  return std::max(4, int(std::ceil(4.0 * worst)));
}

JointGenerator build_joint_generator(const SystemParams& p, int n_fock) {
  p.validate();
  const int need = minimum_fock_dimension(p);
  if (n_fock < need)
    throw std::invalid_argument("n_fock = " + std::to_string(n_fock) +
                                " below the coherent-support minimum " +
                                std::to_string(need));
  JointGenerator g;
  g.params = p;
  g.n_fock = n_fock;
  for (int x = 0; x < 8; ++x) {
    g.chi_x[x] = chi_of_state(x, p);
    g.qdiag[x] = 0.5 * g.chi_x[x];
    double d = 0;
    for (int q = 0; q < 3; ++q)
      if (x & (4 >> q)) d += 0.5 * p.gamma[q];
    g.damp[x] = d;
  }
  g.sq.resize(n_fock);
  for (int m = 0; m < n_fock; ++m) g.sq[m] = std::sqrt(double(m + 1));
  g.sqrt_keta = std::sqrt(p.kappa * p.eta);
  g.kappa_eta = p.kappa * p.eta;
  g.lo = std::polar(1.0, -p.phi);
  return g;
}

void joint_drift(const JointState& s, const JointGenerator& g, double t,
                 JointState& out) {
  const int n = g.n_fock;
  const SystemParams& p = g.params;
  out.n_fock = n;
  out.elements.resize(s.elements.size());

  const bool stray = p.include_stray_drive && p.chi != 0.0;
  const Complex z =
      stray ? p.epsilon * p.lambda() * std::polar(1.0, p.delta() * t)
            : Complex(0, 0);
  const Complex zc = std::conj(z);

  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      const Complex* b = s.elements.data() + block_offset(x, y, n);
      Complex* o = out.elements.data() + block_offset(x, y, n);

      // dispersive + qubit diagonal + cavity decay anticommutator + qubit damp
      const double dq = g.qdiag[x] - g.qdiag[y];
      const double dmp = g.damp[x] + g.damp[y];
      for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) {
          const double freq = g.chi_x[x] * m - g.chi_x[y] * k + dq;
          o[size_t(m) * n + k] =
              Complex(-0.5 * p.kappa * (m + k) - dmp, -freq) *
              b[size_t(m) * n + k];
        }

      // drive -i eps [a + a^dag, .] (row then column ladder mixing)
      for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) {
          Complex h(0, 0);
          if (m + 1 < n) h += g.sq[m] * b[size_t(m + 1) * n + k];
          if (m > 0) h += g.sq[m - 1] * b[size_t(m - 1) * n + k];
          if (k + 1 < n) h -= g.sq[k] * b[size_t(m) * n + k + 1];
          if (k > 0) h -= g.sq[k - 1] * b[size_t(m) * n + k - 1];
          o[size_t(m) * n + k] += Complex(0, -p.epsilon) * h;
        }

      // kappa a rho a^dag refill
      for (int m = 0; m + 1 < n; ++m)
        for (int k = 0; k + 1 < n; ++k)
          o[size_t(m) * n + k] +=
              p.kappa * g.sq[m] * g.sq[k] * b[size_t(m + 1) * n + k + 1];

      // qubit decay refills from the doubly-raised block
      for (int q = 0; q < 3; ++q) {
        const int mq = 4 >> q;
        if ((x & mq) || (y & mq) || p.gamma[q] == 0.0) continue;
        const Complex* up = s.elements.data() + block_offset(x | mq, y | mq, n);
        for (size_t i = 0; i < size_t(n) * n; ++i) o[i] += p.gamma[q] * up[i];
      }

      // exchange interaction -i chi [X, .]
      if (p.chi != 0.0) {
        if (detail::kNbrCount[x]) {
          const Complex* ba =
              s.elements.data() + block_offset(detail::kNbr[x][0], y, n);
          const Complex* bb =
              s.elements.data() + block_offset(detail::kNbr[x][1], y, n);
          for (size_t i = 0; i < size_t(n) * n; ++i)
            o[i] += Complex(0, -p.chi) * (ba[i] + bb[i]);
        }
        if (detail::kNbrCount[y]) {
          const Complex* ba =
              s.elements.data() + block_offset(x, detail::kNbr[y][0], n);
          const Complex* bb =
              s.elements.data() + block_offset(x, detail::kNbr[y][1], n);
          for (size_t i = 0; i < size_t(n) * n; ++i)
            o[i] += Complex(0, p.chi) * (ba[i] + bb[i]);
        }
      }

      // far-detuned stray qubit drive
      if (stray) {
        for (int q = 0; q < 3; ++q) {
          const int mq = 4 >> q;
          const Complex* hr =
              s.elements.data() +
              block_offset((x & mq) ? (x & ~mq) : (x | mq), y, n);
          const Complex* rh =
              s.elements.data() +
              block_offset(x, (y & mq) ? (y & ~mq) : (y | mq), n);
          const Complex ch = (x & mq) ? z : zc;
          const Complex cr = (y & mq) ? zc : z;
          for (size_t i = 0; i < size_t(n) * n; ++i)
            o[i] += Complex(0, -1) * (ch * hr[i] - cr * rh[i]);
        }
      }
    }
}

double joint_expectation_c(const JointState& s, const JointGenerator& g) {
  // 2 Re( e^{-i phi} tr a rho )
  return 2.0 * (g.lo * cavity_amplitude(s)).real();
}

Complex cavity_amplitude(const JointState& s) {
  const int n = s.n_fock;
  Complex tr(0, 0);
  for (int x = 0; x < 8; ++x) {
    const Complex* b = s.elements.data() + block_offset(x, x, n);
    for (int m = 0; m + 1 < n; ++m)
      tr += std::sqrt(double(m + 1)) * b[size_t(m + 1) * n + m];
  }
  return tr;
}

double top_fock_population(const JointState& s) {
  const int n = s.n_fock;
  double pop = 0;
  for (int x = 0; x < 8; ++x) {
    const Complex* b = s.elements.data() + block_offset(x, x, n);
    pop += b[size_t(n - 1) * n + n - 1].real() + b[size_t(n - 2) * n + n - 2].real();
  }
  return pop;
}

JointState joint_sme_step(const JointState& s, const SystemParams& p,
                          double xi_n, double t, double dt) {
  const JointGenerator g = build_joint_generator(p, s.n_fock);
  JointState next = s, scratch;
  em_joint_inplace(next, g, scratch, xi_n, t, dt);
  joint_hygiene(next);
  double worst = 0;
  check_monitor(next, worst);
  return next;
}

JointState joint_unconditional_step(const JointState& s, const SystemParams& p,
                                    double t, double dt) {
  const JointGenerator g = build_joint_generator(p, s.n_fock);
  JointState k1, k2, k3, k4, tmp = s;
  joint_drift(s, g, t, k1);
  const size_t sz = s.elements.size();
  for (size_t i = 0; i < sz; ++i)
    tmp.elements[i] = s.elements[i] + 0.5 * dt * k1.elements[i];
  joint_drift(tmp, g, t + 0.5 * dt, k2);
  for (size_t i = 0; i < sz; ++i)
    tmp.elements[i] = s.elements[i] + 0.5 * dt * k2.elements[i];
  joint_drift(tmp, g, t + 0.5 * dt, k3);
  for (size_t i = 0; i < sz; ++i)
    tmp.elements[i] = s.elements[i] + dt * k3.elements[i];
  joint_drift(tmp, g, t + dt, k4);
  JointState next = s;
  for (size_t i = 0; i < sz; ++i)
    next.elements[i] +=
        dt / 6.0 *
        (k1.elements[i] + 2.0 * k2.elements[i] + 2.0 * k3.elements[i] +
         k4.elements[i]);
  joint_hygiene(next);
  double worst = 0;
  check_monitor(next, worst);
  return next;
}

DensityMatrix reduced_qubit_state(const JointState& s) {
  const int n = s.n_fock;
  DensityMatrix r;
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      const Complex* b = s.elements.data() + block_offset(x, y, n);
      Complex tr(0, 0);
      for (int m = 0; m < n; ++m) tr += b[size_t(m) * n + m];
      r(x, y) = tr;
    }
  r = 0.5 * (r + r.adjoint().eval());
  r /= r.trace().real();
  return r;
}

JointRecord run_joint_trajectory(const SystemParams& p, const PureState& initial,
                                 int n_fock, double t_final, uint64_t seed,
                                 int stride, double dt) {
  const JointGenerator g = build_joint_generator(p, n_fock);
  JointState s = JointState::qubits_with_vacuum(initial, n_fock);
  JointState scratch;
  NoiseProcess noise(seed, dt);

  JointRecord rec;
  rec.params = p;
  rec.seed = seed;
  rec.stride = stride;
  const long n_steps = std::lround(t_final / dt);

  auto record = [&](double t, double current) {
    rec.times.push_back(t);
    rec.current.push_back(current);
    rec.expect_c.push_back(joint_expectation_c(s, g));
    rec.amplitude.push_back(cavity_amplitude(s));
    rec.reduced.push_back(reduced_qubit_state(s));
    check_monitor(s, rec.max_top_fock);
  };
  record(0.0, 0.0);

  double t = 0;
  for (long step = 0; step < n_steps; ++step) {
    const double xi = noise.sample();
    const double current = g.kappa_eta * joint_expectation_c(s, g) +
                           g.sqrt_keta * xi;
    const double drift = em_joint_inplace(s, g, scratch, xi, t, dt);
    if (!(drift < 0.5))
      throw std::runtime_error("joint state diverged at step " +
                               std::to_string(step));
    rec.max_trace_drift = std::max(rec.max_trace_drift, drift);
    t = (step + 1) * dt;
    if ((step + 1) % stride == 0) {
      joint_hygiene(s);
      record(t, current);
    }
  }
  return rec;
}

}  // namespace wsim
