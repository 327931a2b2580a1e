#pragma once
// Ground-truth model: the conditional master equation of the full qubits +
// cavity system in a truncated photon space.  Used to validate the effective
// 8x8 engines, not for production ensembles.

#include <vector>

#include "wsim/trajectory.hpp"

namespace wsim {

// Block-major joint density matrix: elements[((x*8 + y)*n + m)*n + k] is
// <x, m| rho |y, k> with x,y logical indices and m,k Fock indices.
struct JointState {
  std::vector<Complex> elements;
  int n_fock = 0;

  static JointState qubits_with_vacuum(const PureState& psi, int n_fock);

  Complex& at(int x, int y, int m, int k) {
    return elements[size_t(((x * 8 + y) * n_fock + m)) * n_fock + k];
  }
  const Complex& at(int x, int y, int m, int k) const {
    return elements[size_t(((x * 8 + y) * n_fock + m)) * n_fock + k];
  }
};

// smallest admissible truncation, ceil(4 |alpha_max|^2) (coherent support rule)
int minimum_fock_dimension(const SystemParams& p);

// precomputed per-block scalars and ladder factors for the joint generator
struct JointGenerator {
  SystemParams params;
  int n_fock = 0;
  std::array<double, 8> chi_x{};   // dispersive pull per logical state
  std::array<double, 8> qdiag{};   // (chi/2) <x|sum sigma^z|x>
  std::array<double, 8> damp{};    // (1/2) sum_q gamma_q bit_q(x)
  std::vector<double> sq;          // sq[m] = sqrt(m+1)
  double sqrt_keta = 0, kappa_eta = 0;
  Complex lo{1, 0};                // e^{-i phi}
};

// validates the truncation rule and assembles the tables
JointGenerator build_joint_generator(const SystemParams& p, int n_fock);

// deterministic part of the equation of motion applied to s, written into out
void joint_drift(const JointState& s, const JointGenerator& g, double t,
                 JointState& out);

// <a e^{-i phi} + a^dag e^{i phi}>
double joint_expectation_c(const JointState& s, const JointGenerator& g);

Complex cavity_amplitude(const JointState& s);

// population of the top two Fock levels (truncation health monitor)
double top_fock_population(const JointState& s);

// one Euler-Maruyama step with hygiene (hermitize + trace renormalize);
// throws when the truncation monitor exceeds 1e-4
JointState joint_sme_step(const JointState& s, const SystemParams& p,
                          double xi_n, double t, double dt);

// deterministic RK4 step of the unconditional equation
JointState joint_unconditional_step(const JointState& s, const SystemParams& p,
                                    double t, double dt);

DensityMatrix reduced_qubit_state(const JointState& s);

struct JointRecord {
  SystemParams params;
  uint64_t seed = 0;
  int stride = 1;
  std::vector<double> times;
  std::vector<double> current;    // homodyne record
  std::vector<double> expect_c;   // <a e^{-i phi} + h.c.>
  std::vector<Complex> amplitude; // <a>
  std::vector<DensityMatrix> reduced;
  double max_trace_drift = 0;
  double max_top_fock = 0;
};

// conditional trajectory of the joint model (no feedback; oracle use only)
JointRecord run_joint_trajectory(const SystemParams& p, const PureState& initial,
                                 int n_fock, double t_final, uint64_t seed,
                                 int stride, double dt);

}  // namespace wsim
