#pragma once
// Dense operator algebra on the 8-dimensional three-qubit space.
//
// Basis convention shared by every module: index x in [0,8) encodes
// |q1 q2 q3> in binary with qubit 1 the most significant bit, i.e.
// x=5 is |101>.  sigma^z |1> = +|1>.

#include <Eigen/Dense>
#include <array>
#include <complex>

namespace wsim {

using Complex = std::complex<double>;
using Matrix8c = Eigen::Matrix<Complex, 8, 8>;
using Vector8c = Eigen::Matrix<Complex, 8, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Vector8d = Eigen::Matrix<double, 8, 1>;

using DensityMatrix = Matrix8c;
using QubitOperator = Matrix8c;
using PureState = Vector8c;

enum class PauliAxis { x, y, z, plus, minus };
enum class StateLabel { ground, excited, w_minus, w_plus, separable_plus };

// bit of qubit j (1..3) inside basis index x
inline int qubit_bit(int x, int j) { return (x >> (3 - j)) & 1; }
inline int excitation_number(int x) { return ((x >> 2) & 1) + ((x >> 1) & 1) + (x & 1); }

QubitOperator pauli(int qubit_index, PauliAxis axis);
PureState named_state(StateLabel name);

DensityMatrix projector(const PureState& psi);

// c rho c^dag - 1/2 {c^dag c, rho}
Matrix8c dissipator(const QubitOperator& c, const DensityMatrix& rho);
// c rho + rho c^dag - <c + c^dag> rho
Matrix8c measurement_superop(const QubitOperator& c, const DensityMatrix& rho);

// <target| rho |target>
double fidelity(const DensityMatrix& rho, const PureState& target);

// Hermitize and renormalize the trace in place; returns |tr-1| before the fix.
// Euler-Maruyama drifts off the physical manifold, so integrators call this
// every step.
double hygiene(DensityMatrix& rho);

double min_eigenvalue(const DensityMatrix& rho);

}  // namespace wsim
