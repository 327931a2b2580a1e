#include "wsim/algebra.hpp"

#include <cmath>
#include <stdexcept>

namespace wsim {

QubitOperator pauli(int qubit_index, PauliAxis axis) {
  if (qubit_index < 1 || qubit_index > 3)
    throw std::invalid_argument("pauli: qubit_index must be 1..3");
  QubitOperator op = QubitOperator::Zero();
  const int mask = 1 << (3 - qubit_index);
  for (int x = 0; x < 8; ++x) {
    const int bit = (x & mask) ? 1 : 0;
    switch (axis) {
      case PauliAxis::z:
        op(x, x) = bit ? 1.0 : -1.0;
        break;
      case PauliAxis::x:
        op(x ^ mask, x) = 1.0;
        break;
      case PauliAxis::y:
        // y|0> = -i|1>, y|1> = i|0>  (so that sigma+ = (x + i y)/2)
        op(x ^ mask, x) = bit ? Complex(0, 1) : Complex(0, -1);
        break;
      case PauliAxis::plus:  // |1><0|
        if (!bit) op(x | mask, x) = 1.0;
        break;
      case PauliAxis::minus:  // |0><1|
        if (bit) op(x & ~mask, x) = 1.0;
        break;
    }
  }
  return op;
}

PureState named_state(StateLabel name) {
  PureState psi = PureState::Zero();
  switch (name) {
    case StateLabel::ground:
      psi(0) = 1.0;
      break;
    case StateLabel::excited:
      psi(7) = 1.0;
      break;
    case StateLabel::w_minus: {
      const double a = 1.0 / std::sqrt(3.0);
      psi(1) = psi(2) = psi(4) = a;  // |001>,|010>,|100>
      break;
    }
    case StateLabel::w_plus: {
      const double a = 1.0 / std::sqrt(3.0);
      psi(3) = psi(5) = psi(6) = a;  // |011>,|101>,|110>
      break;
    }
    case StateLabel::separable_plus: {
      const double a = 1.0 / (2.0 * std::sqrt(2.0));
      for (int x = 0; x < 8; ++x) psi(x) = a;
      break;
    }
    default:
      throw std::invalid_argument("named_state: unknown label");
  }
  return psi;
}

DensityMatrix projector(const PureState& psi) { return psi * psi.adjoint(); }

Matrix8c dissipator(const QubitOperator& c, const DensityMatrix& rho) {
  const Matrix8c cdc = c.adjoint() * c;
  return c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
}

Matrix8c measurement_superop(const QubitOperator& c, const DensityMatrix& rho) {
  const Complex mean = (c * rho).trace() + (rho * c.adjoint()).trace();
  return c * rho + rho * c.adjoint() - mean * rho;
}

double fidelity(const DensityMatrix& rho, const PureState& target) {
  return (target.adjoint() * rho * target)(0, 0).real();
}

double hygiene(DensityMatrix& rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  rho /= tr;
  return std::abs(tr - 1.0);
}

double min_eigenvalue(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix8c> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace wsim
