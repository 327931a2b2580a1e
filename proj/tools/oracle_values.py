#!/usr/bin/env python3
"""Independent oracle for the frozen constants used in the C++ tests.

Computes steady cavity amplitudes, signed measurement roots, dephasing
entries, outcome plateaus and RK4 transient reference values with numpy,
entirely separately from the C++ implementation.  Run it to regenerate the
numbers cited in tests/ when parameters change.
"""
import numpy as np

KAPPA = 1.0
CHI = -0.11
EPS = 2.0


def chi_x(x):
    n = bin(x).count("1")
    return CHI * (2 * n - 3)


def steady_alpha(cx, eps=EPS, kappa=KAPPA):
    return -1j * eps / (1j * cx + kappa / 2)


def beta(alphas):
    b = np.zeros(8, dtype=complex)
    for a in range(8):
        for x in range(8):
            parity = bin(a & (~x & 7)).count("1")
            b[a] += (-1) ** parity * alphas[x]
    return b / 4


def main():
    alphas = np.array([steady_alpha(chi_x(x)) for x in range(8)])
    np.set_printoptions(precision=10)
    for x in (0, 1, 3, 7):
        print(f"alpha[{x}] = {alphas[x]:.10f}")

    b = beta(alphas)
    g0 = b[0b100]
    g1 = -b[0b111]
    g2 = 1j * b[0b011]
    print(f"sqrt_g0 = {g0:.10f}")
    print(f"sqrt_g1 = {g1:.10f}")
    print(f"sqrt_g2 = {g2:.10f}")

    # closed forms
    u = CHI / KAPPA
    poly = 1 + 40 * u**2 + 144 * u**4
    gm = 64 * EPS**2 * CHI**2 / KAPPA**3
    print(f"gamma_m = {gm:.10f}")
    print(f"rate0 = {np.sqrt(gm) * (1 + 12 * u**2) / poly:.10f}")
    print(f"rate1 = {np.sqrt(gm) * 24 * u**2 / poly:.10f}")
    print(f"rate2 = {np.sqrt(gm) * (-4 * u) / poly:.10f}")

    print(f"outcome_111 = {2 * alphas[7].real:.10f}")
    print(f"outcome_011 = {2 * alphas[3].real:.10f}")
    print(f"outcome_001 = {2 * alphas[1].real:.10f}")
    print(f"outcome_000 = {2 * alphas[0].real:.10f}")

    dep70 = (chi_x(7) - chi_x(0)) * (alphas[7] * alphas[0].conjugate()).imag
    print(f"dephasing(7,0) = {dep70:.10f}")
    num = KAPPA * abs(alphas[0] - alphas[7]) ** 2
    den = -(chi_x(0) - chi_x(7)) * (alphas[0] * alphas[7].conjugate()).imag
    print(f"R_000_111 = {num / den:.12f}")

    # transient from vacuum, RK4 cross-check against the analytic solution
    dt = 1e-3

    def deriv(a, cx):
        return -1j * cx * a - 1j * EPS - KAPPA / 2 * a

    a = np.zeros(8, dtype=complex)
    for n in range(10000):
        for x in range(8):
            cx = chi_x(x)
            k1 = deriv(a[x], cx)
            k2 = deriv(a[x] + dt / 2 * k1, cx)
            k3 = deriv(a[x] + dt / 2 * k2, cx)
            k4 = deriv(a[x] + dt * k3, cx)
            a[x] += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    exact = alphas * (1 - np.exp(-(1j * np.array([chi_x(x) for x in range(8)]) + KAPPA / 2) * 10.0))
    print(f"rk4_vs_exact_at_t10 = {np.max(np.abs(a - exact)):.3e}")
    print(f"max_dev_from_steady_at_t10 = {np.max(np.abs(a - alphas)):.6f}")


if __name__ == "__main__":
    main()
