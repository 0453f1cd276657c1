"""Shared independent oracles and helpers for the test suite.

The oracles here are deliberately built from different primitives than
the package (kron projectors, density-matrix spin flip, exact binomial
sums) so the tests stay a second route to every checked number.
"""

from __future__ import annotations

import math

import numpy as np


def brute_joint(amps, angle1_deg: float, angle2_deg: float) -> np.ndarray:
    """Joint outcome distribution via explicit kron projectors."""

    def axes(theta_deg):
        rad = math.radians(theta_deg)
        c, s = math.cos(rad), math.sin(rad)
        return [np.array([c, s]), np.array([-s, c])]

    amps = np.asarray(amps, dtype=np.complex128)
    out = np.empty((2, 2))
    for b1, v1 in enumerate(axes(angle1_deg)):
        for b2, v2 in enumerate(axes(angle2_deg)):
            proj = np.kron(v1, v2).astype(np.complex128)
            out[b1, b2] = abs(np.vdot(proj, amps)) ** 2
    return out


def spin_flip_concurrence(amps) -> float:
    """Concurrence from the density-matrix spin-flip spectrum."""
    amps = np.asarray(amps, dtype=np.complex128)
    rho = np.outer(amps, amps.conj())
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    rho_tilde = rho @ yy @ rho.conj() @ yy
    evals = np.sort(np.abs(np.linalg.eigvals(rho_tilde).real))[::-1]
    lam = np.sqrt(evals)
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def binom_cdf(k: int, n: int, p: float) -> float:
    """Exact binomial CDF P(X <= k)."""
    return float(sum(math.comb(n, i) * p**i * (1.0 - p) ** (n - i) for i in range(k + 1)))


def binom_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def random_unit_state(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return v / np.linalg.norm(v)
