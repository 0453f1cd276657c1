"""Exact pure-state model of one polarization-entangled photon pair.

Covers state preparation, projective single-qubit measurement in an
arbitrary linear-polarization basis, post-measurement collapse, and the
concurrence entanglement measure. Everything is a pure function of its
inputs; randomness enters only through the explicit ``u`` argument of
:func:`measure`, so values can be shared freely across threads.

Conventions
-----------
* Amplitudes are ordered ``|00>, |01>, |10>, |11>``. Qubit 1 is the left
  tensor factor (kept by the sender), qubit 2 the right one (sent to the
  receiver).
* A linear-polarization basis at angle ``theta`` has outcome-0 direction
  ``cos(theta)|0> + sin(theta)|1>`` and outcome-1 direction
  ``-sin(theta)|0> + cos(theta)|1>``. Outcomes along 0/45 degrees read
  as bit 0, those along 90/135 degrees as bit 1.
* The rectilinear basis R measures at 0 degrees, the diagonal basis D at
  45 degrees. Their direction cosines are stored as exact constants so
  that equal-amplitude states stay exactly correlated under D/D
  measurement at the floating-point level.

Tolerance policy: state normalization is enforced to 1e-12, user-facing
preconditions to 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
PRECONDITION_TOL = 1e-9
DEGENERATE_TOL = 1e-15
SQRT_HALF = math.sqrt(0.5)


class NotNormalized(ValueError):
    """Amplitudes do not form a unit-norm state."""


class AngleOutOfRange(ValueError):
    """Preparation angle outside the supported (0, 45] degree range."""


class DegenerateProjection(RuntimeError):
    """A measurement selected an outcome whose probability is ~zero.

    This cannot happen for ``u`` drawn uniformly from [0, 1) on a
    normalized state; it signals a corrupted state or a hand-crafted
    ``u`` landing on a branch of probability below 1e-15.
    """


@dataclass(frozen=True)
class Basis:
    """Linear-polarization measurement basis.

    Only R (0 degrees) and D (45 degrees) are exposed at the protocol
    level; arbitrary angles are supported here so adversary strategies
    can generalize.
    """

    label: str
    angle_deg: float

    def vector(self) -> tuple[float, float]:
        """Direction cosines (cos, sin) of the outcome-0 axis."""
        if self.angle_deg == 0.0:
            return 1.0, 0.0
        if self.angle_deg == 45.0:
            return SQRT_HALF, SQRT_HALF
        rad = math.radians(self.angle_deg)
        return math.cos(rad), math.sin(rad)

    @classmethod
    def from_angle(cls, angle_deg: float) -> "Basis":
        if angle_deg == 0.0:
            return R
        if angle_deg == 45.0:
            return D
        return cls(f"A{angle_deg:g}", float(angle_deg))


R = Basis("R", 0.0)
D = Basis("D", 45.0)


@dataclass(frozen=True)
class TwoQubitState:
    """Normalized pure state of the joint sender/receiver pair."""

    amps: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.shape != (4,):
            raise ValueError(f"expected 4 amplitudes, got shape {amps.shape}")
        if not (np.isfinite(amps.real).all() and np.isfinite(amps.imag).all()):
            raise NotNormalized("amplitudes must be finite")
        norm_sq = float(np.sum(amps.real**2 + amps.imag**2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise NotNormalized(f"state norm^2 = {norm_sq!r} deviates from 1 by more than {NORM_TOL}")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    def norm_sq(self) -> float:
        a = self.amps
        return float(np.sum(a.real**2 + a.imag**2))


@dataclass(frozen=True)
class MeasurementResult:
    """Outcome bit, collapsed state, and the probability of that branch."""

    outcome: int
    post_state: TwoQubitState
    probability: float


def prepare_state(alpha: complex, beta: complex) -> TwoQubitState:
    """Entangled pair alpha|00> + beta|11>.

    Requires |alpha|^2 + |beta|^2 = 1 within 1e-9; the amplitudes are then
    rescaled to unit norm so the stricter state invariant holds.
    """
    a = complex(alpha)
    b = complex(beta)
    norm_sq = a.real**2 + a.imag**2 + b.real**2 + b.imag**2
    if not math.isfinite(norm_sq) or abs(norm_sq - 1.0) > PRECONDITION_TOL:
        raise NotNormalized(f"|alpha|^2 + |beta|^2 = {norm_sq!r}, expected 1 within {PRECONDITION_TOL}")
    inv = 1.0 / math.sqrt(norm_sq)
    return TwoQubitState(np.array([a * inv, 0.0, 0.0, b * inv], dtype=np.complex128))


def prepare_from_angle(theta_deg: float) -> TwoQubitState:
    """Pair from the pump-rotation family (eps|00> + |11>)/sqrt(eps^2 + 1), eps = tan(theta).

    Valid for 0 < theta <= 45 degrees; theta = 45 gives the maximally
    entangled state, small theta a weakly entangled one.
    """
    if not (0.0 < theta_deg <= 45.0):
        raise AngleOutOfRange(f"theta must be in (0, 45] degrees, got {theta_deg!r}")
    eps = math.tan(math.radians(theta_deg))
    denom = math.sqrt(eps * eps + 1.0)
    alpha = eps / denom
    beta = 1.0 / denom
    return TwoQubitState(np.array([alpha, 0.0, 0.0, beta], dtype=np.complex128))


def amplitudes_for_concurrence(c: float) -> tuple[float, float]:
    """Real non-negative (alpha, beta), alpha <= beta, with 2*alpha*beta = c.

    Follows the tan(theta) preparation family; c = 1 returns exactly equal
    amplitudes and c = 0 the product state |11>.
    """
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"concurrence must be in [0, 1], got {c!r}")
    if c == 1.0:
        return SQRT_HALF, SQRT_HALF
    half = 0.5 * math.asin(c)
    return math.sin(half), math.cos(half)


def state_for_concurrence(c: float) -> TwoQubitState:
    alpha, beta = amplitudes_for_concurrence(c)
    return TwoQubitState(np.array([alpha, 0.0, 0.0, beta], dtype=np.complex128))


def concurrence(state: TwoQubitState) -> float:
    """Entanglement measure 2|a*d - b*c| for amplitudes (a, b, c, d).

    Reduces to 2|alpha*beta| on the alpha|00> + beta|11> family; 1 for a
    maximally entangled state, 0 for a product state.
    """
    a = state.amps
    det = a[0] * a[3] - a[1] * a[2]
    return min(2.0 * abs(det), 1.0)


def _split(amps: np.ndarray, qubit: int):
    """Sub-amplitude pairs for target-qubit value 0 and 1, indexed by the other qubit."""
    if qubit == 1:
        return (amps[0], amps[1]), (amps[2], amps[3])
    if qubit == 2:
        return (amps[0], amps[2]), (amps[1], amps[3])
    raise ValueError(f"qubit index must be 1 or 2, got {qubit!r}")


def _recombine(qubit: int, part0, part1) -> np.ndarray:
    if qubit == 1:
        return np.array([part0[0], part0[1], part1[0], part1[1]], dtype=np.complex128)
    return np.array([part0[0], part1[0], part0[1], part1[1]], dtype=np.complex128)


def _abs2(z: complex) -> float:
    return z.real * z.real + z.imag * z.imag


def _branches(state: TwoQubitState, qubit: int, basis: Basis):
    """Projection components (w, v) onto the outcome-0 / outcome-1 axes and their weights."""
    c, s = basis.vector()
    zero, one = _split(state.amps, qubit)
    w = (c * zero[0] + s * one[0], c * zero[1] + s * one[1])
    v = (c * one[0] - s * zero[0], c * one[1] - s * zero[1])
    p0 = _abs2(w[0]) + _abs2(w[1])
    p1 = _abs2(v[0]) + _abs2(v[1])
    return w, v, p0, p1, c, s


def _collapse(qubit: int, sel, qc: float, qs: float, p_sel: float) -> TwoQubitState:
    inv = 1.0 / math.sqrt(p_sel)
    part0 = (sel[0] * qc * inv, sel[1] * qc * inv)
    part1 = (sel[0] * qs * inv, sel[1] * qs * inv)
    return TwoQubitState(_recombine(qubit, part0, part1))


def project(state: TwoQubitState, qubit: int, basis: Basis, outcome: int) -> tuple[float, TwoQubitState | None]:
    """Probability of ``outcome`` and the collapsed state (None when the branch is empty).

    Deterministic branch extraction, the enumeration primitive behind the
    exact adversary oracle.
    """
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
    w, v, p0, p1, c, s = _branches(state, qubit, basis)
    total = p0 + p1
    sel, qc, qs, p_sel = (w, c, s, p0) if outcome == 0 else (v, -s, c, p1)
    prob = float(p_sel / total)
    if p_sel < DEGENERATE_TOL:
        return prob, None
    return prob, _collapse(qubit, sel, qc, qs, p_sel)


def measure(state: TwoQubitState, qubit: int, basis: Basis, u: float) -> MeasurementResult:
    """Projective measurement of one qubit, outcome chosen by the uniform draw ``u``.

    Outcome 0 is selected iff ``u`` falls below the outcome-0 probability;
    repeating the measurement on the post state returns the same outcome
    with probability 1.
    """
    if not (0.0 <= u < 1.0):
        raise ValueError(f"u must lie in [0, 1), got {u!r}")
    w, v, p0, p1, c, s = _branches(state, qubit, basis)
    total = p0 + p1
    if u * total < p0:
        outcome, sel, qc, qs, p_sel = 0, w, c, s, p0
    else:
        outcome, sel, qc, qs, p_sel = 1, v, -s, c, p1
    if p_sel < DEGENERATE_TOL:
        raise DegenerateProjection(
            f"selected outcome {outcome} has probability {p_sel!r}; u = {u!r} hit an empty branch"
        )
    return MeasurementResult(outcome, _collapse(qubit, sel, qc, qs, p_sel), float(p_sel / total))


def joint_distribution(state: TwoQubitState, basis1: Basis, basis2: Basis) -> np.ndarray:
    """Exact 2x2 outcome distribution P[b1, b2] for measuring qubit 1 in basis1, qubit 2 in basis2.

    This is the closed-form oracle used to validate sampled measurements.
    """
    c1, s1 = basis1.vector()
    c2, s2 = basis2.vector()
    a = state.amps
    vecs1 = ((c1, s1), (-s1, c1))
    vecs2 = ((c2, s2), (-s2, c2))
    out = np.empty((2, 2), dtype=np.float64)
    for b1, (x0, x1) in enumerate(vecs1):
        for b2, (y0, y1) in enumerate(vecs2):
            m = x0 * y0 * a[0] + x0 * y1 * a[1] + x1 * y0 * a[2] + x1 * y1 * a[3]
            out[b1, b2] = _abs2(m)
    return out


def anticorrelated_mass(dist: np.ndarray) -> float:
    """P(b1 != b2) of a joint outcome distribution."""
    return float(dist[0, 1] + dist[1, 0])
