"""Channel models for the qubit in transit from sender to receiver.

Two kinds are supported: an ideal pass-through and intercept-resend,
where the interceptor measures the flying qubit in a basis of her choice
and forwards the measured eigenstate. Forwarding the eigenstate is
modeled as the projective post-measurement state itself; for this attack
the two are mathematically identical, so no fresh-photon object exists.

The module offers three routes that the test suite plays against each
other:

* :func:`transmit`, the scalar reference acting on a single state;
* :func:`attack_error_oracle`, an exact enumeration of the sifted-round
  mismatch probability (no sampling);
* :func:`sample_error_rate`, a seeded Monte Carlo estimate driven by the
  batch kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import statevector as sv
from .kernels import simulate_rounds


class AdversaryKind(Enum):
    IDEAL = "ideal"
    INTERCEPT_RESEND = "intercept_resend"


class EveStrategy(Enum):
    UNIFORM_RD = "uniform"
    ALWAYS_R = "always_r"
    ALWAYS_D = "always_d"
    FIXED_ANGLE = "fixed_angle"


@dataclass(frozen=True)
class AdversaryModel:
    kind: AdversaryKind = AdversaryKind.IDEAL
    intercept_probability: float = 0.0
    basis_strategy: EveStrategy = EveStrategy.UNIFORM_RD
    angle_deg: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.intercept_probability <= 1.0):
            raise ValueError(f"intercept_probability must be in [0, 1], got {self.intercept_probability!r}")

    @property
    def active(self) -> bool:
        return self.kind is AdversaryKind.INTERCEPT_RESEND and self.intercept_probability > 0.0


IDEAL = AdversaryModel()


def intercept_resend(
    probability: float = 1.0,
    strategy: EveStrategy = EveStrategy.UNIFORM_RD,
    angle_deg: float = 0.0,
) -> AdversaryModel:
    return AdversaryModel(AdversaryKind.INTERCEPT_RESEND, probability, strategy, angle_deg)


def _strategy_basis(model: AdversaryModel, choice: int) -> sv.Basis:
    if model.basis_strategy is EveStrategy.UNIFORM_RD:
        return sv.R if choice == 0 else sv.D
    if model.basis_strategy is EveStrategy.ALWAYS_R:
        return sv.R
    if model.basis_strategy is EveStrategy.ALWAYS_D:
        return sv.D
    return sv.Basis.from_angle(model.angle_deg)


def _strategy_mix(model: AdversaryModel) -> list[tuple[sv.Basis, float]]:
    if model.basis_strategy is EveStrategy.UNIFORM_RD:
        return [(sv.R, 0.5), (sv.D, 0.5)]
    return [(_strategy_basis(model, 0), 1.0)]


def transmit(
    state: sv.TwoQubitState, model: AdversaryModel, rng: np.random.Generator
) -> tuple[sv.TwoQubitState, tuple[sv.Basis, int] | None]:
    """Pass the flying qubit (qubit 2) through the channel model.

    Always draws the same three uniforms (fire, basis choice, outcome) so
    a replayed stream stays aligned whatever the model decides.
    """
    fire_u = float(rng.random())
    choice = int(rng.integers(0, 2))
    u = float(rng.random())
    if not model.active or fire_u >= model.intercept_probability:
        return state, None
    basis = _strategy_basis(model, choice)
    result = sv.measure(state, 2, basis, u)
    return result.post_state, (basis, result.outcome)


def attack_error_oracle(c: float, model: AdversaryModel, basis: sv.Basis) -> float:
    """Exact probability that a sifted round (both parties in ``basis``) mismatches.

    Enumerates the interceptor's basis mix and both of her outcomes, then
    reads the parties' anti-correlated mass off the collapsed state's
    closed-form joint distribution. No sampling is involved, which makes
    this the oracle against which the kernels are checked.
    """
    state = sv.state_for_concurrence(c)
    honest = sv.anticorrelated_mass(sv.joint_distribution(state, basis, basis))
    if not model.active:
        return honest
    attacked = 0.0
    for eve_basis, weight in _strategy_mix(model):
        for outcome in (0, 1):
            prob, post = sv.project(state, 2, eve_basis, outcome)
            if post is None:
                continue
            attacked += weight * prob * sv.anticorrelated_mass(sv.joint_distribution(post, basis, basis))
    p = model.intercept_probability
    return float((1.0 - p) * honest + p * attacked)


def strategy_vectors(model: AdversaryModel, choice: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-round direction cosines of the interceptor's measurement axis."""
    m = choice.shape[0]
    if model.basis_strategy is EveStrategy.UNIFORM_RD:
        ec = np.where(choice == 0, 1.0, sv.SQRT_HALF)
        es = np.where(choice == 0, 0.0, sv.SQRT_HALF)
    elif model.basis_strategy is EveStrategy.ALWAYS_R:
        ec = np.ones(m)
        es = np.zeros(m)
    elif model.basis_strategy is EveStrategy.ALWAYS_D:
        ec = np.full(m, sv.SQRT_HALF)
        es = np.full(m, sv.SQRT_HALF)
    else:
        c, s = sv.Basis.from_angle(model.angle_deg).vector()
        ec = np.full(m, c)
        es = np.full(m, s)
    return ec, es


def adversary_arrays(
    model: AdversaryModel, fire_u: np.ndarray, choice: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interception mask and measurement axis arrays for one round batch."""
    m = fire_u.shape[0]
    if not model.active:
        return np.zeros(m, dtype=bool), np.ones(m), np.zeros(m)
    ev = fire_u < model.intercept_probability
    ec, es = strategy_vectors(model, choice)
    return ev, ec, es


def sample_error_rate(
    c: float,
    model: AdversaryModel,
    basis: sv.Basis | None,
    trials: int,
    seed: int,
    backend: str | None = None,
) -> float:
    """Monte Carlo sifted-round mismatch rate over ``trials`` rounds.

    ``basis`` fixes both parties' basis; None draws a common basis
    uniformly per round, which is exactly the conditional law of a sifted
    round in a full session. Fixed draw order: common basis codes,
    interception uniforms, basis choices, then the three measurement
    uniforms.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    if basis is None:
        codes = rng.integers(0, 2, size=trials, dtype=np.uint8)
    elif basis.label == "R":
        codes = np.zeros(trials, dtype=np.uint8)
    else:
        codes = np.ones(trials, dtype=np.uint8)
    fire_u = rng.random(trials)
    choice = rng.integers(0, 2, size=trials, dtype=np.uint8)
    ue = rng.random(trials)
    ua = rng.random(trials)
    ub = rng.random(trials)
    alpha_val, beta_val = sv.amplitudes_for_concurrence(c)
    alpha = np.full(trials, alpha_val)
    beta = np.full(trials, beta_val)
    pc = np.where(codes == 0, 1.0, sv.SQRT_HALF)
    ps = np.where(codes == 0, 0.0, sv.SQRT_HALF)
    ev, ec, es = adversary_arrays(model, fire_u, choice)
    abit, bbit, _ = simulate_rounds(alpha, beta, pc, ps, pc, ps, ev, ec, es, ue, ua, ub, backend=backend)
    return float(np.mean(abit != bbit))


def binomial_sigma(p: float, trials: int) -> float:
    """Standard error of a rate estimate over ``trials`` Bernoulli draws."""
    return math.sqrt(max(p * (1.0 - p), 1e-12) / trials)
