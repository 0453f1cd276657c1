"""Closed-form rates, estimators, concurrence sweeps, and the two
reduced-entanglement schedules.

Closed forms for real non-negative amplitude pairs with concurrence C:

* diagonal-basis mismatch probability ``pd_theory(C) = 0.5 * (1 - C)``,
* qubit efficiency ``eta_theory(C) = (3 + C) / 12``, rising from 0.25 at
  a product state to 1/3 at maximal entanglement.

Both reduced-entanglement schedules have the sender choose her basis
before preparing each pair, so a basis-specific concurrence applies:

* schedule i prepares C_R < 1 for R rounds and C_D = 1 for D rounds;
  every sifted bit is then error-free and n sifted bits cost about 2n
  pairs.
* schedule ii allows C_D < 1, so all D-sifted bits are used for error
  checking and then discarded; only the R-sifted bits are delivered and
  n of them cost about 4n pairs. A D-check error consistent with 0.5
  instead of 0.5 * (1 - C_D) exposes an interceptor measuring everything
  in R, which the usual check cannot see.

Sweep points run honestly with aborts disabled (threshold 1.0) because
at low concurrence the honest check error approaches the attack ceiling
and a midpoint threshold would abort half of the sessions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adversary import IDEAL, AdversaryModel
from .protocol import (
    CaseMode,
    SessionConfig,
    SessionStatus,
    Transcript,
    UniformPrep,
    classical_ledger,
    default_abort_threshold,
    derive_seed,
    draw_rounds,
    error_check,
    PerBasisPrep,
    run_session,
    session_rng,
)

SWEEP_CSV_HEADER = "concurrence,pd_theory,pd_est,sifted_err_theory,sifted_err_est,eta_theory,eta_est,trials,seed"


class LedgerModeMismatch(ValueError):
    """Efficiency is only defined on the per-pair ledger convention."""


def pd_theory(c: float) -> float:
    """Probability of anti-correlated outcomes when both parties measure in D."""
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"concurrence must be in [0, 1], got {c!r}")
    return 0.5 * (1.0 - c)


def eta_theory(c: float) -> float:
    """Qubit efficiency (3 + C) / 12: correct bits per qubit plus classical bit sent."""
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"concurrence must be in [0, 1], got {c!r}")
    return (3.0 + c) / 12.0


def eta_measured(transcript: Transcript, ledger: str = "standard") -> float:
    """Measured efficiency of a delivered session: correct bits per pair over 1 + b."""
    if ledger != "standard":
        raise LedgerModeMismatch("the detailed two-way ledger does not feed the efficiency formula")
    if transcript.delivered is None:
        raise ValueError("efficiency is undefined for an aborted session")
    correct = int(np.sum(transcript.delivered == transcript.message))
    c = correct / transcript.rounds
    b = classical_ledger(transcript)
    return c / (1.0 + b)


@dataclass(frozen=True)
class SweepRow:
    concurrence: float
    pd_theory: float
    pd_est: float
    sifted_err_theory: float
    sifted_err_est: float
    eta_theory: float
    eta_est: float
    trials: int
    seed: int


def sweep(c_grid, rounds_per_point: int, master_seed: int) -> list[SweepRow]:
    """One honest session per concurrence; estimates against the closed forms.

    Each grid point owns a session seed and a message stream derived from
    (master_seed, point index), so points are independent and the output
    is the same whatever order they execute in.
    """
    grid = [float(c) for c in c_grid]
    if not grid:
        raise ValueError("concurrence grid must be non-empty")
    rows = []
    for i, c in enumerate(grid):
        seed = derive_seed(master_seed, i)
        config = SessionConfig(
            n=rounds_per_point,
            prep_policy=UniformPrep(c),
            abort_threshold=1.0,
            adversary=IDEAL,
            seed=seed,
        )
        message = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=master_seed, spawn_key=(i, 1)))
        ).integers(0, 2, size=rounds_per_point, dtype=np.uint8)
        transcript, outcome = run_session(config, message)
        s_msg = transcript.sifted_positions.shape[0]
        p = transcript.sender_sifted[:s_msg]
        q = transcript.receiver_sifted[:s_msg]
        mism = p != q
        d_mask = transcript.sifted_bases[:s_msg] == 1
        pd_est = float(np.mean(mism[d_mask])) if d_mask.any() else 0.0
        sifted_err_est = float(np.mean(mism)) if s_msg else 0.0
        rows.append(
            SweepRow(
                concurrence=c,
                pd_theory=pd_theory(c),
                pd_est=pd_est,
                sifted_err_theory=0.5 * pd_theory(c),
                sifted_err_est=sifted_err_est,
                eta_theory=eta_theory(c),
                eta_est=eta_measured(transcript),
                trials=rounds_per_point,
                seed=seed,
            )
        )
    return rows


def sweep_to_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.concurrence!r},{r.pd_theory!r},{r.pd_est!r},{r.sifted_err_theory!r},"
            f"{r.sifted_err_est!r},{r.eta_theory!r},{r.eta_est!r},{r.trials},{r.seed}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# reduced-entanglement schedules


@dataclass(frozen=True)
class CaseReport:
    mode: str
    status: SessionStatus
    pairs_consumed: int
    error_free_bits: int
    delivered_error_count: int
    check_error: float
    d_check_error: float | None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "status": self.status.value,
            "pairs_consumed": self.pairs_consumed,
            "error_free_bits": self.error_free_bits,
            "delivered_error_count": self.delivered_error_count,
            "check_error": self.check_error,
            "d_check_error": self.d_check_error,
        }


def _harvest(rng, target: int, policy, adversary, want_r_only: bool, expect_rate: float):
    """Draw round batches until ``target`` qualifying sifted bits exist; trim at the last one."""
    parts = []
    successes = 0
    consumed = 0
    hard_cap = 64 * target + 4096
    while successes < target:
        deficit = target - successes
        bsize = math.ceil(deficit / expect_rate * 1.1) + 64
        if consumed + bsize > hard_cap:
            raise RuntimeError("round harvest exceeded its sanity cap")
        batch = draw_rounds(rng, bsize, policy, adversary)
        mask = batch.sifted_mask
        if want_r_only:
            mask = mask & (batch.alice_basis == 0)
        parts.append((batch, mask))
        successes += int(mask.sum())
        consumed += bsize
    ab = np.concatenate([b.alice_basis for b, _ in parts])
    bb = np.concatenate([b.bob_basis for b, _ in parts])
    pa = np.concatenate([b.alice_bit for b, _ in parts])
    qb = np.concatenate([b.bob_bit for b, _ in parts])
    mask = np.concatenate([m for _, m in parts])
    last = np.nonzero(mask)[0][target - 1]
    end = int(last) + 1
    return ab[:end], bb[:end], pa[:end], qb[:end], end


def _check_subset(rng, size: int, fraction: float) -> np.ndarray:
    k = int(round(fraction * size))
    k = max(1, min(k, size - 1)) if size >= 2 else 0
    if k == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(size, size=k, replace=False)).astype(np.int64)


def run_case_i(
    n: int,
    c_r: float,
    seed: int,
    adversary: AdversaryModel = IDEAL,
    check_fraction: float = 0.25,
) -> CaseReport:
    """Harvest n error-free sifted bits using C_R < 1 for R rounds and C_D = 1 for D rounds.

    Honest channels deliver every sifted bit error-free at a cost of about
    2n pairs; the usual check subset still guards against interception.
    """
    if not (0.0 < c_r < 1.0):
        raise ValueError(f"schedule i needs 0 < C_R < 1, got {c_r!r}")
    policy = PerBasisPrep(concurrence_r=c_r, concurrence_d=1.0)
    rng = session_rng(seed)
    ab, bb, pa, qb, pairs = _harvest(rng, n, policy, adversary, want_r_only=False, expect_rate=0.5)
    mask = ab == bb
    p = pa[mask]
    q = qb[mask]
    ranks = _check_subset(rng, p.shape[0], check_fraction)
    observed = error_check(p, q, ranks) if ranks.size else 0.0
    threshold = default_abort_threshold(1.0)
    errors = int(np.sum(p != q))
    status = SessionStatus.ABORTED_EVE_DETECTED if observed > threshold else SessionStatus.DELIVERED
    return CaseReport(
        mode="i",
        status=status,
        pairs_consumed=pairs,
        error_free_bits=n - errors,
        delivered_error_count=errors,
        check_error=observed,
        d_check_error=None,
    )


def run_case_ii(
    n: int,
    c_r: float,
    c_d: float,
    seed: int,
    adversary: AdversaryModel = IDEAL,
    check_fraction: float = 0.25,
) -> CaseReport:
    """Harvest n error-free R-sifted bits while sacrificing every D-sifted bit for checking.

    Costs about 4n pairs. All D-sifted bits are compared publicly: their
    error rate must stay near 0.5 * (1 - C_D); a rate consistent with 0.5
    aborts, exposing an interceptor who measures everything in R (which
    the R-side check cannot see). The R-side subset check also runs.
    """
    if not (0.0 < c_r <= 1.0):
        raise ValueError(f"schedule ii needs 0 < C_R <= 1, got {c_r!r}")
    if not (0.0 < c_d < 1.0):
        raise ValueError(f"schedule ii needs 0 < C_D < 1, got {c_d!r}")
    policy = PerBasisPrep(concurrence_r=c_r, concurrence_d=c_d)
    rng = session_rng(seed)
    ab, bb, pa, qb, pairs = _harvest(rng, n, policy, adversary, want_r_only=True, expect_rate=0.25)
    sifted = ab == bb
    r_mask = sifted & (ab == 0)
    d_mask = sifted & (ab == 1)
    p_r = pa[r_mask]
    q_r = qb[r_mask]
    d_count = int(d_mask.sum())
    d_check = float(np.mean(pa[d_mask] != qb[d_mask])) if d_count else 0.0
    ranks = _check_subset(rng, p_r.shape[0], check_fraction)
    r_check = error_check(p_r, q_r, ranks) if ranks.size else 0.0

    r_threshold = default_abort_threshold(1.0)
    d_cut = 0.5 - 0.25 * c_d  # midpoint between the honest D error and 0.5
    aborted = r_check > r_threshold or d_check > d_cut
    errors = int(np.sum(p_r != q_r))
    return CaseReport(
        mode="ii",
        status=SessionStatus.ABORTED_EVE_DETECTED if aborted else SessionStatus.DELIVERED,
        pairs_consumed=pairs,
        error_free_bits=n - errors,
        delivered_error_count=errors,
        check_error=r_check,
        d_check_error=d_check,
    )


def run_case(mode: CaseMode, n: int, c_r: float, c_d: float | None, seed: int,
             adversary: AdversaryModel = IDEAL, check_fraction: float = 0.25) -> CaseReport:
    if mode is CaseMode.CASE_I:
        return run_case_i(n, c_r, seed, adversary=adversary, check_fraction=check_fraction)
    if mode is CaseMode.CASE_II:
        if c_d is None:
            raise ValueError("schedule ii needs a D-basis concurrence")
        return run_case_ii(n, c_r, c_d, seed, adversary=adversary, check_fraction=check_fraction)
    raise ValueError(f"not a case experiment: {mode!r}")
