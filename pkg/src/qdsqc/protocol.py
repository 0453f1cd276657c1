"""Session engine for the quasi-deterministic secure communication protocol.

One session transmits an ``n``-bit message from sender to receiver:

1. For each message position, the sender prepares alpha|00> + beta|11>,
   keeps qubit 1 and sends qubit 2; both parties measure in R or D
   chosen uniformly at random, and exchange their basis strings.
2. Positions measured in the same basis form the sifted sequences P
   (sender) and Q (receiver); the message bits at the remaining
   (discarded) positions form the pad payload A.
3. The receiver discloses a random subset of Q with positions; the
   sender compares against P and aborts when the observed error rate
   exceeds the abort threshold.
4. The sender announces the pad G = A xor P (rank-order pairing against
   the available sifted bits) so the receiver can recover A = G xor Q,
   then announces at which sifted ranks P differs from the message so
   the receiver complements those bits.

Amplitudes at this level are restricted to real non-negative pairs
parameterized by the concurrence; with a common phase the diagonal-basis
mismatch probability is exactly 0.5 * (1 - C).

When the pad needs more sifted bits than the message rounds produced,
extra rounds carrying no message position are generated until the pad is
covered (capped at 4n extra rounds). These extra rounds happen after the
error check, matching the protocol's step order, so they are not
themselves checked.

Randomness: a session owns a counter-based Philox stream seeded from
``SessionConfig.seed``; concurrent sessions derive independent streams
from (master seed, session index) via :func:`derive_seed`, so results do
not depend on scheduling. Identical (config, message) pairs produce
bit-identical transcripts on any host and backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import statevector as sv
from .adversary import IDEAL, AdversaryModel, adversary_arrays
from .kernels import simulate_rounds

TOPUP_CAP_FACTOR = 4


class EmptyCheckSet(ValueError):
    """Error check invoked with no check positions."""


class PadShortfall(RuntimeError):
    """Not enough sifted bits to cover the pad payload."""


class SessionStatus(Enum):
    DELIVERED = "delivered"
    ABORTED_EVE_DETECTED = "aborted_eve_detected"
    ABORTED_PAD_SHORTFALL = "aborted_pad_shortfall"


class CaseMode(Enum):
    PLAIN = "plain"
    CASE_I = "i"
    CASE_II = "ii"


@dataclass(frozen=True)
class UniformPrep:
    """Same concurrence for every round."""

    concurrence: float


@dataclass(frozen=True)
class PerBasisPrep:
    """Sender picks her basis first and prepares the concurrence assigned to it."""

    concurrence_r: float
    concurrence_d: float


PrepPolicy = UniformPrep | PerBasisPrep


def default_abort_threshold(c_effective: float) -> float:
    """Midpoint between the honest sifted error 0.25*(1 - C) and the 25% attack rate."""
    return 0.125 * (2.0 - c_effective)


@dataclass(frozen=True)
class SessionConfig:
    n: int
    prep_policy: PrepPolicy
    check_fraction: float = 0.25
    abort_threshold: float | None = None
    adversary: AdversaryModel = IDEAL
    seed: int = 0
    exclude_check_bits_from_message: bool = False
    case_mode: CaseMode = CaseMode.PLAIN
    topup: bool = True

    def validate(self) -> None:
        if self.n < 8:
            raise ValueError(f"n must be >= 8, got {self.n}")
        for c in self._concurrences():
            if not (0.0 <= c <= 1.0):
                raise ValueError(f"concurrence must be in [0, 1], got {c!r}")
        if not (0.0 < self.check_fraction < 1.0):
            raise ValueError(f"check_fraction must be in (0, 1), got {self.check_fraction!r}")
        if (1.0 - self.check_fraction) * self.n / 2.0 < 1.0:
            raise ValueError("check_fraction leaves no non-check sifted bit in expectation")
        if self.abort_threshold is not None and not (0.0 < self.abort_threshold <= 1.0):
            raise ValueError(f"abort_threshold must be in (0, 1], got {self.abort_threshold!r}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def _concurrences(self) -> tuple[float, ...]:
        if isinstance(self.prep_policy, UniformPrep):
            return (self.prep_policy.concurrence,)
        return (self.prep_policy.concurrence_r, self.prep_policy.concurrence_d)

    @property
    def effective_concurrence(self) -> float:
        """Concurrence governing the honest sifted error (the D-round one)."""
        if isinstance(self.prep_policy, UniformPrep):
            return self.prep_policy.concurrence
        return self.prep_policy.concurrence_d

    def resolved_threshold(self) -> float:
        if self.abort_threshold is not None:
            return self.abort_threshold
        return default_abort_threshold(self.effective_concurrence)


@dataclass(frozen=True)
class RoundRecord:
    """One entangled-pair round as seen after basis exchange."""

    index: int
    alice_basis: sv.Basis
    bob_basis: sv.Basis
    alice_bit: int
    bob_bit: int
    eve_action: tuple[sv.Basis, int] | None = None

    @property
    def sifted(self) -> bool:
        return self.alice_basis == self.bob_basis


@dataclass
class RoundBatch:
    """Array-of-rounds form used on the hot path. Basis codes: 0 = R, 1 = D."""

    alice_basis: np.ndarray
    bob_basis: np.ndarray
    alice_bit: np.ndarray
    bob_bit: np.ndarray
    eve_active: np.ndarray
    eve_bit: np.ndarray

    @property
    def size(self) -> int:
        return int(self.alice_basis.shape[0])

    @property
    def sifted_mask(self) -> np.ndarray:
        return self.alice_basis == self.bob_basis


@dataclass
class Transcript:
    """Complete record of one session.

    ``sender_sifted`` / ``receiver_sifted`` include the sifted bits of any
    extra (top-up) rounds appended after rank ``len(sifted_positions)``;
    rank indices (check_ranks, flip_ranks, pad pairing) refer to this
    combined sequence. ``pad_message_bits`` holds the message bits carried
    through the pad, ordered by position (`carried_positions`).
    """

    n: int
    rounds: int
    extra_rounds: int
    message: np.ndarray
    receiver_raw: np.ndarray
    sifted_positions: np.ndarray
    discarded_positions: np.ndarray
    carried_positions: np.ndarray
    sifted_bases: np.ndarray
    sender_sifted: np.ndarray
    receiver_sifted: np.ndarray
    pad_message_bits: np.ndarray
    pad_cipher: np.ndarray
    check_ranks: np.ndarray
    flip_ranks: np.ndarray
    classical_bits_sent: dict[str, int]
    classical_bits_detailed: dict[str, int]
    delivered: np.ndarray | None
    observed_check_error: float

    @property
    def pad_size(self) -> int:
        return int(self.pad_message_bits.shape[0])


@dataclass(frozen=True)
class SessionOutcome:
    status: SessionStatus
    message_out: np.ndarray | None
    observed_check_error: float


def as_bits(value: Sequence[int] | str | np.ndarray) -> np.ndarray:
    """Coerce a bit string or 0/1 sequence to a uint8 array."""
    if isinstance(value, str):
        arr = np.frombuffer(value.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(value, dtype=np.uint8)
    if arr.ndim != 1 or (arr > 1).any():
        raise ValueError("bits must be a flat sequence of 0s and 1s")
    return arr


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Independent 64-bit child seed for (master seed, session index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index, stream))
    return int(ss.generate_state(1, np.uint64)[0])


def session_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def random_message(n: int, seed: int) -> np.ndarray:
    """Deterministic message bits from a stream separate from the session stream."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(1,))))
    return rng.integers(0, 2, size=n, dtype=np.uint8)


# ---------------------------------------------------------------------------
# round generation


def _basis_vectors(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = np.where(codes == 0, 1.0, sv.SQRT_HALF)
    s = np.where(codes == 0, 0.0, sv.SQRT_HALF)
    return c, s


def _prep_amplitudes(policy: PrepPolicy) -> tuple[float, float, float, float]:
    if isinstance(policy, UniformPrep):
        a, b = sv.amplitudes_for_concurrence(policy.concurrence)
        return a, b, a, b
    ar, br = sv.amplitudes_for_concurrence(policy.concurrence_r)
    ad, bd = sv.amplitudes_for_concurrence(policy.concurrence_d)
    return ar, br, ad, bd


def draw_rounds(
    rng: np.random.Generator,
    m: int,
    policy: PrepPolicy,
    adversary: AdversaryModel,
    backend: str | None = None,
) -> RoundBatch:
    """Simulate ``m`` rounds, consuming a fixed draw pattern from ``rng``.

    Draw order: sender bases, receiver bases, interception uniforms,
    interceptor basis choices, then the three measurement uniform arrays.
    The same pattern is drawn for every adversary model so that sessions
    sharing a seed also share their basis sequences.
    """
    ab = rng.integers(0, 2, size=m, dtype=np.uint8)
    bb = rng.integers(0, 2, size=m, dtype=np.uint8)
    fire_u = rng.random(m)
    choice = rng.integers(0, 2, size=m, dtype=np.uint8)
    ue = rng.random(m)
    ua = rng.random(m)
    ub = rng.random(m)
    ar, br, ad, bd = _prep_amplitudes(policy)
    alpha = np.where(ab == 0, ar, ad)
    beta = np.where(ab == 0, br, bd)
    ac, as_ = _basis_vectors(ab)
    bc, bs = _basis_vectors(bb)
    ev, ec, es = adversary_arrays(adversary, fire_u, choice)
    abit, bbit, ebit = simulate_rounds(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, backend=backend)
    return RoundBatch(ab, bb, abit, bbit, ev, ebit)


# ---------------------------------------------------------------------------
# protocol operations


def sift(rounds: Sequence[RoundRecord], message: Sequence[int] | np.ndarray):
    """Split rounds into sifted and discarded positions.

    Returns (sifted_positions, discarded_positions, P, Q, A) where P/Q are
    the parties' bits at sifted positions and A the message bits at
    discarded positions.
    """
    message = as_bits(message)
    if len(rounds) != message.shape[0]:
        raise ValueError("need one round per message bit")
    sifted_positions = np.array([r.index for r in rounds if r.sifted], dtype=np.int64)
    discarded_positions = np.array([r.index for r in rounds if not r.sifted], dtype=np.int64)
    p = np.array([r.alice_bit for r in rounds if r.sifted], dtype=np.uint8)
    q = np.array([r.bob_bit for r in rounds if r.sifted], dtype=np.uint8)
    a = message[discarded_positions] if discarded_positions.size else np.empty(0, dtype=np.uint8)
    return sifted_positions, discarded_positions, p, q, a


def error_check(p_sifted: np.ndarray, q_sifted: np.ndarray, check_ranks: np.ndarray) -> float:
    """Observed mismatch fraction on the disclosed check subset."""
    check_ranks = np.asarray(check_ranks, dtype=np.int64)
    if check_ranks.size == 0:
        raise EmptyCheckSet("at least one check position is required")
    return float(np.mean(p_sifted[check_ranks] != q_sifted[check_ranks]))


def make_pad(payload: np.ndarray, available: np.ndarray) -> np.ndarray:
    """Pad cipher G[i] = payload[i] xor available[i], pairing by rank order."""
    if available.shape[0] < payload.shape[0]:
        raise PadShortfall(
            f"pad needs {payload.shape[0]} sifted bits but only {available.shape[0]} are available"
        )
    return (payload ^ available[: payload.shape[0]]).astype(np.uint8)


def recover_pad(cipher: np.ndarray, available: np.ndarray) -> np.ndarray:
    """Invert the pad: cipher xor available equals the payload wherever P and Q agree."""
    if available.shape[0] < cipher.shape[0]:
        raise ValueError("fewer sifted bits than cipher bits")
    return (cipher ^ available[: cipher.shape[0]]).astype(np.uint8)


def flip_correction(
    message: np.ndarray,
    p_sifted: np.ndarray,
    sifted_positions: np.ndarray,
    exclude_ranks: np.ndarray | Sequence[int] = (),
) -> np.ndarray:
    """Sifted ranks where the sender's bit differs from the message bit at that position."""
    message = as_bits(message)
    exclude = np.asarray(exclude_ranks, dtype=np.int64)
    diff = p_sifted != message[sifted_positions]
    if exclude.size:
        diff = diff.copy()
        diff[exclude] = False
    return np.nonzero(diff)[0].astype(np.int64)


def assemble(
    n: int,
    q_sifted: np.ndarray,
    flip_ranks: np.ndarray,
    recovered: np.ndarray,
    sifted_positions: np.ndarray,
    carried_positions: np.ndarray,
    carrier_ranks: np.ndarray | None = None,
) -> np.ndarray:
    """Receiver-side reconstruction of the full n-bit message.

    Pad-carried positions take the recovered payload; the remaining
    sifted positions take Q with the announced flips applied.
    """
    if carrier_ranks is None:
        carrier_ranks = np.arange(sifted_positions.shape[0], dtype=np.int64)
    if recovered.shape[0] != carried_positions.shape[0]:
        raise ValueError("recovered payload does not match carried positions")
    out = np.empty(n, dtype=np.uint8)
    out[carried_positions] = recovered
    vals = q_sifted[carrier_ranks].copy()
    if flip_ranks.size:
        flip_mask = np.zeros(q_sifted.shape[0], dtype=bool)
        flip_mask[flip_ranks] = True
        vals ^= flip_mask[carrier_ranks].astype(np.uint8)
    out[sifted_positions[carrier_ranks]] = vals
    return out


def classical_ledger(transcript: Transcript) -> float:
    """Classical bits charged per transmitted pair under the efficiency convention.

    Counts one bit per pair for the basis exchange, the pad cipher, and a
    flip/no-flip mask over the message-carrying sifted ranks; check
    disclosures are recorded in the transcript but not charged here. For
    a session with half its positions discarded this sums to 2.
    """
    if transcript.delivered is None:
        raise ValueError("ledger is undefined for an aborted session")
    counters = transcript.classical_bits_sent
    return (counters["basis"] + counters["pad"] + counters["flips"]) / transcript.rounds


# ---------------------------------------------------------------------------
# the session


def _position_bits(s_msg: int) -> int:
    return max(1, math.ceil(math.log2(max(s_msg, 2))))


def run_session(config: SessionConfig, message: Sequence[int] | str | np.ndarray):
    """Execute one full session; returns (Transcript, SessionOutcome).

    Deterministic function of (config.seed, message): the same inputs give
    a bit-identical transcript regardless of host, thread count, or
    kernel backend.
    """
    config.validate()
    if config.case_mode is not CaseMode.PLAIN:
        raise ValueError("reduced-entanglement case experiments run through analysis.run_case_i/run_case_ii")
    msg = as_bits(message)
    n = config.n
    if msg.shape[0] != n:
        raise ValueError(f"message has {msg.shape[0]} bits, config.n = {n}")

    rng = session_rng(config.seed)
    batch = draw_rounds(rng, n, config.prep_policy, config.adversary)
    mask = batch.sifted_mask
    sifted_pos = np.nonzero(mask)[0].astype(np.int64)
    discarded_pos = np.nonzero(~mask)[0].astype(np.int64)
    p_msg = batch.alice_bit[mask]
    q_msg = batch.bob_bit[mask]
    sifted_bases = batch.alice_basis[mask]
    s_msg = int(p_msg.shape[0])
    a_bits = msg[discarded_pos]
    d = int(a_bits.shape[0])

    k = int(round(config.check_fraction * s_msg))
    if s_msg >= 2:
        k = max(1, min(k, s_msg - 1))
    else:
        k = 0
    if k > 0:
        check_ranks = np.sort(rng.choice(s_msg, size=k, replace=False)).astype(np.int64)
        observed = error_check(p_msg, q_msg, check_ranks)
    else:
        check_ranks = np.empty(0, dtype=np.int64)
        observed = 0.0

    pos_bits = _position_bits(s_msg)

    def build_transcript(extra_bases, p_extra, q_extra, extra_rounds, carried_pos,
                         pad_payload, cipher, flips, delivered, flips_mask_bits):
        rounds = n + extra_rounds
        sent = {
            "basis": rounds,
            "check": k,
            "pad": int(cipher.shape[0]),
            "flips": flips_mask_bits,
        }
        detailed = {
            "basis": 2 * rounds,
            "check_values": k,
            "check_positions": k * pos_bits,
            "pad": int(cipher.shape[0]),
            "flip_positions": int(flips.shape[0]) * pos_bits,
        }
        return Transcript(
            n=n,
            rounds=rounds,
            extra_rounds=extra_rounds,
            message=msg,
            receiver_raw=batch.bob_bit,
            sifted_positions=sifted_pos,
            discarded_positions=discarded_pos,
            carried_positions=carried_pos,
            sifted_bases=np.concatenate([sifted_bases, extra_bases]).astype(np.uint8),
            sender_sifted=np.concatenate([p_msg, p_extra]).astype(np.uint8),
            receiver_sifted=np.concatenate([q_msg, q_extra]).astype(np.uint8),
            pad_message_bits=pad_payload,
            pad_cipher=cipher,
            check_ranks=check_ranks,
            flip_ranks=flips,
            classical_bits_sent=sent,
            classical_bits_detailed=detailed,
            delivered=delivered,
            observed_check_error=observed,
        )

    empty_bits = np.empty(0, dtype=np.uint8)
    empty_ranks = np.empty(0, dtype=np.int64)

    if observed > config.resolved_threshold():
        transcript = build_transcript(empty_bits, empty_bits, empty_bits, 0, discarded_pos,
                                      a_bits, empty_bits, empty_ranks, None, 0)
        return transcript, SessionOutcome(SessionStatus.ABORTED_EVE_DETECTED, None, observed)

    exclude = config.exclude_check_bits_from_message
    need = d + (k if exclude else 0)
    if exclude and k > 0:
        msg_avail_ranks = np.setdiff1d(np.arange(s_msg, dtype=np.int64), check_ranks)
    else:
        msg_avail_ranks = np.arange(s_msg, dtype=np.int64)

    p_extra_parts: list[np.ndarray] = []
    q_extra_parts: list[np.ndarray] = []
    base_extra_parts: list[np.ndarray] = []
    extra_rounds = 0
    extra_sifted = 0
    cap = TOPUP_CAP_FACTOR * n
    while config.topup and msg_avail_ranks.size + extra_sifted < need and extra_rounds < cap:
        deficit = need - msg_avail_ranks.size - extra_sifted
        bsize = min(2 * deficit + 16, cap - extra_rounds)
        extra = draw_rounds(rng, bsize, config.prep_policy, config.adversary)
        emask = extra.sifted_mask
        p_extra_parts.append(extra.alice_bit[emask])
        q_extra_parts.append(extra.bob_bit[emask])
        base_extra_parts.append(extra.alice_basis[emask])
        extra_sifted += int(emask.sum())
        extra_rounds += bsize

    p_extra = np.concatenate(p_extra_parts) if p_extra_parts else empty_bits
    q_extra = np.concatenate(q_extra_parts) if q_extra_parts else empty_bits
    base_extra = np.concatenate(base_extra_parts) if base_extra_parts else empty_bits

    if msg_avail_ranks.size + extra_sifted < need:
        transcript = build_transcript(base_extra, p_extra, q_extra, extra_rounds, discarded_pos,
                                      a_bits, empty_bits, empty_ranks, None, 0)
        return transcript, SessionOutcome(SessionStatus.ABORTED_PAD_SHORTFALL, None, observed)

    p_full = np.concatenate([p_msg, p_extra])
    q_full = np.concatenate([q_msg, q_extra])
    avail_ranks = np.concatenate([msg_avail_ranks, s_msg + np.arange(extra_sifted, dtype=np.int64)])
    pad_ranks = avail_ranks[:need]

    if exclude and k > 0:
        carried_pos = np.sort(np.concatenate([discarded_pos, sifted_pos[check_ranks]]))
    else:
        carried_pos = discarded_pos
    pad_payload = msg[carried_pos]

    cipher = make_pad(pad_payload, p_full[pad_ranks])
    flips = flip_correction(msg, p_msg, sifted_pos, exclude_ranks=check_ranks if exclude else ())
    recovered = recover_pad(cipher, q_full[pad_ranks])
    delivered = assemble(n, q_msg, flips, recovered, sifted_pos, carried_pos, carrier_ranks=msg_avail_ranks)

    transcript = build_transcript(base_extra, p_extra, q_extra, extra_rounds, carried_pos,
                                  pad_payload, cipher, flips, delivered,
                                  int(msg_avail_ranks.shape[0]))
    return transcript, SessionOutcome(SessionStatus.DELIVERED, delivered, observed)


# ---------------------------------------------------------------------------
# serialization


CHANNEL_LABELS = {
    "pair_transmission": "quantum",
    "basis_exchange": "classical",
    "check_disclosure": "classical",
    "pad_cipher": "classical",
    "flip_announcement": "classical",
}


def transcript_to_dict(transcript: Transcript) -> dict:
    """JSON-ready view of a transcript; bit sequences become 0/1 strings."""
    return {
        "n": transcript.n,
        "rounds": transcript.rounds,
        "extra_rounds": transcript.extra_rounds,
        "message": bits_to_str(transcript.message),
        "receiver_raw": bits_to_str(transcript.receiver_raw),
        "sifted_positions": [int(i) for i in transcript.sifted_positions],
        "discarded_positions": [int(i) for i in transcript.discarded_positions],
        "carried_positions": [int(i) for i in transcript.carried_positions],
        "sifted_bases": "".join("RD"[b] for b in transcript.sifted_bases),
        "sender_sifted": bits_to_str(transcript.sender_sifted),
        "receiver_sifted": bits_to_str(transcript.receiver_sifted),
        "pad_message_bits": bits_to_str(transcript.pad_message_bits),
        "pad_size": transcript.pad_size,
        "pad_cipher": bits_to_str(transcript.pad_cipher),
        "check_ranks": [int(i) for i in transcript.check_ranks],
        "flip_ranks": [int(i) for i in transcript.flip_ranks],
        "classical_bits_sent": dict(transcript.classical_bits_sent),
        "classical_bits_detailed": dict(transcript.classical_bits_detailed),
        "delivered": None if transcript.delivered is None else bits_to_str(transcript.delivered),
        "observed_check_error": transcript.observed_check_error,
        "channels": dict(CHANNEL_LABELS),
    }


def outcome_to_dict(outcome: SessionOutcome) -> dict:
    return {
        "status": outcome.status.value,
        "observed_check_error": outcome.observed_check_error,
        "message_out": None if outcome.message_out is None else bits_to_str(outcome.message_out),
    }
