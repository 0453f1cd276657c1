"""Batch simulation kernels for protocol rounds.

One round prepares alpha|00> + beta|11>, optionally lets an interceptor
projectively measure qubit 2 in transit, then measures qubit 1 (sender)
and qubit 2 (receiver). These per-round operations dominate the runtime
of every experiment, so they are implemented twice:

* a scalar loop compiled with numba ``@njit`` (default when numba is
  importable), and
* a vectorized pure-numpy fallback.

The backend is selected by the environment variable ``QDSQC_BACKEND``
(``"numba"`` or ``"numpy"``) or per call via the ``backend`` argument.
Both paths execute the same arithmetic on the same operands in the same
order, restricted to +, -, *, / and sqrt (no transcendentals), so they
produce bit-identical outputs for identical inputs. Basis direction
cosines are precomputed on the host for the same reason.

Outcome selection: given branch weights p0 and p1, outcome 0 is chosen
iff ``u * (p0 + p1) < p0``. The scaling by the total keeps the rule safe
when rounding leaves one branch at exactly zero weight.

All randomness is drawn by the caller and passed in as arrays, so
results are independent of the backend and of any chunking.
"""

from __future__ import annotations

import importlib.util
import math
import os

import numpy as np

ENV_VAR = "QDSQC_BACKEND"

_CHUNK = 1 << 18


def numba_available() -> bool:
    return importlib.util.find_spec("numba") is not None


def backend_name() -> str:
    """Resolve the active backend from the environment."""
    requested = os.environ.get(ENV_VAR, "").strip().lower()
    if requested == "":
        return "numba" if numba_available() else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not numba_available():
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    return requested


def _simulate_rounds_scalar(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, abit, bbit, ebit):
    for i in range(alpha.shape[0]):
        a00 = alpha[i]
        a01 = 0.0
        a10 = 0.0
        a11 = beta[i]
        eb = 0
        if ev[i]:
            # interceptor measures qubit 2 along (ec, es)
            w0 = a00 * ec[i] + a01 * es[i]
            w1 = a10 * ec[i] + a11 * es[i]
            v0 = a01 * ec[i] - a00 * es[i]
            v1 = a11 * ec[i] - a10 * es[i]
            p0 = w0 * w0 + w1 * w1
            p1 = v0 * v0 + v1 * v1
            if ue[i] * (p0 + p1) < p0:
                eb = 0
                sel0 = w0
                sel1 = w1
                qc = ec[i]
                qs = es[i]
                inv = 1.0 / math.sqrt(p0)
            else:
                eb = 1
                sel0 = v0
                sel1 = v1
                qc = -es[i]
                qs = ec[i]
                inv = 1.0 / math.sqrt(p1)
            a00 = sel0 * qc * inv
            a01 = sel0 * qs * inv
            a10 = sel1 * qc * inv
            a11 = sel1 * qs * inv
        ebit[i] = eb

        # sender measures qubit 1 along (ac, as_)
        w0 = a00 * ac[i] + a10 * as_[i]
        w1 = a01 * ac[i] + a11 * as_[i]
        v0 = a10 * ac[i] - a00 * as_[i]
        v1 = a11 * ac[i] - a01 * as_[i]
        p0 = w0 * w0 + w1 * w1
        p1 = v0 * v0 + v1 * v1
        if ua[i] * (p0 + p1) < p0:
            abit[i] = 0
            sel0 = w0
            sel1 = w1
            qc = ac[i]
            qs = as_[i]
            inv = 1.0 / math.sqrt(p0)
        else:
            abit[i] = 1
            sel0 = v0
            sel1 = v1
            qc = -as_[i]
            qs = ac[i]
            inv = 1.0 / math.sqrt(p1)
        a00 = sel0 * qc * inv
        a01 = sel1 * qc * inv
        a10 = sel0 * qs * inv
        a11 = sel1 * qs * inv

        # receiver measures qubit 2 along (bc, bs)
        w0 = a00 * bc[i] + a01 * bs[i]
        w1 = a10 * bc[i] + a11 * bs[i]
        v0 = a01 * bc[i] - a00 * bs[i]
        v1 = a11 * bc[i] - a10 * bs[i]
        p0 = w0 * w0 + w1 * w1
        p1 = v0 * v0 + v1 * v1
        if ub[i] * (p0 + p1) < p0:
            bbit[i] = 0
        else:
            bbit[i] = 1


_numba_kernel = None


def _get_numba_kernel():
    global _numba_kernel
    if _numba_kernel is None:
        from numba import njit

        _numba_kernel = njit(cache=True)(_simulate_rounds_scalar)
    return _numba_kernel


def _block_numpy(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, abit, bbit, ebit):
    a00 = alpha
    a01 = np.zeros_like(alpha)
    a10 = np.zeros_like(alpha)
    a11 = beta

    # interceptor on qubit 2; inactive rounds keep the prepared state
    w0 = a00 * ec + a01 * es
    w1 = a10 * ec + a11 * es
    v0 = a01 * ec - a00 * es
    v1 = a11 * ec - a10 * es
    p0 = w0 * w0 + w1 * w1
    p1 = v0 * v0 + v1 * v1
    pick = ue * (p0 + p1) < p0
    sel0 = np.where(pick, w0, v0)
    sel1 = np.where(pick, w1, v1)
    qc = np.where(pick, ec, -es)
    qs = np.where(pick, es, ec)
    inv = 1.0 / np.sqrt(np.where(pick, p0, p1))
    a00 = np.where(ev, sel0 * qc * inv, a00)
    a01 = np.where(ev, sel0 * qs * inv, a01)
    a10 = np.where(ev, sel1 * qc * inv, a10)
    a11 = np.where(ev, sel1 * qs * inv, a11)
    ebit[:] = np.where(ev & ~pick, 1, 0)

    # sender on qubit 1
    w0 = a00 * ac + a10 * as_
    w1 = a01 * ac + a11 * as_
    v0 = a10 * ac - a00 * as_
    v1 = a11 * ac - a01 * as_
    p0 = w0 * w0 + w1 * w1
    p1 = v0 * v0 + v1 * v1
    pick = ua * (p0 + p1) < p0
    abit[:] = np.where(pick, 0, 1)
    sel0 = np.where(pick, w0, v0)
    sel1 = np.where(pick, w1, v1)
    qc = np.where(pick, ac, -as_)
    qs = np.where(pick, as_, ac)
    inv = 1.0 / np.sqrt(np.where(pick, p0, p1))
    a00 = sel0 * qc * inv
    a01 = sel1 * qc * inv
    a10 = sel0 * qs * inv
    a11 = sel1 * qs * inv

    # receiver on qubit 2
    w0 = a00 * bc + a01 * bs
    w1 = a10 * bc + a11 * bs
    v0 = a01 * bc - a00 * bs
    v1 = a11 * bc - a10 * bs
    p0 = w0 * w0 + w1 * w1
    p1 = v0 * v0 + v1 * v1
    bbit[:] = np.where(ub * (p0 + p1) < p0, 0, 1)


def _simulate_rounds_numpy(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, abit, bbit, ebit):
    m = alpha.shape[0]
    for start in range(0, m, _CHUNK):
        sl = slice(start, min(start + _CHUNK, m))
        _block_numpy(
            alpha[sl], beta[sl], ac[sl], as_[sl], bc[sl], bs[sl],
            ev[sl], ec[sl], es[sl], ue[sl], ua[sl], ub[sl],
            abit[sl], bbit[sl], ebit[sl],
        )


def simulate_rounds(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, backend: str | None = None):
    """Simulate a batch of rounds; returns (sender_bits, receiver_bits, interceptor_bits).

    All inputs are equal-length 1-d arrays: prepared amplitudes, the
    direction cosines of the three measurement axes, the interception
    mask, and the uniform draws driving each measurement. Interceptor
    bits are 0 on rounds where ``ev`` is False.
    """
    m = alpha.shape[0]
    abit = np.empty(m, dtype=np.uint8)
    bbit = np.empty(m, dtype=np.uint8)
    ebit = np.empty(m, dtype=np.uint8)
    name = backend_name() if backend is None else backend
    if name == "numba":
        _get_numba_kernel()(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, abit, bbit, ebit)
    elif name == "numpy":
        _simulate_rounds_numpy(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, abit, bbit, ebit)
    else:
        raise ValueError(f"unknown backend {name!r}")
    return abit, bbit, ebit
