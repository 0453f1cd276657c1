"""Timing comparison of the round-simulation backends.

Runs the same batch of protocol rounds through the numba kernel and the
pure-numpy fallback, checks that the outputs are bit-identical, and
prints per-round timings. The first numba call includes JIT compilation
(cached on disk afterwards), so it is warmed up before timing.

Usage:
    python benchmarks/compare_backends.py [--rounds N] [--repeat K] [--intercept P]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qdsqc.adversary import adversary_arrays, intercept_resend, IDEAL
from qdsqc.kernels import numba_available, simulate_rounds
from qdsqc.protocol import UniformPrep, _basis_vectors, _prep_amplitudes


def build_inputs(rounds: int, intercept: float, seed: int):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    ab = rng.integers(0, 2, size=rounds, dtype=np.uint8)
    bb = rng.integers(0, 2, size=rounds, dtype=np.uint8)
    fire_u = rng.random(rounds)
    choice = rng.integers(0, 2, size=rounds, dtype=np.uint8)
    ue, ua, ub = rng.random(rounds), rng.random(rounds), rng.random(rounds)
    ar, br, ad, bd = _prep_amplitudes(UniformPrep(0.9))
    alpha = np.where(ab == 0, ar, ad)
    beta = np.where(ab == 0, br, bd)
    ac, as_ = _basis_vectors(ab)
    bc, bs = _basis_vectors(bb)
    model = IDEAL if intercept == 0 else intercept_resend(intercept)
    ev, ec, es = adversary_arrays(model, fire_u, choice)
    return alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub


def time_backend(arrays, backend: str, repeat: int) -> tuple[float, tuple]:
    result = simulate_rounds(*arrays, backend=backend)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        result = simulate_rounds(*arrays, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rounds", type=int, default=2_000_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--intercept", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    arrays = build_inputs(args.rounds, args.intercept, args.seed)
    print(f"{args.rounds} rounds, intercept probability {args.intercept}, best of {args.repeat}")

    t_np, out_np = time_backend(arrays, "numpy", args.repeat)
    print(f"numpy : {t_np * 1e3:8.1f} ms  ({t_np / args.rounds * 1e9:6.1f} ns/round)")

    if not numba_available():
        print("numba : not installed, skipping")
        return

    t_nb, out_nb = time_backend(arrays, "numba", args.repeat)
    print(f"numba : {t_nb * 1e3:8.1f} ms  ({t_nb / args.rounds * 1e9:6.1f} ns/round)")
    print(f"speedup: {t_np / t_nb:.1f}x")

    identical = all(np.array_equal(a, b) for a, b in zip(out_np, out_nb))
    print(f"outputs bit-identical: {identical}")
    if not identical:
        raise SystemExit("backend outputs diverged")


if __name__ == "__main__":
    main()
