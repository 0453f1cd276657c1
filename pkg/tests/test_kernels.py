import math

import numpy as np
import pytest

from qdsqc import kernels
from qdsqc.kernels import _simulate_rounds_scalar, backend_name, numba_available, simulate_rounds
from qdsqc.statevector import D, R, Basis, SQRT_HALF, TwoQubitState, joint_distribution, measure

S2 = SQRT_HALF


def random_inputs(m, seed, intercept=0.5, fixed_angle=None):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, math.pi / 4, size=m)
    alpha = np.sin(theta)
    beta = np.cos(theta)
    ac_codes = rng.integers(0, 2, m)
    bc_codes = rng.integers(0, 2, m)
    ac = np.where(ac_codes == 0, 1.0, S2)
    as_ = np.where(ac_codes == 0, 0.0, S2)
    bc = np.where(bc_codes == 0, 1.0, S2)
    bs = np.where(bc_codes == 0, 0.0, S2)
    ev = rng.random(m) < intercept
    if fixed_angle is None:
        e_codes = rng.integers(0, 2, m)
        ec = np.where(e_codes == 0, 1.0, S2)
        es = np.where(e_codes == 0, 0.0, S2)
    else:
        c, s = Basis.from_angle(fixed_angle).vector()
        ec = np.full(m, c)
        es = np.full(m, s)
    ue, ua, ub = rng.random(m), rng.random(m), rng.random(m)
    return alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub


def scalar_reference(*arrays):
    m = arrays[0].shape[0]
    abit = np.empty(m, np.uint8)
    bbit = np.empty(m, np.uint8)
    ebit = np.empty(m, np.uint8)
    _simulate_rounds_scalar(*arrays, abit, bbit, ebit)
    return abit, bbit, ebit


class TestBackendEquivalence:
    @pytest.mark.parametrize("intercept,angle", [(0.0, None), (0.5, None), (1.0, None), (0.7, 30.0)])
    def test_numpy_matches_plain_scalar_loop(self, intercept, angle):
        arrays = random_inputs(4000, seed=5, intercept=intercept, fixed_angle=angle)
        expected = scalar_reference(*arrays)
        got = simulate_rounds(*arrays, backend="numpy")
        for e, g in zip(expected, got):
            assert np.array_equal(e, g)

    @pytest.mark.skipif(not numba_available(), reason="numba not installed")
    @pytest.mark.parametrize("intercept", [0.0, 0.5, 1.0])
    def test_numba_matches_numpy_bit_for_bit(self, intercept):
        arrays = random_inputs(200_000, seed=9, intercept=intercept)
        a1, b1, e1 = simulate_rounds(*arrays, backend="numpy")
        a2, b2, e2 = simulate_rounds(*arrays, backend="numba")
        assert np.array_equal(a1, a2)
        assert np.array_equal(b1, b2)
        assert np.array_equal(e1, e2)

    def test_chunking_is_invisible(self, monkeypatch):
        arrays = random_inputs(10_000, seed=2)
        whole = simulate_rounds(*arrays, backend="numpy")
        monkeypatch.setattr(kernels, "_CHUNK", 999)
        chunked = simulate_rounds(*arrays, backend="numpy")
        for w, c in zip(whole, chunked):
            assert np.array_equal(w, c)


class TestBackendSelection:
    def test_env_flag_selects_numpy(self, monkeypatch):
        monkeypatch.setenv(kernels.ENV_VAR, "numpy")
        assert backend_name() == "numpy"

    def test_env_flag_rejects_unknown(self, monkeypatch):
        monkeypatch.setenv(kernels.ENV_VAR, "fortran")
        with pytest.raises(ValueError):
            backend_name()

    def test_unknown_backend_argument_rejected(self):
        arrays = random_inputs(8, seed=0)
        with pytest.raises(ValueError):
            simulate_rounds(*arrays, backend="fortran")


class TestKernelMatchesScalarStatevector:
    def test_replaying_uniforms_through_measure_gives_identical_bits(self):
        m = 300
        alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub = random_inputs(m, seed=21, intercept=0.5)
        abit, bbit, ebit = simulate_rounds(alpha, beta, ac, as_, bc, bs, ev, ec, es, ue, ua, ub, backend="numpy")
        for i in range(m):
            state = TwoQubitState(np.array([alpha[i], 0.0, 0.0, beta[i]]))
            if ev[i]:
                eve_basis = R if es[i] == 0.0 else (D if ec[i] == S2 else Basis.from_angle(math.degrees(math.atan2(es[i], ec[i]))))
                res = measure(state, 2, eve_basis, float(ue[i]))
                assert res.outcome == ebit[i]
                state = res.post_state
            else:
                assert ebit[i] == 0
            a_basis = R if as_[i] == 0.0 else D
            b_basis = R if bs[i] == 0.0 else D
            first = measure(state, 1, a_basis, float(ua[i]))
            second = measure(first.post_state, 2, b_basis, float(ub[i]))
            assert first.outcome == abit[i]
            assert second.outcome == bbit[i]


class TestKernelSamplingMatchesOracle:
    @pytest.mark.parametrize("alpha,beta,basis1,basis2", [
        (0.8, 0.6, D, D),
        (0.8, 0.6, R, D),
        (S2, S2, D, D),
        (0.3, math.sqrt(1 - 0.09), R, R),
    ])
    def test_frequencies_within_four_sigma(self, alpha, beta, basis1, basis2):
        m = 100_000
        rng = np.random.default_rng(404)
        a = np.full(m, alpha)
        b = np.full(m, beta)
        c1, s1 = basis1.vector()
        c2, s2 = basis2.vector()
        arrays = (
            a, b,
            np.full(m, c1), np.full(m, s1), np.full(m, c2), np.full(m, s2),
            np.zeros(m, bool), np.ones(m), np.zeros(m),
            rng.random(m), rng.random(m), rng.random(m),
        )
        abit, bbit, _ = simulate_rounds(*arrays)
        dist = joint_distribution(TwoQubitState(np.array([alpha, 0, 0, beta])), basis1, basis2)
        for x in (0, 1):
            for y in (0, 1):
                freq = float(np.mean((abit == x) & (bbit == y)))
                p = dist[x, y]
                sigma = math.sqrt(max(p * (1 - p), 1e-12) / m)
                assert abs(freq - p) <= 4 * sigma
