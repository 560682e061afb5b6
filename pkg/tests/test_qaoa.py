from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from opusnest.qaoa import (
    CostDiagonal,
    QaoaConfig,
    QubitCapError,
    _apply_mixer,
    cost_diagonal,
    evolve,
    expectation,
    index_to_bits,
    optimize_params,
    postprocess,
    sample,
    solve_tsp_qaoa,
    uniform_state,
)
from opusnest.tsp import brute_force, build_qubo, decode, encode, optimality, path_extremes, qubo_energy

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def dense_evolve(gamma, beta, diag):
    """Reference: full matrices, qubit b is bit b of the basis index."""
    nq = int(np.log2(len(diag)))
    # kron order puts qubit nq-1 first so that index bit b maps to qubit b
    mixer = sum(reduce(np.kron, [X if q == b else I2 for q in reversed(range(nq))]) for b in range(nq))
    psi = np.full(len(diag), 1 / np.sqrt(len(diag)), dtype=complex)
    for g, b in zip(gamma, beta):
        psi = expm(-1j * b * mixer) @ (np.exp(-1j * g * np.asarray(diag)) * psi)
    return psi


def tri():
    D = np.zeros((3, 3))
    D[0, 1], D[0, 2], D[1, 2] = 1, 5, 2
    return D + D.T


class TestCostDiagonal:
    def test_zero_distance_n2(self):
        d = cost_diagonal(build_qubo(np.zeros((2, 2)), A=1.0))
        assert d.values[0b1001] == 0 and d.values[0] == 4
        assert len(d) == 16

    def test_bit_order_matches_qubo(self):
        q = build_qubo(tri())
        d = cost_diagonal(q)
        for k in (0, 5, 137, 273, 511):
            assert d.values[k] == pytest.approx(qubo_energy(q, index_to_bits(k, 9)))

    def test_minimum_is_brute_force(self):
        d = cost_diagonal(build_qubo(tri()))
        assert d.values.min() == pytest.approx(brute_force(tri()).total)

    def test_cap(self):
        with pytest.raises(QubitCapError):
            cost_diagonal(build_qubo(np.ones((5, 5)) - np.eye(5)))

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            CostDiagonal(np.zeros(6))


class TestEvolve:
    def test_zero_mixer_keeps_magnitudes(self):
        d = cost_diagonal(build_qubo(tri()))
        sv = evolve([0.7], [0.0], d)
        np.testing.assert_allclose(np.abs(sv) ** 2, 2.0 ** -9, atol=1e-15)

    def test_zero_params_uniform(self):
        d = cost_diagonal(build_qubo(tri()))
        np.testing.assert_array_equal(evolve([0.0], [0.0], d), uniform_state(9))

    @given(st.integers(1, 3), st.integers(1, 5), st.data())
    @settings(max_examples=20)
    def test_matches_dense_reference(self, nq, p, data):
        diag = data.draw(st.lists(st.floats(-5, 5), min_size=2 ** nq, max_size=2 ** nq))
        g = data.draw(st.lists(st.floats(-3, 3), min_size=p, max_size=p))
        b = data.draw(st.lists(st.floats(-3, 3), min_size=p, max_size=p))
        np.testing.assert_allclose(evolve(g, b, np.array(diag)), dense_evolve(g, b, diag), atol=1e-10)

    def test_half_pi_flips_every_qubit(self):
        for k in range(16):
            sv = np.zeros(16, complex)
            sv[k] = 1
            out = _apply_mixer(sv, np.pi / 2, 4)
            assert abs(out[k ^ 0b1111]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evolve([0.1, 0.2], [0.1], np.zeros(4))


class TestExpectation:
    def test_uniform_is_mean(self):
        d = np.arange(8.0)
        assert expectation(uniform_state(3), d) == pytest.approx(3.5)

    def test_basis_state(self):
        sv = np.zeros(8, complex)
        sv[5] = 1
        assert expectation(sv, np.arange(8.0) * 2) == 10

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-9, 9), min_size=8, max_size=8))
    def test_within_range(self, gb, diag):
        e = expectation(evolve([gb[0]], [gb[1]], np.array(diag)), np.array(diag))
        assert min(diag) - 1e-9 <= e <= max(diag) + 1e-9


class TestOptimize:
    def test_constant_diagonal(self):
        _, _, e = optimize_params(np.full(16, 3.25), QaoaConfig(p=2, max_evals=30))
        assert e == pytest.approx(3.25)

    @pytest.mark.parametrize("opt", ["nelder-mead", "cobyla", "spsa"])
    def test_improves_on_uniform(self, opt):
        d = cost_diagonal(build_qubo(np.zeros((2, 2)), A=1.0))
        _, _, e = optimize_params(d, QaoaConfig(p=2, optimizer=opt, max_evals=120))
        assert e < d.values.mean()

    @pytest.mark.parametrize("opt", ["nelder-mead", "cobyla", "spsa"])
    def test_deterministic(self, opt):
        d = cost_diagonal(build_qubo(tri()))
        cfg = QaoaConfig(p=2, optimizer=opt, max_evals=40, seed=11)
        a, b = optimize_params(d, cfg), optimize_params(d, cfg)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestSample:
    def test_basis_state(self):
        sv = np.zeros(16, complex)
        sv[9] = 1
        assert sample(sv, 500, 0) == {9: 500}

    def test_uniform_max_count(self):
        # max of 2^16 binomial(shots, 2^-16) counts stays within 5 sigma of the mean
        shots = 200_000
        c = sample(uniform_state(16), shots, 3)
        p = 2.0 ** -16
        assert max(c.values()) / shots <= p + 5 * np.sqrt(p * (1 - p) / shots) + 6 / shots
        assert sum(c.values()) == shots

    @given(st.integers(1, 2000), st.integers(0, 2**31))
    @settings(max_examples=20)
    def test_total(self, shots, seed):
        sv = evolve([0.3], [0.4], cost_diagonal(build_qubo(tri())))
        assert sum(sample(sv, shots, seed).values()) == shots


class TestPostprocess:
    @given(st.permutations(range(4)), st.integers(0, 1000))
    def test_valid_fixed_point(self, s, seed):
        assert postprocess(encode(s), seed).sigma == tuple(s)

    def test_zeros_n2(self):
        got = {postprocess([0, 0, 0, 0], s).sigma for s in range(40)}
        assert got == {(0, 1), (1, 0)}

    @given(st.integers(2, 4), st.data())
    def test_always_valid(self, n, data):
        x = data.draw(st.lists(st.integers(0, 1), min_size=n * n, max_size=n * n))
        h = postprocess(x, data.draw(st.integers(0, 2**31)))
        assert sorted(h.sigma) == list(range(n))
        assert decode(encode(h.sigma)) is not None

    def test_keeps_consistent_ones(self):
        # node 0 at step 0 is the only 1 in its row and column; it must survive repair
        x = np.zeros((3, 3), int)
        x[0, 0] = 1
        x[1, 1] = x[1, 2] = 1
        for s in range(20):
            assert postprocess(x.ravel(), s).sigma[0] == 0


class TestSolve:
    def test_two_nodes(self):
        D = np.array([[0, 2.5], [2.5, 0]])
        assert solve_tsp_qaoa(D, QaoaConfig(p=1, max_evals=10)).total == 2.5

    def test_triangle_batch(self):
        D = tri()
        ex = path_extremes(D)
        totals, scores = [], []
        for s in range(20):
            h = solve_tsp_qaoa(D, QaoaConfig(p=2, max_evals=60, shots=500, seed=s))
            totals.append(h.total)
            scores.append(optimality(D, h.sigma, ex))
        assert set(totals) <= {3.0, 6.0, 7.0}
        assert np.mean(scores) > 0.5

    def test_cap(self):
        with pytest.raises(QubitCapError):
            solve_tsp_qaoa(np.ones((5, 5)), QaoaConfig(p=1))


@given(st.lists(st.floats(0.01, 1), min_size=3, max_size=3), st.sampled_from([0.01, 0.5, 7.0, 300.0]))
def test_scaling_keeps_argmin(vals, c):
    # solve_tsp_qaoa works on D / max|d|; the minimizing bitstring must not depend on the scale
    D = np.zeros((3, 3))
    D[np.triu_indices(3, 1)] = vals
    D = D + D.T
    a = cost_diagonal(build_qubo(D)).values
    b = cost_diagonal(build_qubo(c * D)).values
    assert set(np.flatnonzero(np.isclose(a, a.min()))) == set(np.flatnonzero(np.isclose(b, b.min())))
    assert brute_force(D).sigma == brute_force(c * D).sigma
