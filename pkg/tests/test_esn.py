import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from barronrc import esn
from barronrc.esn import EsnParams, controllability, sample, tail_bound
from barronrc.system import closed_form, lambda_shift, operator_norm, spectral_radius


@pytest.mark.parametrize("dist", ["gaussian", "uniform"])
def test_sample_rescales_exactly(dist):
    res = sample(12, 3, 0.85, dist, seed=4)
    assert operator_norm(res.A) == pytest.approx(0.85, abs=1e-10)
    assert operator_norm(res.C) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(res.B) == pytest.approx(1.0, abs=1e-12)
    assert res.certificate.kind == "operator-norm"


def test_sample_is_deterministic_in_seed():
    a, b, c = sample(5, 1, seed=3), sample(5, 1, seed=3), sample(5, 1, seed=4)
    np.testing.assert_array_equal(a.A, b.A)
    assert not np.array_equal(a.A, c.A)


def test_spectral_mode_scales_the_radius():
    res = sample(10, 1, 0.9, seed=1, mode="spectral")
    assert spectral_radius(res.A) == pytest.approx(0.9, abs=1e-10)


def test_sample_validation():
    with pytest.raises(ValueError):
        sample(4, 1, 1.0)
    with pytest.raises(ValueError):
        EsnParams(np.eye(2), np.zeros(2), np.ones((2, 1)))


def test_kalman_matrix_of_scaled_shift_is_diagonal():
    lam = 0.6
    A, C = lambda_shift(2, 6, lam)
    ctrl = controllability(EsnParams(A, np.zeros(6), C))
    np.testing.assert_allclose(ctrl.K, np.diag(lam ** np.repeat(np.arange(3), 2)))
    assert ctrl.T == 3 and not ctrl.is_singular


def test_kalman_matrix_trims_columns():
    res = sample(5, 2, seed=0)
    ctrl = controllability(res)
    assert ctrl.T == 3 and ctrl.K.shape == (5, 5)
    np.testing.assert_allclose(ctrl.K[:, 4], (res.A @ res.A @ res.C)[:, 0])


def test_degenerate_reservoir_is_flagged():
    ctrl = controllability(EsnParams(np.zeros((2, 2)), np.ones(2), [[1.0], [1.0]]))
    assert ctrl.is_singular


def test_json_round_trip():
    res = sample(4, 2, seed=11)
    back = EsnParams.from_json(res.to_json())
    np.testing.assert_array_equal(back.A, res.A)
    assert back.seed == 11 and back.spec == res.spec


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(0, 12), st.floats(0.1, 0.95))
def test_tail_bound_dominates(seed, N, T, norm):
    res = sample(N, 2, norm, seed=seed)
    z = np.random.default_rng(seed).uniform(-1, 1, size=(40, 2))
    full = closed_form(res, z, -1)
    partial = sum(
        (np.linalg.matrix_power(res.A, k - 1) @ (res.C @ z[-1 - k] + res.B) for k in range(1, T + 1)),
        np.zeros(N),
    )
    assert np.linalg.norm(full - partial) <= tail_bound(res, math.sqrt(2), T) + 1e-12


def test_refined_tail_bound_handles_big_norm():
    res = sample(6, 1, 0.9, seed=2, mode="spectral")
    assert res.norm_A >= 1
    with pytest.raises(ValueError):
        tail_bound(res, 1.0, 5)
    z = np.random.default_rng(0).uniform(-1, 1, size=(200, 1))
    full = closed_form(res, z, -1)
    for T in (0, 5, 20, 60):
        partial = sum((np.linalg.matrix_power(res.A, k - 1) @ (res.C @ z[-1 - k] + res.B) for k in range(1, T + 1)), np.zeros(6))
        assert np.linalg.norm(full - partial) <= tail_bound(res, 1.0, T, refined=True)


def test_tail_bound_formula():
    res = sample(3, 1, 0.5, seed=0)
    assert tail_bound(res, 2.0, 4) == pytest.approx((1.0 * 2.0 + 1.0) * 0.5**4 / 0.5)


def test_rollout_is_zero_started():
    res = sample(3, 1, 0.5, seed=0)
    states = esn.rollout(res, np.ones((2, 1)))
    np.testing.assert_allclose(states[0], res.C[:, 0] + res.B)
