import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from barronrc.errors import DimensionMismatchError, UncertifiedSystemError
from barronrc.seq import Window
from barronrc.system import (
    StateSpaceSystem,
    bias_series,
    certify,
    closed_form,
    detect_lambda_shift,
    lambda_shift,
    operator_norm,
    run,
    shift_register,
    spectral_radius,
)


def random_linear_system(seed, N=4, d=2, scale=0.9):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    A *= scale / spectral_radius(A)
    return StateSpaceSystem(A, rng.standard_normal(N), rng.standard_normal((N, d)))


def test_scalar_run_by_hand():
    sys = StateSpaceSystem([[0.5]], [0.0], [[1.0]])
    states = run(sys, Window([1.0, 1.0, 1.0]))
    np.testing.assert_allclose(states[:, 0], [1.0, 1.5, 1.75])


def test_relu_run_by_hand():
    sys = StateSpaceSystem([[0.5]], [-1.0], [[1.0]], "relu")
    states = run(sys, Window([3.0, 0.0, 0.0]))
    np.testing.assert_allclose(states[:, 0], [2.0, 0.0, 0.0])


def test_operator_norm_certificate():
    cert = certify(np.diag([0.3, -0.6]))
    assert cert.kind == "operator-norm" and cert.value == pytest.approx(0.6)


def test_spectral_certificate_finds_power():
    A = np.array([[0.5, 10.0], [0.0, 0.5]])
    cert = certify(A)
    assert cert.kind == "spectral-radius"
    assert cert.value == pytest.approx(0.5)
    assert operator_norm(np.linalg.matrix_power(A, cert.k0)) < 1
    assert operator_norm(np.linalg.matrix_power(A, cert.k0 - 1)) >= 1


def test_uncertified_systems_are_refused():
    with pytest.raises(UncertifiedSystemError):
        StateSpaceSystem([[1.0]], [0.0], [[1.0]])
    with pytest.raises(UncertifiedSystemError):
        # contracting spectrum is not enough with a relu state activation
        StateSpaceSystem([[0.5, 10.0], [0.0, 0.5]], [0.0, 0.0], [[1.0], [0.0]], "relu")


def test_dimension_errors():
    with pytest.raises(DimensionMismatchError):
        StateSpaceSystem(np.eye(2) * 0.5, [0.0], [[1.0], [1.0]])
    sys = StateSpaceSystem(np.eye(2) * 0.5, [0.0, 0.0], [[1.0], [1.0]])
    with pytest.raises(DimensionMismatchError):
        run(sys, np.zeros((3, 2)))


def test_shift_register_small_case():
    A, C = shift_register(1, 2)
    np.testing.assert_array_equal(A, [[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(C, [[1.0], [0.0]])
    sys = StateSpaceSystem(A, np.zeros(2), C)
    assert sys.certificate.kind == "spectral-radius" and sys.certificate.k0 == 2


def test_shift_register_stores_recent_inputs():
    d, T = 2, 3
    A, C = shift_register(d, T)
    sys = StateSpaceSystem(A, np.zeros(d * T), C)
    z = np.arange(10.0).reshape(5, 2)
    x0 = run(sys, z)[-1]
    np.testing.assert_array_equal(x0, np.concatenate([z[4], z[3], z[2]]))


def test_lambda_shift_example():
    A, C = lambda_shift(1, 3, 0.5)
    sys = StateSpaceSystem(A, np.zeros(3), C)
    np.testing.assert_allclose(run(sys, Window([1.0, 1.0, 1.0]))[-1], [1.0, 0.5, 0.25])
    assert sys.norm_A == pytest.approx(0.5)
    assert detect_lambda_shift(sys) == 0.5


def test_detect_lambda_shift_rejects_other_systems():
    assert detect_lambda_shift(random_linear_system(0)) is None


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 3))
def test_closed_form_matches_run_after_washout(seed, N, d):
    sys = random_linear_system(seed, N, d)
    L = sys.washout_length(M=np.sqrt(d), tol=1e-13) + 5
    z = np.random.default_rng(seed + 1).uniform(-1, 1, size=(L, d))
    states = run(sys, z)
    np.testing.assert_allclose(states[-1], closed_form(sys, z, 0), atol=1e-11)
    # the input part alone is exact at any time
    zero_bias = StateSpaceSystem(sys.A, np.zeros(N), sys.C)
    np.testing.assert_allclose(run(zero_bias, z)[3], closed_form(zero_bias, z, 3 - (L - 1)), atol=1e-12)


def test_bias_series_matches_linear_solve():
    sys = random_linear_system(3)
    np.testing.assert_allclose(bias_series(sys), np.linalg.solve(np.eye(sys.N) - sys.A, sys.B), atol=1e-11)


def test_closed_form_refuses_relu():
    sys = StateSpaceSystem([[0.5]], [0.0], [[1.0]], "relu")
    with pytest.raises(NotImplementedError):
        closed_form(sys, Window([1.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_initial_state_is_forgotten_geometrically(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    A *= 0.8 / operator_norm(A)
    sys = StateSpaceSystem(A, rng.standard_normal(3), rng.standard_normal((3, 1)), "relu")
    z = rng.uniform(-1, 1, size=(20, 1))
    x1, x2 = rng.standard_normal(3), rng.standard_normal(3)
    gap = np.linalg.norm(run(sys, z, x1) - run(sys, z, x2), axis=1)
    k = np.arange(1, 21)
    assert np.all(gap <= 0.8**k * np.linalg.norm(x1 - x2) + 1e-12)


def test_json_round_trip_is_exact():
    sys = random_linear_system(5)
    back = StateSpaceSystem.from_json(sys.to_json())
    np.testing.assert_array_equal(back.A, sys.A)
    np.testing.assert_array_equal(back.B, sys.B)
    np.testing.assert_array_equal(back.C, sys.C)
    assert back.activation == sys.activation
    assert sys.to_dict()["n"] == 4 and sys.to_dict()["d"] == 2
