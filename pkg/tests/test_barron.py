import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from barronrc import barron, esn
from barronrc.barron import (
    AtomicMeasure,
    BarronFunctional,
    combine,
    evaluate,
    make_convolutional,
    make_finite_memory,
    normalize_realization,
    shift_tail,
    to_esn_coordinates,
    truncate,
)
from barronrc.errors import DimensionMismatchError, SingularControllabilityError
from barronrc.esn import EsnParams
from barronrc.seq import Window
from barronrc.system import StateSpaceSystem, lambda_shift, operator_norm, run


def naive_eval(H, z):
    """Per-atom loop over an explicit state recursion."""
    z = np.asarray(z, dtype=float).reshape(len(z), -1)
    x = np.zeros(H.N)
    for k in range(len(z) - 1):
        pre = H.system.A @ x + H.system.C @ z[k] + H.system.B
        x = pre if H.system.activation == "identity" else np.maximum(pre, 0)
    fn = barron.activation(H.sigma2)[0]
    total = 0.0
    for atom in H.measure.atoms:
        total += atom.prob * atom.w * fn(atom.a @ x + atom.c @ z[-1] + atom.b)
    return total


def random_functional(seed, N=4, d=2, K=3, sigma2="relu", bias=True, scale=0.8):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, N))
    A *= scale / operator_norm(A)
    B = rng.standard_normal(N) if bias else np.zeros(N)
    sys = StateSpaceSystem(A, B, rng.standard_normal((N, d)))
    p = rng.uniform(0.5, 1.5, K)
    mu = AtomicMeasure(p / p.sum(), rng.standard_normal(K), rng.standard_normal((K, N)), rng.standard_normal((K, d)), rng.standard_normal(K))
    return BarronFunctional(sys, mu, sigma2)


def test_measure_validation():
    with pytest.raises(ValueError):
        AtomicMeasure([0.5, 0.4], [1, 1], np.zeros((2, 1)), np.zeros((2, 1)), [0, 0])
    with pytest.raises(ValueError):
        AtomicMeasure([1.5, -0.5], [1, 1], np.zeros((2, 1)), np.zeros((2, 1)), [0, 0])
    with pytest.raises(DimensionMismatchError):
        AtomicMeasure([1.0], [1, 2], np.zeros((1, 1)), np.zeros((1, 1)), [0])


def test_integral_norms_by_hand():
    mu = AtomicMeasure([0.25, 0.75], [2.0, -1.0], [[3.0, 4.0], [0.0, 0.0]], [[1.0], [0.0]], [1.0, 2.0])
    # 0.25 * 2 * (5 + 1 + 1) + 0.75 * 1 * 2
    assert mu.integral_norm() == pytest.approx(5.0)
    # 0.25 * 4 * (25 + 1 + 1 + 1) + 0.75 * 1 * (4 + 1)
    assert mu.integral_norm_sq() == pytest.approx(math.sqrt(28 + 3.75))


def test_measure_dimension_must_match_system():
    sys = StateSpaceSystem(np.eye(2) * 0.5, np.zeros(2), np.ones((2, 1)))
    mu = AtomicMeasure([1.0], [1.0], np.zeros((1, 3)), np.zeros((1, 1)), [0.0])
    with pytest.raises(DimensionMismatchError):
        BarronFunctional(sys, mu)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.sampled_from(["relu", "identity", "tanh"]))
def test_evaluate_matches_naive_loop(seed, L, sigma2):
    H = random_functional(seed, sigma2=sigma2)
    z = np.random.default_rng(seed).uniform(-1, 1, size=(L, H.d))
    assert evaluate(H, z) == pytest.approx(naive_eval(H, z), abs=1e-12)


def test_eval_path_matches_per_prefix_evaluation():
    H = random_functional(1)
    z = np.random.default_rng(0).uniform(-1, 1, size=(15, 2))
    vals = H.eval_path(z)
    for k in range(15):
        assert vals[k] == pytest.approx(evaluate(H, z[: k + 1]), abs=1e-12)


@pytest.mark.parametrize("sigma2", ["identity", "relu"])
def test_convolutional_target_is_the_filter(sigma2):
    h = np.array([[1.0, -2.0], [0.5, 0.25], [-0.3, 0.1], [0.2, 0.7]])
    H = make_convolutional(h, 0.6, 6, sigma2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        L = int(rng.integers(1, 8))
        z = rng.uniform(-1, 1, size=(L, 2))
        expect = sum(h[k] @ z[L - 1 - k] for k in range(min(4, L)))
        assert evaluate(H, z) == pytest.approx(expect, abs=1e-12)


def test_convolutional_needs_room_for_taps():
    with pytest.raises(ValueError):
        make_convolutional([1.0, 1.0, 1.0], 0.5, 1)


def test_finite_memory_single_atom():
    # relu(z_0 - 1) with memory two
    H = make_finite_memory([(1.0, [1.0, 0.0, -1.0])], T=2, d=1)
    assert evaluate(H, [5.0, 0.0, 3.0]) == pytest.approx(2.0)
    assert evaluate(H, [5.0, 0.0, 0.5]) == 0.0


def test_finite_memory_matches_network():
    rng = np.random.default_rng(2)
    T, d = 3, 2
    atoms = [(rng.standard_normal(), rng.standard_normal(T * d + 1)) for _ in range(4)]
    H = make_finite_memory(atoms, T, d)
    for _ in range(20):
        z = rng.uniform(-1, 1, size=(6, d))
        u = np.concatenate([z[-1], z[-2], z[-3], [1.0]])
        expect = np.mean([w * max(v @ u, 0.0) for w, v in atoms])
        assert evaluate(H, z) == pytest.approx(expect, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_combine_is_linear(seed, lam1, lam2):
    H1 = random_functional(seed, N=3, d=2)
    H2 = random_functional(seed + 1, N=5, d=2, K=2)
    H = combine(H1, H2, lam1, lam2)
    assert H.N == 8
    z = np.random.default_rng(seed).uniform(-1, 1, size=(9, 2))
    assert evaluate(H, z) == pytest.approx(lam1 * evaluate(H1, z) + lam2 * evaluate(H2, z), abs=1e-9)


def test_combine_degenerate_and_cancelling_coefficients():
    H1, H2 = random_functional(0), random_functional(1)
    z = np.random.default_rng(3).uniform(-1, 1, size=(6, 2))
    assert evaluate(combine(H1, H2, 1.0, 0.0), z) == pytest.approx(evaluate(H1, z), abs=1e-12)
    assert evaluate(combine(H1, H1, 1.0, -1.0), z) == pytest.approx(0.0, abs=1e-12)


def test_combine_rejects_mismatch():
    with pytest.raises(DimensionMismatchError):
        combine(random_functional(0, d=2), random_functional(1, d=1), 1, 1)
    with pytest.raises(ValueError):
        combine(random_functional(0, sigma2="relu"), random_functional(1, sigma2="tanh"), 1, 1)


def test_shift_tail_matches_brute_sum():
    for d, N, lam, q in [(1, 5, 0.5, 2.0), (3, 7, 0.7, 2.0), (2, 4, 0.3, 1.5)]:
        i = np.arange(N + 1, N + 4000)
        brute = np.sum(lam ** (q * (np.ceil(i / d) - 1))) ** (1 / q)
        assert shift_tail(d, N, lam, q) == pytest.approx(brute, rel=1e-12)


def test_truncation_is_exact_inside_filter_support():
    H = make_convolutional([1.0, 0.5, -0.5, 0.25], 0.5, 10)
    Ht, bound = truncate(H, 3)
    z = np.random.default_rng(0).uniform(-1, 1, size=(100, 12, 1))
    np.testing.assert_allclose(Ht.eval_batch(z), H.eval_batch(z), atol=1e-14)
    assert bound > 0
    assert truncate(H, 12)[1] == 0.0


def test_truncation_bound_dominates_and_halves():
    lam = 0.5
    H = make_convolutional([lam**k for k in range(31)], lam, 30)
    z = np.random.default_rng(1).uniform(-1, 1, size=(500, 32, 1))
    exact = H.eval_batch(z)
    prev = None
    for N in range(2, 20):
        Ht, bound = truncate(H, N)
        assert np.max(np.abs(Ht.eval_batch(z) - exact)) <= bound
        if prev is not None:
            assert bound / prev == pytest.approx(0.5, abs=1e-6)
        prev = bound


def test_truncation_needs_scaled_shift():
    with pytest.raises(ValueError):
        truncate(random_functional(0), 2)
    H = make_convolutional([[1.0, 0.0], [0.5, 0.5]], 0.5, 4)
    with pytest.raises(ValueError):
        truncate(H, 1)


def test_normalization_fixed_point():
    lam = 0.6
    H = make_convolutional([[1.0, 0.0], [0.5, -0.2], [0.3, 0.1], [-0.4, 0.2]], lam, 6)
    Hn = normalize_realization(H, lam)
    assert Hn.N == H.N
    np.testing.assert_allclose(Hn.measure.a, H.measure.a, atol=1e-15)
    np.testing.assert_array_equal(Hn.measure.b, H.measure.b)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["relu", "identity"]))
def test_normalization_preserves_values(seed, sigma2):
    H = random_functional(seed, N=4, d=2, sigma2=sigma2, scale=0.6)
    Hn = normalize_realization(H, 0.8)
    L = H.system.washout_length(M=2.0, tol=1e-14) + 2
    z = np.random.default_rng(seed).uniform(-1, 1, size=(20, max(L, Hn.N // 2 + 2), 2))
    np.testing.assert_allclose(Hn.eval_batch(z), H.eval_batch(z), atol=1e-9)


def test_normalization_bias_only_moves_biases():
    H = random_functional(4, scale=0.5)
    H0 = BarronFunctional(StateSpaceSystem(H.system.A, np.zeros(H.N), H.system.C), H.measure, H.sigma2)
    n1, n0 = normalize_realization(H, 0.7), normalize_realization(H0, 0.7)
    np.testing.assert_array_equal(n1.measure.a, n0.measure.a)
    offset = np.linalg.solve(np.eye(H.N) - H.system.A, H.system.B)
    np.testing.assert_allclose(n1.measure.b - n0.measure.b, H.measure.a @ offset, atol=1e-12)


def test_normalization_rejects_small_scale():
    sys = StateSpaceSystem(np.diag([0.8, 0.5]), np.zeros(2), np.eye(2))
    H = BarronFunctional(sys, AtomicMeasure([1.0], [1.0], [[1.0, 1.0]], [[0.0, 0.0]], [0.0]), "relu")
    with pytest.raises(ValueError):
        normalize_realization(H, 0.8)
    with pytest.raises(ValueError):
        normalize_realization(BarronFunctional(StateSpaceSystem([[0.5]], [0.0], [[1.0]], "relu"), AtomicMeasure([1.0], [1.0], [[1.0]], [[0.0]], [0.0])), 0.9)


def shift_as_reservoir(d, N, lam):
    A, C = lambda_shift(d, N, lam)
    return EsnParams(A, np.zeros(N), C)


def test_transport_onto_the_shift_itself_is_identity():
    H = make_convolutional([1.0, 0.5, 0.25, -0.2], 0.7, 3, "relu")
    mu, bound = to_esn_coordinates(H, shift_as_reservoir(1, 3, 0.7))
    np.testing.assert_allclose(mu.a, H.measure.a, atol=1e-12)
    np.testing.assert_allclose(mu.b, H.measure.b, atol=1e-12)


def test_transport_zero_atoms_stay_zero():
    A, C = lambda_shift(1, 4, 0.5)
    H = BarronFunctional(StateSpaceSystem(A, np.zeros(4), C), AtomicMeasure([1.0], [0.0], np.zeros((1, 4)), [[0.0]], [0.0]))
    mu, _ = to_esn_coordinates(H, esn.sample(4, 1, 0.5, seed=0))
    assert not np.any(mu.a) and not np.any(mu.b)


@pytest.mark.parametrize("N,d", [(4, 1), (6, 2)])
def test_transport_within_bound_and_mass_factor(N, d):
    lam = 0.7
    taps = np.random.default_rng(N).uniform(-1, 1, size=(N // d + 1, d))
    H = make_convolutional(taps, lam, N, "relu")
    res = esn.sample(N, d, 0.6, seed=N)
    mu, bound = to_esn_coordinates(H, res, M=math.sqrt(d))
    Hres = BarronFunctional(res, mu, "relu")
    z = np.random.default_rng(0).uniform(-1, 1, size=(1000, N // d + 30, d))
    gap = np.abs(Hres.eval_batch(z) - H.eval_batch(z))
    assert gap.max() <= bound + 1e-9
    G = barron.transport_operator(res, lam)
    drift = sum(np.linalg.matrix_power(res.A, k) @ res.B for k in range(N // d))
    factor = max(operator_norm(G), 1.0) * (1.0 + np.linalg.norm(drift))
    assert abs(mu.probs.sum() - 1) < 1e-12
    assert mu.integral_norm() <= factor * H.measure.integral_norm() * (1 + 1e-12)


def test_transport_refuses_singular_kalman_matrix():
    A, C = lambda_shift(1, 2, 0.5)
    H = BarronFunctional(StateSpaceSystem(A, np.zeros(2), C), AtomicMeasure([1.0], [1.0], [[1.0, 1.0]], [[0.0]], [0.0]))
    flat = EsnParams(np.zeros((2, 2)), np.ones(2), [[1.0], [0.0]])
    with pytest.raises(SingularControllabilityError) as info:
        to_esn_coordinates(H, flat)
    assert info.value.sigma_min == 0.0


def test_functional_json_round_trip():
    H = random_functional(8)
    back = BarronFunctional.from_json(H.to_json())
    z = np.random.default_rng(0).uniform(-1, 1, size=(7, 2))
    assert evaluate(back, z) == evaluate(H, z)
    assert set(H.to_dict()) >= {"n", "d", "activation", "A", "B", "C", "atoms"}
