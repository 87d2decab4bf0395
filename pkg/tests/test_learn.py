import math

import numpy as np
import pytest

from barronrc import barron, learn
from barronrc.elm import AtomicSpec, EsnElmModel, FeatureBank, ProductSpec, Readout, sample_features
from barronrc.errors import DimensionMismatchError
from barronrc.esn import EsnParams, sample
from barronrc.seq import ProcessGenerator, TrajectoryDataset, generate


def test_rolling_design_matrix_equals_per_suffix_recomputation():
    res = sample(6, 2, 0.7, seed=0)
    bank = sample_features(9, ProductSpec("gaussian", 6, 2), seed=1)
    z = np.random.default_rng(0).uniform(-1, 1, size=(40, 2))
    fast = learn.design_matrix(res, bank, z)
    slow = learn.design_matrix_naive(res, bank, z)
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_empirical_risk_by_hand():
    res = EsnParams(np.zeros((1, 1)), [0.0], [[1.0]])
    mu = barron.AtomicMeasure([1.0], [1.0], [[0.0]], [[1.0]], [0.0])
    bank = sample_features(1, AtomicSpec(mu), seed=0, sigma2="identity")
    model = EsnElmModel(res, bank, Readout([[2.0]], 5.0))
    ds = TrajectoryDataset([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
    # predictions 2 z_t, residuals 1, 3, 5
    assert learn.empirical_risk(model, ds) == pytest.approx((1 + 9 + 25) / 3)


def test_train_config_validation():
    spec = ProductSpec("uniform", 4, 1)
    with pytest.raises(DimensionMismatchError):
        learn.TrainConfig(5, spec, 1.0)
    with pytest.raises(ValueError):
        learn.TrainConfig(4, spec, 0.0)


def test_train_learns_a_convolutional_target():
    H = barron.make_convolutional([1.0, 0.5, -0.4, 0.25], 0.5, 3, "relu")
    gen = ProcessGenerator("iid-uniform")
    ds = generate(gen, 5000, H, 0.1, "uniform", seed=0)
    cfg = learn.TrainConfig(64, ProductSpec("uniform", 64, 1), 100.0, esn_norm=0.8)
    model = learn.train(cfg, ds)
    assert model.emp_risk == pytest.approx(learn.empirical_risk(model, ds), rel=1e-9)
    ge = learn.generalization_error(model, H, gen, 20_000)
    noise_var = 0.01
    # test MSE on noisy outputs is noise variance plus generalization error
    assert noise_var + ge.value <= 1.05 * noise_var
    assert np.all(np.linalg.norm(model.readout.W, axis=1) <= 100.0 + 1e-9)


def test_train_is_deterministic():
    H = barron.make_convolutional([1.0, 0.5], 0.5, 1)
    ds = generate(ProcessGenerator("iid-uniform"), 300, H, 0.1, seed=1)
    cfg = learn.TrainConfig(8, ProductSpec("gaussian", 8, 1), 5.0)
    a, b = learn.train(cfg, ds), learn.train(cfg, ds)
    np.testing.assert_array_equal(a.readout.W, b.readout.W)


def test_washout_drops_rows():
    H = barron.make_convolutional([1.0], 1.0, 1)
    ds = generate(ProcessGenerator("iid-uniform"), 50, H, 0.0, seed=1)
    cfg = learn.TrainConfig(4, ProductSpec("gaussian", 4, 1), 5.0, washout=10)
    assert np.isfinite(learn.train(cfg, ds).emp_risk)
    with pytest.raises(ValueError):
        learn.train(learn.TrainConfig(4, ProductSpec("gaussian", 4, 1), 5.0, washout=50), ds)


def exact_model():
    """Model whose reservoir and readout reproduce a scaled-shift target."""
    H = barron.make_convolutional([1.0, -0.5, 0.25], 0.5, 2, "relu")
    res = EsnParams.from_system(H.system)
    mu = H.measure
    bank = FeatureBank(mu.w, mu.a, mu.c, mu.b, "relu", AtomicSpec(mu), 0)
    return H, EsnElmModel(res, bank, Readout((mu.probs * mu.w)[None], 10.0))


def test_generalization_error_vanishes_for_exact_model():
    H, model = exact_model()
    ge = learn.generalization_error(model, H, ProcessGenerator("iid-uniform"), 2000)
    assert ge.value <= 1e-20


def test_generalization_error_standard_error_scales():
    H, model = exact_model()
    noisy = EsnElmModel(model.esn, model.bank, Readout(model.readout.W * 1.1, 10.0))
    gen = ProcessGenerator("iid-uniform")
    a = learn.generalization_error(noisy, H, gen, 20_000, seed=1, batches=40)
    b = learn.generalization_error(noisy, H, gen, 80_000, seed=2, batches=40)
    # four times the samples halves the error bar; batch-mean SEs carry ~15% noise
    assert b.stderr / a.stderr == pytest.approx(0.5, rel=0.35)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)
