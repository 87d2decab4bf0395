"""Training of reservoir random-feature models and error estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import esn as esn_mod
from .elm import EsnElmModel, FeatureBank, Readout, feature_map, fit, predict_path, sample_features
from .errors import DimensionMismatchError
from .esn import EsnParams
from .seq import Estimate, ProcessGenerator, TrajectoryDataset
from .system import run, run_batch

CSV_COLUMNS = ["sweep", "seed", "N", "n", "R", "emp_risk", "gen_err", "gen_err_se", "bound_total", "runtime_ms"]


@dataclass(frozen=True)
class TrainConfig:
    """Settings for one training run.

    Attributes:
        N: Reservoir size.
        nu_spec: Feature sampling law on (w, a, c, b) with ``a`` in R^N.
        R: Readout row-norm cap.
        n_features: Number of features; defaults to N.
        esn_norm: Operator norm of the sampled reservoir.
        esn_dist: Entry distribution of the reservoir.
        esn_seed: Seed of the reservoir.
        feature_seed: Seed of the feature bank.
        sigma2: Feature activation.
        washout: Rows dropped from the start of the design matrix.
        esn: Use this reservoir instead of sampling one.
    """

    N: int
    nu_spec: object
    R: float
    n_features: int | None = None
    esn_norm: float = 0.9
    esn_dist: str = "gaussian"
    esn_seed: int = 0
    feature_seed: int = 1
    sigma2: str = "relu"
    washout: int = 0
    esn: EsnParams | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.washout < 0:
            raise ValueError("washout must be >= 0")
        if self.nu_spec.n_res != self.N:
            raise DimensionMismatchError(f"feature law has state dimension {self.nu_spec.n_res}, expected {self.N}")
        if self.esn is not None and self.esn.N != self.N:
            raise DimensionMismatchError("given reservoir has the wrong size")

    @property
    def features(self) -> int:
        return self.N if self.n_features is None else self.n_features


@dataclass(frozen=True, eq=False)
class TrainedModel(EsnElmModel):
    """Fitted model with its training diagnostics."""

    emp_risk: float = math.nan
    branch: str = ""


def design_matrix(esn: EsnParams, bank: FeatureBank, inputs: np.ndarray) -> np.ndarray:
    """Features of every suffix window from one reservoir pass.

    Row ``k`` uses the state after inputs ``0..k-1`` (zero for ``k = 0``) and
    input ``k``, which equals a fresh run on that suffix window.
    """
    inputs = np.asarray(inputs, dtype=float)
    states = run_batch(esn, inputs[None])[0]
    prev = np.vstack([np.zeros((1, esn.N)), states[:-1]])
    return feature_map(bank, prev, inputs)


def design_matrix_naive(esn: EsnParams, bank: FeatureBank, inputs: np.ndarray) -> np.ndarray:
    """Same as ``design_matrix`` but recomputes the reservoir for each suffix."""
    inputs = np.asarray(inputs, dtype=float)
    rows = []
    for k in range(inputs.shape[0]):
        prev = run(esn, inputs[:k])[-1] if k > 0 else np.zeros(esn.N)
        rows.append(feature_map(bank, prev, inputs[k]))
    return np.array(rows)


def empirical_risk(model, ds: TrajectoryDataset) -> float:
    """Mean squared error over all zero-padded suffix windows of ``ds``."""
    pred = predict_path(model, ds.inputs)
    return float(np.mean(np.sum((pred - ds.outputs) ** 2, axis=1)))


def train(cfg: TrainConfig, ds: TrajectoryDataset) -> TrainedModel:
    """Sample a reservoir and features, then fit the capped readout."""
    if cfg.washout >= ds.n:
        raise ValueError("washout removes every row")
    if cfg.esn is not None:
        reservoir = cfg.esn
    else:
        reservoir = esn_mod.sample(cfg.N, ds.d, cfg.esn_norm, cfg.esn_dist, cfg.esn_seed)
    if reservoir.d != ds.d or cfg.nu_spec.d != ds.d:
        raise DimensionMismatchError("input dimension does not match the data")
    bank = sample_features(cfg.features, cfg.nu_spec, cfg.feature_seed, cfg.sigma2)
    Phi = design_matrix(reservoir, bank, ds.inputs)[cfg.washout :]
    Y = ds.outputs[cfg.washout :]
    readout = fit(Phi, Y, cfg.R)
    resid = Phi @ readout.W.T - Y
    branch = "ridge" if readout.gamma is not None and np.any(readout.gamma > 0) else "least-squares"
    meta = {"esn_seed": reservoir.seed, "feature_seed": cfg.feature_seed, "nu_spec": cfg.nu_spec.to_dict()}
    return TrainedModel(
        reservoir,
        bank,
        readout,
        meta,
        emp_risk=float(np.mean(np.sum(resid**2, axis=1))),
        branch=branch,
    )


def generalization_error(
    model,
    target,
    gen: ProcessGenerator,
    samples: int = 20_000,
    seed: int = 12345,
    batches: int = 20,
    washout: int | None = None,
) -> Estimate:
    """Mean squared gap between model and target on fresh inputs.

    Averages along one independent stationary path after a washout long
    enough for both the reservoir and the target to forget their start.
    The standard error comes from batch means.

    Args:
        model: Object with ``esn``, ``bank`` and ``readout``.
        target: Object with ``eval_path`` and ``washout_length``.
        gen: Input process.
        samples: Number of evaluated time steps.
        seed: Seed of the fresh path.
        batches: Number of batches for the standard error.
        washout: Discarded leading steps; derived from both systems if None.
    """
    if samples < batches or batches < 2:
        raise ValueError("need at least two batches and one sample per batch")
    if washout is None:
        M = gen.M * math.sqrt(gen.d)
        washout = max(model.esn.washout_length(M, 1e-10), target.washout_length(gen.M, 1e-10))
    path = gen.sample_path(washout + samples, np.random.default_rng(seed))
    truth = np.asarray(target.eval_path(path), dtype=float).reshape(washout + samples, -1)[washout:]
    pred = predict_path(model, path)[washout:]
    err = np.sum((pred - truth) ** 2, axis=1)
    usable = (samples // batches) * batches
    means = err[:usable].reshape(batches, -1).mean(axis=1)
    return Estimate(float(err.mean()), float(means.std(ddof=1) / math.sqrt(batches)))
