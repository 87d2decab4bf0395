"""Random linear reservoirs and their controllability."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .seq import Window
from .system import StateSpaceSystem, block_constants, operator_norm, run, spectral_radius


@dataclass(frozen=True, eq=False)
class EsnParams(StateSpaceSystem):
    """Linear reservoir with its generation recipe.

    Attributes:
        seed: Seed used by ``sample``, if any.
        spec: Generation recipe, kept for provenance.
    """

    seed: int | None = None
    spec: dict | None = None

    def __post_init__(self):
        super().__post_init__()
        mode = (self.spec or {}).get("mode", "operator")
        if mode == "operator" and not self.norm_A < 1:
            raise ValueError(f"reservoir norm {self.norm_A:.6g} must be below one")

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["seed"] = self.seed
        out["spec"] = self.spec
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "EsnParams":
        return cls(obj["A"], obj["B"], obj["C"], obj.get("activation", "identity"), obj.get("seed"), obj.get("spec"))

    @classmethod
    def from_json(cls, text: str) -> "EsnParams":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_system(cls, sys: StateSpaceSystem, **kwargs) -> "EsnParams":
        return cls(sys.A, sys.B, sys.C, sys.activation, **kwargs)


def _draw(rng: np.random.Generator, dist: str, shape) -> np.ndarray:
    if dist == "gaussian":
        return rng.standard_normal(shape)
    if dist == "uniform":
        return rng.uniform(-1.0, 1.0, size=shape)
    raise ValueError(f"unknown entry distribution {dist!r}")


def sample(
    N: int,
    d: int,
    target_norm: float = 0.9,
    dist: str = "gaussian",
    seed: int = 0,
    mode: str = "operator",
) -> EsnParams:
    """Draw a reservoir with IID entries, then rescale.

    A is scaled to the target operator norm (or spectral radius when
    ``mode == "spectral"``), C to unit operator norm and B to unit length.
    """
    if N < 1 or d < 1:
        raise ValueError("N and d must be >= 1")
    if not 0 < target_norm < 1:
        raise ValueError("target_norm must lie in (0, 1)")
    if mode not in ("operator", "spectral"):
        raise ValueError(f"unknown scaling mode {mode!r}")
    rng = np.random.default_rng(seed)
    A = _draw(rng, dist, (N, N))
    C = _draw(rng, dist, (N, d))
    B = _draw(rng, dist, N)
    size = operator_norm(A) if mode == "operator" else spectral_radius(A)
    A = A * (target_norm / size)
    C = C / operator_norm(C)
    B = B / np.linalg.norm(B)
    spec = {"N": N, "d": d, "target_norm": target_norm, "dist": dist, "mode": mode}
    return EsnParams(A, B, C, "identity", seed, spec)


@dataclass(frozen=True)
class ControllabilityResult:
    """Kalman matrix ``[C | AC | ... | A^(T-1) C]`` cut to N columns."""

    K: np.ndarray
    sigma_min: float
    sigma_max: float
    T: int
    rel_tol: float = field(default=1e-10, repr=False)

    @property
    def is_singular(self) -> bool:
        return self.sigma_min < self.rel_tol * self.sigma_max

    @property
    def condition(self) -> float:
        return math.inf if self.sigma_min == 0 else self.sigma_max / self.sigma_min


def controllability(esn: StateSpaceSystem) -> ControllabilityResult:
    if esn.activation != "identity":
        raise ValueError("controllability is defined for linear reservoirs")
    N, d = esn.N, esn.d
    T = -(-N // d)
    cols, block = [], esn.C
    for _ in range(T):
        cols.append(block)
        block = esn.A @ block
    K = np.hstack(cols)[:, :N]
    sv = np.linalg.svd(K, compute_uv=False)
    return ControllabilityResult(K, float(sv.min()), float(sv.max()), T)


def rollout(esn: StateSpaceSystem, w: Window | np.ndarray) -> np.ndarray:
    """Reservoir states after each window entry, from a zero start."""
    return run(esn, w)


def tail_bound(esn: StateSpaceSystem, M: float, T: int, refined: bool = False) -> float:
    """Bound on the state mass older than T steps.

    Args:
        esn: Linear reservoir.
        M: Euclidean bound on the inputs.
        T: Horizon, >= 0.
        refined: Use the block-power envelope, valid even when ``||A|| >= 1``.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    drive = operator_norm(esn.C) * M + float(np.linalg.norm(esn.B))
    nrm = esn.norm_A
    if not refined:
        if not nrm < 1:
            raise ValueError("plain tail bound needs ||A|| < 1; use refined=True")
        return drive * nrm**T / (1.0 - nrm)
    if nrm < 1:
        return drive * nrm**T / (1.0 - nrm)
    bc = block_constants(esn.A)
    head = nrm ** (bc.k0 - 1)
    return drive * bc.rate ** (T // bc.k0) * head * sum(bc.norms) / (1.0 - bc.rate)
