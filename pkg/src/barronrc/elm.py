"""Random-feature readouts on top of a reservoir.

Feature parameters are drawn from a sampling law ``nu``; only the linear
readout is fitted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .barron import AtomicMeasure, activation
from .errors import DimensionMismatchError, UndefinedDensityError
from .esn import EsnParams
from .seq import Window
from .system import run_batch

MATCH_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AtomicSpec:
    """Sampling law equal to a finite atomic measure."""

    measure: AtomicMeasure

    @property
    def n_res(self) -> int:
        return self.measure.N

    @property
    def d(self) -> int:
        return self.measure.d

    def sample(self, rng, count):
        idx = rng.choice(self.measure.size, size=count, p=self.measure.probs)
        m = self.measure
        return m.w[idx], m.a[idx], m.c[idx], m.b[idx], idx

    def mass(self, points: np.ndarray) -> np.ndarray:
        """Point masses of stacked parameter rows."""
        idx = match_atoms(points, self.measure.stacked())
        return np.where(idx >= 0, self.measure.probs[np.maximum(idx, 0)], 0.0)

    def second_moments(self) -> tuple[float, float, float]:
        m = self.measure
        return (
            float(m.probs @ np.sum(m.a**2, axis=1)),
            float(m.probs @ np.sum(m.c**2, axis=1)),
            float(m.probs @ m.b**2),
        )

    def norm_moment(self) -> float:
        """Upper bound on E||(w, a, c, b)||."""
        return float(self.measure.probs @ np.linalg.norm(self.measure.stacked(), axis=1))

    def w_sup(self) -> float:
        return float(np.max(np.abs(self.measure.w)))

    def to_dict(self) -> dict:
        return {"kind": "atomic", "atoms": self.measure.to_list()}


@dataclass(frozen=True)
class ProductSpec:
    """Independent coordinates, Gaussian or uniform.

    For ``kind == "gaussian"`` the scales are standard deviations; for
    ``kind == "uniform"`` they are half-widths.
    """

    kind: str
    n_res: int
    d: int
    w_scale: float = 1.0
    a_scale: float = 1.0
    c_scale: float = 1.0
    b_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown product law {self.kind!r}")
        if self.n_res < 1 or self.d < 1:
            raise ValueError("dimensions must be >= 1")

    def _draw(self, rng, scale, shape):
        if self.kind == "gaussian":
            return scale * rng.standard_normal(shape)
        return rng.uniform(-scale, scale, size=shape)

    def sample(self, rng, count):
        w = self._draw(rng, self.w_scale, count)
        a = self._draw(rng, self.a_scale, (count, self.n_res))
        c = self._draw(rng, self.c_scale, (count, self.d))
        b = self._draw(rng, self.b_scale, count)
        return w, a, c, b, None

    def mass(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(points.shape[0])

    def _var(self, scale):
        return scale**2 if self.kind == "gaussian" else scale**2 / 3.0

    def second_moments(self) -> tuple[float, float, float]:
        return (self.n_res * self._var(self.a_scale), self.d * self._var(self.c_scale), self._var(self.b_scale))

    def norm_moment(self) -> float:
        ea, ec, eb = self.second_moments()
        return math.sqrt(self._var(self.w_scale) + ea + ec + eb)

    def w_sup(self) -> float:
        return math.inf if self.kind == "gaussian" else float(self.w_scale)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_res": self.n_res,
            "d": self.d,
            "w_scale": self.w_scale,
            "a_scale": self.a_scale,
            "c_scale": self.c_scale,
            "b_scale": self.b_scale,
        }


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    """``delta_tilde * target + (1 - delta_tilde) * base``.

    Attributes:
        target: Atomic law whose density with respect to the mixture is wanted.
        base: Background law.
        delta_tilde: Weight of the target branch.
        w1_bound: Upper bound on the W1 distance between base and target.
    """

    target: AtomicSpec
    base: object
    delta_tilde: float
    w1_bound: float = 0.0

    def __post_init__(self):
        if not 0 < self.delta_tilde <= 1:
            raise ValueError("delta_tilde must lie in (0, 1]")
        if self.target.n_res != self.base.n_res or self.target.d != self.base.d:
            raise DimensionMismatchError("mixture components live on different spaces")

    @property
    def n_res(self) -> int:
        return self.target.n_res

    @property
    def d(self) -> int:
        return self.target.d

    @property
    def density_bound(self) -> float:
        return 1.0 / self.delta_tilde

    def sample(self, rng, count):
        branch = rng.random(count) < self.delta_tilde
        k = int(branch.sum())
        tw, ta, tc, tb, tidx = self.target.sample(rng, k)
        bw, ba, bc, bb, _ = self.base.sample(rng, count - k)
        w = np.empty(count)
        a = np.empty((count, self.n_res))
        c = np.empty((count, self.d))
        b = np.empty(count)
        w[branch], a[branch], c[branch], b[branch] = tw, ta, tc, tb
        w[~branch], a[~branch], c[~branch], b[~branch] = bw, ba, bc, bb
        return w, a, c, b, branch

    def mass(self, points: np.ndarray) -> np.ndarray:
        t = self.delta_tilde
        return t * self.target.mass(points) + (1 - t) * self.base.mass(points)

    def second_moments(self) -> tuple[float, float, float]:
        t = self.delta_tilde
        mt, mb = self.target.second_moments(), self.base.second_moments()
        return tuple(t * x + (1 - t) * y for x, y in zip(mt, mb))

    def norm_moment(self) -> float:
        return self.delta_tilde * self.target.norm_moment() + (1 - self.delta_tilde) * self.base.norm_moment()

    def w_sup(self) -> float:
        return max(self.target.w_sup(), self.base.w_sup())

    def to_dict(self) -> dict:
        return {
            "kind": "mixture",
            "delta_tilde": self.delta_tilde,
            "w1_bound": self.w1_bound,
            "target": self.target.to_dict(),
            "base": self.base.to_dict(),
        }


def spec_from_dict(obj: dict):
    kind = obj["kind"]
    if kind == "atomic":
        return AtomicSpec(AtomicMeasure.from_list(obj["atoms"]))
    if kind == "mixture":
        return MixtureSpec(spec_from_dict(obj["target"]), spec_from_dict(obj["base"]), obj["delta_tilde"], obj.get("w1_bound", 0.0))
    return ProductSpec(**obj)


def match_atoms(points: np.ndarray, atoms: np.ndarray, tol: float = MATCH_TOL) -> np.ndarray:
    """Index of the atom equal to each point (up to ``tol``), or -1."""
    points = np.atleast_2d(points)
    out = np.full(points.shape[0], -1)
    scale = 1.0 + np.abs(atoms).max(axis=1)
    for k, atom in enumerate(atoms):
        hit = np.max(np.abs(points - atom), axis=1) <= tol * scale[k]
        out[hit & (out < 0)] = k
    return out


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """N sampled feature parameters and the law they came from.

    Attributes:
        w, a, c, b: Parameters; ``a`` has shape (N, n_res).
        sigma2: Feature activation.
        spec: Sampling law.
        seed: RNG seed.
        labels: Atom indices (atomic law) or target-branch flags (mixture).
    """

    w: np.ndarray
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray
    sigma2: str
    spec: object
    seed: int
    labels: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.a.shape[0]

    def stacked(self) -> np.ndarray:
        return np.column_stack([self.w, self.a, self.c, self.b])

    def to_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "seed": self.seed,
            "w": self.w.tolist(),
            "a": self.a.tolist(),
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "spec": self.spec.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureBank":
        return cls(
            np.array(obj["w"], dtype=float),
            np.array(obj["a"], dtype=float),
            np.array(obj["c"], dtype=float),
            np.array(obj["b"], dtype=float),
            obj["sigma2"],
            spec_from_dict(obj["spec"]),
            obj["seed"],
        )


def sample_features(N: int, spec, seed: int, sigma2: str = "relu") -> FeatureBank:
    """Draw N IID feature parameters from ``spec``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    activation(sigma2)
    rng = np.random.default_rng(seed)
    w, a, c, b, labels = spec.sample(rng, N)
    return FeatureBank(w, a, c, b, sigma2, spec, seed, labels)


def feature_map(bank: FeatureBank, x_prev: np.ndarray, z0: np.ndarray) -> np.ndarray:
    """Features ``sigma2(a_i . x + c_i . z + b_i)``; batched over leading axes."""
    fn = activation(bank.sigma2)[0]
    x_prev = np.asarray(x_prev, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    if x_prev.shape[-1] != bank.a.shape[1] or z0.shape[-1] != bank.c.shape[1]:
        raise DimensionMismatchError("state or input dimension does not match the bank")
    return fn(x_prev @ bank.a.T + z0 @ bank.c.T + bank.b)


@dataclass(frozen=True, eq=False)
class Readout:
    """Linear readout ``W`` of shape (m, N) with row norms at most R.

    Attributes:
        W: Readout matrix.
        R: Row-norm cap.
        gamma: Ridge multiplier per row; zero when the cap was inactive.
    """

    W: np.ndarray
    R: float
    gamma: np.ndarray | None = None

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        object.__setattr__(self, "W", W)
        if np.any(np.linalg.norm(W, axis=1) > self.R + 1e-9):
            raise ValueError("readout row exceeds the norm cap")

    def to_dict(self) -> dict:
        g = None if self.gamma is None else np.asarray(self.gamma).tolist()
        return {"W": self.W.tolist(), "R": self.R, "gamma": g}

    @classmethod
    def from_dict(cls, obj: dict) -> "Readout":
        g = obj.get("gamma")
        return cls(np.array(obj["W"], dtype=float), float(obj["R"]), None if g is None else np.array(g))


def importance_readout(bank: FeatureBank, mu_tilde: AtomicMeasure, density: Callable | None = None) -> Readout:
    """Unbiased readout ``W_i = w_i / N * (d mu_tilde / d nu)(theta_i)``.

    The density is taken from ``density(points)`` when given; otherwise it
    is the ratio of point masses, which exists whenever every atom of
    ``mu_tilde`` is an atom of the sampling law.
    """
    points = bank.stacked()
    if density is not None:
        dens = np.asarray(density(points), dtype=float)
    else:
        spec = bank.spec
        target = mu_tilde.stacked()
        support = spec.mass(target)
        if np.any(support <= 0):
            raise UndefinedDensityError("an atom of the target measure is not an atom of the sampling law")
        idx = match_atoms(points, target)
        hit = idx >= 0
        dens = np.zeros(bank.N)
        dens[hit] = mu_tilde.probs[idx[hit]] / support[idx[hit]]
    W = bank.w * dens / bank.N
    return Readout(W[None, :], float(np.linalg.norm(W)))


def wasserstein_atomic(mu: AtomicMeasure, nu: AtomicMeasure) -> float:
    """Exact W1 distance between two atomic measures (Euclidean cost)."""
    X, Y = mu.stacked(), nu.stacked()
    cost = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    k, m = cost.shape
    rows = np.zeros((k, k * m))
    cols = np.zeros((m, k * m))
    for i in range(k):
        rows[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        cols[j, j::m] = 1.0
    res = optimize.linprog(
        cost.ravel(),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.concatenate([mu.probs, nu.probs]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def mix_measures(nu0, mu_tilde: AtomicMeasure, delta: float, w1: float | None = None) -> MixtureSpec:
    """Mix a base law with an atomic target so that densities stay bounded.

    The target weight is ``delta / max(1, W1)``; the resulting law stays
    within W1 distance ``delta`` of the base and the target density is at
    most the inverse weight.

    Args:
        nu0: Base sampling law.
        mu_tilde: Atomic target measure.
        delta: Transport budget, > 0.
        w1: Known upper bound on the W1 distance. Computed exactly for
            atomic bases and bounded by first moments otherwise.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    target = AtomicSpec(mu_tilde)
    if w1 is None:
        if isinstance(nu0, AtomicSpec):
            w1 = wasserstein_atomic(nu0.measure, mu_tilde)
        else:
            w1 = nu0.norm_moment() + target.norm_moment()
    delta_tilde = min(1.0, delta / max(1.0, w1))
    return MixtureSpec(target, nu0, delta_tilde, float(w1))


def fit(Phi: np.ndarray, Y: np.ndarray, R: float) -> Readout:
    """Least squares with every readout row confined to the ball of radius R.

    Each output is solved separately. When the minimum-norm least-squares
    solution fits inside the ball it is returned; otherwise the ridge
    multiplier is tuned so that the solution lies on the sphere.
    """
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Phi.ndim != 2 or Phi.shape[0] != Y.shape[0]:
        raise DimensionMismatchError("Phi and Y disagree on the number of samples")
    if Phi.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not R > 0:
        raise ValueError("R must be positive")
    U, s, Vt = np.linalg.svd(Phi, full_matrices=False)
    keep = s > s.max() * max(Phi.shape) * np.finfo(float).eps if s.size and s.max() > 0 else np.zeros_like(s, bool)
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    W = np.zeros((Y.shape[1], Phi.shape[1]))
    gammas = np.zeros(Y.shape[1])
    for j in range(Y.shape[1]):
        beta = U.T @ Y[:, j]
        coef = beta / s
        if np.linalg.norm(coef) <= R:
            W[j] = Vt.T @ coef
            continue

        def excess(g):
            return np.linalg.norm(s * beta / (s**2 + g)) - R

        hi = np.linalg.norm(s * beta) / R
        g = optimize.brentq(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        sol = Vt.T @ (s * beta / (s**2 + g))
        # clear float rounding on the sphere so the cap holds exactly
        nrm = np.linalg.norm(sol)
        if nrm > R:
            sol *= R / nrm
        W[j], gammas[j] = sol, g
    return Readout(W, float(R), gammas)


def kkt_residual(Phi: np.ndarray, y: np.ndarray, w: np.ndarray, gamma: float, R: float) -> float:
    """Largest violation of the optimality conditions of the capped problem."""
    Phi, y, w = np.asarray(Phi, float), np.asarray(y, float).ravel(), np.asarray(w, float).ravel()
    grad = Phi.T @ (Phi @ w - y) + gamma * w
    scale = max(1.0, np.linalg.norm(Phi.T @ y))
    parts = [np.linalg.norm(grad) / scale, max(0.0, np.linalg.norm(w) - R)]
    if gamma > 0:
        parts.append(abs(np.linalg.norm(w) - R))
    return float(max(parts))


@dataclass(frozen=True, eq=False)
class EsnElmModel:
    """Reservoir, feature bank and readout."""

    esn: EsnParams
    bank: FeatureBank
    readout: Readout
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "esn": self.esn.to_dict(),
            "bank": self.bank.to_dict(),
            "readout": self.readout.to_dict(),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "EsnElmModel":
        return cls(
            EsnParams.from_dict(obj["esn"]),
            FeatureBank.from_dict(obj["bank"]),
            Readout.from_dict(obj["readout"]),
            obj.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "EsnElmModel":
        return cls.from_dict(json.loads(text))


def predict_batch(model, Z: np.ndarray) -> np.ndarray:
    """Predictions on windows of shape (S, L, d); returns (S, m)."""
    Z = np.asarray(Z, dtype=float)
    S, L, _ = Z.shape
    prev = run_batch(model.esn, Z[:, :-1])[:, -1] if L > 1 else np.zeros((S, model.esn.N))
    return feature_map(model.bank, prev, Z[:, -1]) @ model.readout.W.T


def predict(model, w: Window | np.ndarray) -> np.ndarray:
    data = w.data if isinstance(w, Window) else Window(w).data
    return predict_batch(model, data[None])[0]


def predict_path(model, inputs: np.ndarray) -> np.ndarray:
    """Predictions at every time of a path, each on its zero-padded prefix."""
    inputs = np.asarray(inputs, dtype=float)
    states = run_batch(model.esn, inputs[None])[0]
    prev = np.vstack([np.zeros((1, model.esn.N)), states[:-1]])
    return feature_map(model.bank, prev, inputs) @ model.readout.W.T


def static_predict(bank: FeatureBank, readout: Readout, u: np.ndarray) -> np.ndarray:
    """Readout of a bank without state weights at static inputs ``u``."""
    if np.any(bank.a):
        raise ValueError("static prediction needs all state weights to be zero")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    prev = np.zeros((u.shape[0], bank.a.shape[1]))
    return feature_map(bank, prev, u) @ readout.W.T
