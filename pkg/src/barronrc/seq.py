"""Input windows, generated trajectories and weak-dependence estimates.

A window stores a finite stretch of an input sequence, oldest entry first,
with the last row holding the present input. Entries older than the stored
stretch are treated as zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import DimensionMismatchError


class Estimate(NamedTuple):
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float


@dataclass(frozen=True)
class Window:
    """Finite input window, oldest entry first.

    Attributes:
        data: Array of shape (L, d). ``data[-1]`` is the present input.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise DimensionMismatchError("window must have shape (L, d) with L >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("window entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    @property
    def present(self) -> np.ndarray:
        """The input at time 0."""
        return self.data[-1]

    @property
    def past(self) -> np.ndarray:
        """All entries except the present one, oldest first."""
        return self.data[:-1]

    def __len__(self):
        return self.length


def window_norm(w: Window | np.ndarray, p: float = 2.0) -> float:
    """Sup over time of the l^p norm of each entry.

    Args:
        w: Window or array of shape (L, d).
        p: Norm exponent in [1, inf].
    """
    data = w.data if isinstance(w, Window) else np.atleast_2d(np.asarray(w, dtype=float))
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.max(np.linalg.norm(data, ord=p, axis=1)))


def padding_length(eps: float, rate: float) -> int:
    """Number of past steps after which a geometric memory drops below ``eps``.

    Args:
        eps: Target tolerance in (0, 1).
        rate: Contraction rate in [0, 1).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not 0 <= rate < 1:
        raise ValueError("rate must lie in [0, 1)")
    if rate == 0:
        return 1
    return max(1, math.ceil(math.log(eps) / math.log(rate)))


@dataclass(frozen=True)
class ProcessGenerator:
    """Stationary bounded input process.

    Two kinds are supported:

    * ``"iid-uniform"``: each coordinate independent U[-M, M].
    * ``"bernoulli-shift-ma"``: ``Z_t = clip(sum_k lam^k xi_{t-k}, -M, M)`` with
      IID innovations ``xi`` uniform on [-s, s]^d. The default innovation
      scale ``s = M (1 - lam)`` keeps the clip inactive.

    Attributes:
        kind: Process kind.
        d: Input dimension.
        M: Sup-norm bound on every input coordinate.
        lam_dep: Geometric decay rate of the MA kernel.
        innovation_scale: Half-width of the innovation distribution.
    """

    kind: str
    d: int = 1
    M: float = 1.0
    lam_dep: float | None = None
    innovation_scale: float | None = None
    tail_tol: float = field(default=1e-14, repr=False)

    def __post_init__(self):
        if self.kind not in ("iid-uniform", "bernoulli-shift-ma"):
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.kind == "bernoulli-shift-ma":
            if self.lam_dep is None or not 0 < self.lam_dep < 1:
                raise ValueError("lam_dep must lie in (0, 1) for the MA process")
            if self.innovation_scale is not None and not self.innovation_scale > 0:
                raise ValueError("innovation_scale must be positive")

    @property
    def scale(self) -> float:
        """Half-width of the innovation distribution."""
        if self.kind == "iid-uniform":
            return self.M
        if self.innovation_scale is not None:
            return float(self.innovation_scale)
        return self.M * (1.0 - self.lam_dep)

    @property
    def depth(self) -> int:
        """Number of MA terms kept; the dropped tail is below ``tail_tol``."""
        if self.kind == "iid-uniform":
            return 1
        lam, s = self.lam_dep, self.scale
        # tail after K terms is at most s lam^K / (1 - lam)
        k = math.log(self.tail_tol * (1 - lam) / s) / math.log(lam)
        return max(1, math.ceil(k))

    @property
    def clip_active(self) -> bool:
        if self.kind == "iid-uniform":
            return False
        return self.scale / (1 - self.lam_dep) > self.M

    @property
    def dependence_constant(self) -> float:
        """Constant C with theta(tau) <= C lam_dep^tau in the Euclidean norm.

        Follows from Jensen and the variance of the innovation differences;
        clipping is 1-Lipschitz so it never increases the bound.
        """
        lam = 0.0 if self.kind == "iid-uniform" else self.lam_dep
        return self.scale * math.sqrt(2.0 * self.d / (3.0 * (1.0 - lam**2)))

    def _kernel(self) -> np.ndarray:
        return self.lam_dep ** np.arange(self.depth)

    def sample_path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` consecutive stationary inputs, oldest first."""
        if n < 1:
            raise ValueError("n must be >= 1")
        s = self.scale
        if self.kind == "iid-uniform":
            return rng.uniform(-s, s, size=(n, self.d))
        k = self.depth
        xi = rng.uniform(-s, s, size=(n + k - 1, self.d))
        kernel = self._kernel()
        out = np.empty((n, self.d))
        for j in range(self.d):
            # full convolution, keep the n outputs that see all k lags
            out[:, j] = np.convolve(xi[:, j], kernel, mode="valid")
        return np.clip(out, -self.M, self.M)

    def sample_windows(self, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
        """Draw independent stationary windows of shape (count, length, d)."""
        if self.kind == "iid-uniform":
            return rng.uniform(-self.M, self.M, size=(count, length, self.d))
        return np.stack([self.sample_path(length, rng) for _ in range(count)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "M": self.M,
            "lam_dep": self.lam_dep,
            "innovation_scale": self.innovation_scale,
        }

    @classmethod
    def from_dict(cls, spec: dict) -> "ProcessGenerator":
        return cls(
            kind=spec["kind"],
            d=int(spec.get("d", 1)),
            M=float(spec.get("M", 1.0)),
            lam_dep=spec.get("lam_dep"),
            innovation_scale=spec.get("innovation_scale"),
        )


def estimate_theta(
    gen: ProcessGenerator, tau: int, samples: int = 10_000, seed: int = 0
) -> Estimate:
    """Monte Carlo estimate of the weak-dependence coefficient.

    Compares the present input with a copy whose innovations at lags
    ``tau`` and older are redrawn independently.

    Args:
        gen: Input process.
        tau: Lag, >= 0.
        samples: Number of Monte Carlo pairs.
        seed: RNG seed.

    Returns:
        Estimate of E||Z_0 - Z_0^tau|| with its standard error.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if samples < 2:
        raise ValueError("samples must be >= 2")
    rng = np.random.default_rng(seed)
    s = gen.scale
    if gen.kind == "iid-uniform":
        if tau >= 1:
            return Estimate(0.0, 0.0)
        u = rng.uniform(-s, s, size=(samples, gen.d))
        v = rng.uniform(-s, s, size=(samples, gen.d))
        dist = np.linalg.norm(u - v, axis=1)
    else:
        k = gen.depth
        kernel = gen._kernel()
        dist = np.empty(samples)
        chunk = max(1, 2_000_000 // (k * gen.d))
        for start in range(0, samples, chunk):
            m = min(chunk, samples - start)
            xi = rng.uniform(-s, s, size=(m, k, gen.d))
            xi_new = xi.copy()
            if tau < k:
                xi_new[:, tau:, :] = rng.uniform(-s, s, size=(m, k - tau, gen.d))
            u = np.clip(np.einsum("k,mkd->md", kernel, xi), -gen.M, gen.M)
            v = np.clip(np.einsum("k,mkd->md", kernel, xi_new), -gen.M, gen.M)
            dist[start : start + m] = np.linalg.norm(u - v, axis=1)
    return Estimate(float(dist.mean()), float(dist.std(ddof=1) / math.sqrt(samples)))


def theta_exact(gen: ProcessGenerator, tau: int) -> float:
    """Exact weak-dependence coefficient of a scalar MA process.

    Uses ``E|X| = (2/pi) int_0^inf (1 - Re phi_X(t)) / t^2 dt`` with the
    characteristic function of the redrawn innovation tail. Only valid when
    ``d == 1`` and the clip is inactive.
    """
    if gen.d != 1:
        raise NotImplementedError("exact theta is available for d == 1 only")
    if gen.clip_active:
        raise NotImplementedError("exact theta requires an inactive clip")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    s = gen.scale
    if gen.kind == "iid-uniform":
        if tau >= 1:
            return 0.0
        coeffs = np.array([1.0])
    else:
        k = gen.depth
        if tau >= k:
            return 0.0
        coeffs = gen.lam_dep ** np.arange(tau, k)

    def integrand(t):
        # difference of two uniforms has characteristic function sinc^2
        phi = np.prod(np.sinc(s * coeffs * t / np.pi) ** 2)
        return (1.0 - phi) / (t * t)

    scale = 1.0 / (s * coeffs[0])
    head, _ = integrate.quad(integrand, 0.0, 50 * scale, limit=500)
    tail, _ = integrate.quad(integrand, 50 * scale, np.inf, limit=500)
    return float(2.0 / math.pi * (head + tail))


@dataclass(frozen=True)
class TrajectoryDataset:
    """Observed input/output trajectory, stored oldest first.

    Row ``k`` holds time ``t = k - (n - 1)``, so the last row is time 0.

    Attributes:
        inputs: Array of shape (n, d).
        outputs: Array of shape (n, m).
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        z = np.array(self.inputs, dtype=float)
        y = np.array(self.outputs, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if z.shape[0] != y.shape[0]:
            raise DimensionMismatchError("inputs and outputs need the same length")
        if z.shape[0] < 1:
            raise ValueError("dataset must be non-empty")
        z.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", z)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def m(self) -> int:
        return self.outputs.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(-(self.n - 1), 1)

    def suffix_window(self, i: int) -> Window:
        """Window of inputs from time -(n-1) up to time -i."""
        if not 0 <= i < self.n:
            raise IndexError("suffix index out of range")
        return Window(self.inputs[: self.n - i])

    def to_csv(self, path: str | Path) -> None:
        header = ["t"] + [f"z_{j + 1}" for j in range(self.d)]
        header += [f"y_{j + 1}" for j in range(self.m)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, z, y in zip(self.times, self.inputs, self.outputs):
                writer.writerow([int(t)] + [repr(float(v)) for v in z] + [repr(float(v)) for v in y])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrajectoryDataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        zcols = [k for k, h in enumerate(header) if h.startswith("z_")]
        ycols = [k for k, h in enumerate(header) if h.startswith("y_")]
        data = np.array([[float(v) for v in r] for r in body])
        order = np.argsort(data[:, 0])
        data = data[order]
        return cls(data[:, zcols], data[:, ycols])


def generate(
    gen: ProcessGenerator,
    n: int,
    target,
    noise_std: float = 0.0,
    noise: str = "gaussian",
    seed: int = 0,
    burn_in: int | None = None,
) -> TrajectoryDataset:
    """Draw a trajectory ``Y_t = H(Z up to t) + eps_t``.

    The target sees a burn-in stretch before the recorded part, so the
    outputs reflect a stationary past rather than zero padding.

    Args:
        gen: Input process.
        n: Number of recorded time steps.
        target: Object with ``eval_path(inputs)`` and ``washout_length(M)``.
        noise_std: Standard deviation of the additive noise.
        noise: ``"gaussian"`` or ``"uniform"`` (bounded, same std).
        seed: RNG seed; inputs and noise use independent child streams.
        burn_in: Steps simulated before the recorded part.
    """
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if noise not in ("gaussian", "uniform"):
        raise ValueError(f"unknown noise kind {noise!r}")
    input_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    if burn_in is None:
        burn_in = target.washout_length(gen.M)
    path = gen.sample_path(n + burn_in, np.random.default_rng(input_seq))
    clean = np.asarray(target.eval_path(path), dtype=float).reshape(n + burn_in, -1)[burn_in:]
    rng = np.random.default_rng(noise_seq)
    if noise == "gaussian":
        eps = rng.normal(0.0, noise_std, size=clean.shape)
    else:
        half = noise_std * math.sqrt(3.0)
        eps = rng.uniform(-half, half, size=clean.shape)
    return TrajectoryDataset(path[burn_in:], clean + eps)
