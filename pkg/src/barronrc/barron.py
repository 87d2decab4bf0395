"""Barron-type functionals over a state system and their transforms.

A functional evaluates ``sum_k p_k w_k sigma2(a_k . x_{-1} + c_k . z_0 + b_k)``
where ``x_{-1}`` is the state after all but the last window entry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatchError, SingularControllabilityError
from .seq import Window
from .system import (
    StateSpaceSystem,
    block_constants,
    contracting_power,
    detect_lambda_shift,
    lambda_shift,
    operator_norm,
    run_batch,
    shift_register,
)

READOUT_ACTIVATIONS = {
    # name: (function, Lipschitz constant, value at zero)
    "relu": (lambda v: np.maximum(v, 0.0), 1.0, 0.0),
    "identity": (lambda v: v, 1.0, 0.0),
    "tanh": (np.tanh, 1.0, 0.0),
}


def activation(name: str):
    try:
        return READOUT_ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unsupported readout activation {name!r}") from None


def conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class Atom:
    """One support point of an atomic measure."""

    prob: float
    w: float
    a: np.ndarray
    c: np.ndarray
    b: float


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite probability measure on (w, a, c, b), stored column-wise.

    Attributes:
        probs: (K,) positive, summing to one.
        w: (K,) outer weights.
        a: (K, N) state weights.
        c: (K, d) input weights.
        b: (K,) biases.
    """

    probs: np.ndarray
    w: np.ndarray
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        probs = np.atleast_1d(np.array(self.probs, dtype=float))
        w = np.atleast_1d(np.array(self.w, dtype=float))
        b = np.atleast_1d(np.array(self.b, dtype=float))
        a = np.array(self.a, dtype=float)
        c = np.array(self.c, dtype=float)
        K = probs.shape[0]
        if a.ndim == 1:
            a = a[None, :]
        if c.ndim == 1:
            c = c[None, :]
        if K == 0:
            raise ValueError("a measure needs at least one atom")
        if w.shape != (K,) or b.shape != (K,) or a.shape[0] != K or c.shape[0] != K:
            raise DimensionMismatchError("atom arrays disagree on the number of atoms")
        if np.any(probs <= 0):
            raise ValueError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities sum to {probs.sum():.15f}, not 1")
        for arr in (probs, w, a, c, b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("atom parameters must be finite")
            arr.setflags(write=False)
        for name, arr in zip(("probs", "w", "a", "c", "b"), (probs, w, a, c, b)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_atoms(cls, atoms: list[Atom]) -> "AtomicMeasure":
        return cls(
            [t.prob for t in atoms],
            [t.w for t in atoms],
            np.array([np.asarray(t.a, dtype=float) for t in atoms]),
            np.array([np.asarray(t.c, dtype=float) for t in atoms]),
            [t.b for t in atoms],
        )

    @property
    def atoms(self) -> list[Atom]:
        return [
            Atom(float(p), float(w), a.copy(), c.copy(), float(b))
            for p, w, a, c, b in zip(self.probs, self.w, self.a, self.c, self.b)
        ]

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @property
    def N(self) -> int:
        return self.a.shape[1]

    @property
    def d(self) -> int:
        return self.c.shape[1]

    def integral_norm(self, p: float = 2.0) -> float:
        """``int |w| (||a||_p + ||c|| + |b|) dmu``."""
        a_norm = np.linalg.norm(self.a, ord=p, axis=1)
        inner = a_norm + np.linalg.norm(self.c, axis=1) + np.abs(self.b)
        return float(np.sum(self.probs * np.abs(self.w) * inner))

    def integral_norm_sq(self, p: float = 2.0) -> float:
        """``(int w^2 (||a||_p^2 + ||c||^2 + b^2 + 1) dmu)^(1/2)``."""
        a_norm = np.linalg.norm(self.a, ord=p, axis=1)
        inner = a_norm**2 + np.sum(self.c**2, axis=1) + self.b**2 + 1.0
        return float(math.sqrt(np.sum(self.probs * self.w**2 * inner)))

    def state_weight_integral(self, p: float = 2.0) -> float:
        """``int |w| ||a||_p dmu``."""
        return float(np.sum(self.probs * np.abs(self.w) * np.linalg.norm(self.a, ord=p, axis=1)))

    @cached_property
    def I_mu(self) -> float:
        return self.integral_norm(2.0)

    def stacked(self) -> np.ndarray:
        """Atoms as rows ``(w, a, c, b)``."""
        return np.column_stack([self.w, self.a, self.c, self.b])

    def to_list(self) -> list[dict]:
        return [
            {"p": float(p), "w": float(w), "a": a.tolist(), "c": c.tolist(), "b": float(b)}
            for p, w, a, c, b in zip(self.probs, self.w, self.a, self.c, self.b)
        ]

    @classmethod
    def from_list(cls, items: list[dict]) -> "AtomicMeasure":
        return cls(
            [t["p"] for t in items],
            [t["w"] for t in items],
            np.array([t["a"] for t in items], dtype=float),
            np.array([t["c"] for t in items], dtype=float),
            [t["b"] for t in items],
        )


def readout_values(measure: AtomicMeasure, sigma2: str, states: np.ndarray, present: np.ndarray) -> np.ndarray:
    """Atomic readout on batches of states (S, N) and present inputs (S, d)."""
    fn = activation(sigma2)[0]
    pre = states @ measure.a.T + present @ measure.c.T + measure.b
    return fn(pre) @ (measure.probs * measure.w)


@dataclass(frozen=True, eq=False)
class BarronFunctional:
    """Functional built from a state system and an atomic measure.

    Attributes:
        system: Certified state system of size N.
        measure: Atomic measure with state weights in R^N.
        sigma2: Readout activation name.
    """

    system: StateSpaceSystem
    measure: AtomicMeasure
    sigma2: str = "relu"

    def __post_init__(self):
        activation(self.sigma2)
        if self.measure.N != self.system.N or self.measure.d != self.system.d:
            raise DimensionMismatchError(
                f"measure lives on (N={self.measure.N}, d={self.measure.d}) but the "
                f"system has (N={self.system.N}, d={self.system.d})"
            )

    @property
    def N(self) -> int:
        return self.system.N

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def lipschitz(self) -> float:
        return activation(self.sigma2)[1]

    def __call__(self, w: Window | np.ndarray) -> float:
        return evaluate(self, w)

    def eval_batch(self, Z: np.ndarray) -> np.ndarray:
        """Values on a batch of windows of shape (S, L, d)."""
        Z = np.asarray(Z, dtype=float)
        S, L, d = Z.shape
        if d != self.d:
            raise DimensionMismatchError(f"window dimension {d} != {self.d}")
        if L > 1:
            prev = run_batch(self.system, Z[:, :-1])[:, -1]
        else:
            prev = np.zeros((S, self.N))
        return readout_values(self.measure, self.sigma2, prev, Z[:, -1])

    def eval_path(self, inputs: np.ndarray) -> np.ndarray:
        """Values at every time of a path, each on its zero-padded prefix."""
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        states = run_batch(self.system, inputs[None])[0]
        prev = np.vstack([np.zeros((1, self.N)), states[:-1]])
        return readout_values(self.measure, self.sigma2, prev, inputs)

    def washout_length(self, M: float = 1.0, tol: float = 1e-9) -> int:
        """Burn-in after which the zero initial state is forgotten.

        Args:
            M: Sup-norm bound on the input coordinates.
        """
        return self.system.washout_length(M * math.sqrt(self.d), tol) + 1

    def to_dict(self) -> dict:
        out = self.system.to_dict()
        out["sigma2"] = self.sigma2
        out["atoms"] = self.measure.to_list()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BarronFunctional":
        return cls(
            StateSpaceSystem.from_dict(obj),
            AtomicMeasure.from_list(obj["atoms"]),
            obj.get("sigma2", "relu"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BarronFunctional":
        return cls.from_dict(json.loads(text))


def evaluate(H: BarronFunctional, w: Window | np.ndarray) -> float:
    """Value of the functional on one window."""
    data = w.data if isinstance(w, Window) else Window(w).data
    return float(H.eval_batch(data[None])[0])


def _lambda_shift_functional(measure: AtomicMeasure, d: int, N: int, lam: float, sigma2: str):
    A, C = lambda_shift(d, N, lam)
    return BarronFunctional(StateSpaceSystem(A, np.zeros(N), C), measure, sigma2)


def make_convolutional(h, lam: float, N: int, sigma2: str = "identity") -> BarronFunctional:
    """Linear filter ``sum_k h_{-k} . z_{-k}`` on a scaled shift.

    Args:
        h: Filter taps of shape (K+1, d), ``h[0]`` acting on the present input.
        lam: Shift scale in (0, 1].
        N: State size, at least ``d * K``.
        sigma2: ``"identity"`` uses one atom; ``"relu"`` uses a mirrored pair.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim == 1:
        h = h[:, None]
    K, d = h.shape[0] - 1, h.shape[1]
    if not 0 < lam <= 1:
        raise ValueError("lam must lie in (0, 1]")
    if N < max(d, d * K):
        raise ValueError(f"N={N} is too small for {K} past taps of dimension {d}")
    a = np.zeros(N)
    for k in range(1, K + 1):
        a[(k - 1) * d : k * d] = h[k] * lam ** (-(k - 1))
    if sigma2 == "identity":
        mu = AtomicMeasure([1.0], [1.0], a[None], h[0][None], [0.0])
    elif sigma2 == "relu":
        # relu(x) - relu(-x) = x, so two mirrored atoms with doubled weight
        mu = AtomicMeasure([0.5, 0.5], [2.0, -2.0], np.array([a, -a]), np.array([h[0], -h[0]]), [0.0, 0.0])
    else:
        raise ValueError("convolutional targets support identity or relu readouts")
    return _lambda_shift_functional(mu, d, N, lam, sigma2)


def make_finite_memory(net_atoms, T: int, d: int, probs=None, sigma2: str = "relu") -> BarronFunctional:
    """Functional of the last T inputs given by a one-layer network.

    Args:
        net_atoms: Sequence of ``(w, v)`` with ``v`` in R^(T d + 1). The first
            d entries of ``v`` act on the present input, the last is the bias.
        T: Memory length.
        d: Input dimension.
        probs: Mixture weights of the atoms; uniform by default.
        sigma2: Readout activation.
    """
    K = len(net_atoms)
    if K == 0:
        raise ValueError("need at least one network atom")
    probs = np.full(K, 1.0 / K) if probs is None else np.asarray(probs, dtype=float)
    N = T * d
    ws, As, Cs, Bs = [], [], [], []
    for w, v in net_atoms:
        v = np.asarray(v, dtype=float)
        if v.shape != (T * d + 1,):
            raise DimensionMismatchError(f"network atom has {v.shape[0]} entries, expected {T * d + 1}")
        a = np.zeros(N)
        a[: (T - 1) * d] = v[d : T * d]
        ws.append(float(w))
        As.append(a)
        Cs.append(v[:d])
        Bs.append(v[T * d])
    A, C = shift_register(d, T)
    mu = AtomicMeasure(probs, ws, np.array(As), np.array(Cs), Bs)
    return BarronFunctional(StateSpaceSystem(A, np.zeros(N), C), mu, sigma2)


def _interleave_order(n1: int, n2: int) -> np.ndarray:
    """Positions of the combined coordinates: alternate, then the remainder."""
    order = []
    for i in range(max(n1, n2)):
        if i < n1:
            order.append(i)
        if i < n2:
            order.append(n1 + i)
    return np.array(order)


def combine(H1: BarronFunctional, H2: BarronFunctional, lam1: float, lam2: float) -> BarronFunctional:
    """Realize ``lam1 H1 + lam2 H2`` on the interleaved product system.

    Coefficients are absorbed into the outer weights atom by atom, which
    also covers ``lam1 + lam2 == 0``.
    """
    if H1.d != H2.d:
        raise DimensionMismatchError("functionals have different input dimensions")
    if H1.sigma2 != H2.sigma2:
        raise ValueError("functionals use different readout activations")
    if H1.system.activation != H2.system.activation:
        raise ValueError("state systems use different activations")
    n1, n2 = H1.N, H2.N
    order = _interleave_order(n1, n2)
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = H1.system.A
    A[n1:, n1:] = H2.system.A
    B = np.concatenate([H1.system.B, H2.system.B])
    C = np.vstack([H1.system.C, H2.system.C])
    A, B, C = A[np.ix_(order, order)], B[order], C[order]
    m1, m2 = H1.measure, H2.measure
    a = np.vstack([np.hstack([m1.a, np.zeros((m1.size, n2))]), np.hstack([np.zeros((m2.size, n1)), m2.a])])
    mu = AtomicMeasure(
        np.concatenate([m1.probs, m2.probs]) / 2.0,
        np.concatenate([2.0 * lam1 * m1.w, 2.0 * lam2 * m2.w]),
        a[:, order],
        np.vstack([m1.c, m2.c]),
        np.concatenate([m1.b, m2.b]),
    )
    sys = StateSpaceSystem(A, B, C, H1.system.activation)
    return BarronFunctional(sys, mu, H1.sigma2)


def shift_tail(d: int, N: int, lam: float, q: float) -> float:
    """``(sum_{i > N} lam^(q (ceil(i/d) - 1)))^(1/q)`` over an infinite shift."""
    if lam == 0:
        return 1.0 if N < d else 0.0
    k0 = (N + 1 + d - 1) // d  # block holding coordinate N+1
    partial = (k0 * d - N) * lam ** (q * (k0 - 1))
    rest = d * lam ** (q * k0) / (1.0 - lam**q)
    return float((partial + rest) ** (1.0 / q))


def truncate(H: BarronFunctional, N: int, M: float = 1.0, q: float = 2.0) -> tuple[BarronFunctional, float]:
    """Keep the first N coordinates of a scaled-shift functional.

    Args:
        H: Functional whose system is an unbiased scaled shift with scale < 1.
        N: New state size, ``d <= N``. Larger sizes pad with zero weights.
        M: Sup-norm bound on the input coordinates.
        q: Exponent of the state norm; state weights use the conjugate norm.

    Returns:
        The truncated functional and a uniform error bound over inputs
        bounded by M.
    """
    lam = detect_lambda_shift(H.system)
    if lam is None:
        raise ValueError("truncation needs a scaled-shift state system")
    if not lam < 1:
        raise ValueError("truncation bound needs a shift scale below one")
    if N < H.d:
        raise ValueError(f"N={N} is below the input dimension {H.d}")
    mu = H.measure
    a = np.zeros((mu.size, N))
    keep = min(N, H.N)
    a[:, :keep] = mu.a[:, :keep]
    Ht = _lambda_shift_functional(AtomicMeasure(mu.probs, mu.w, a, mu.c, mu.b), H.d, N, lam, H.sigma2)
    if N >= H.N:
        # nothing was dropped; extra coordinates carry zero weight
        return Ht, 0.0
    p = conjugate(q)
    c_fin = H.lipschitz * mu.state_weight_integral(p)
    growth = 1.0 / (1.0 - H.system.lipschitz * lam)
    bound = c_fin * growth * M * shift_tail(H.d, N, lam, q)
    return Ht, float(bound)


def normalize_realization(H: BarronFunctional, lam: float, tol: float = 1e-10) -> BarronFunctional:
    """Rewrite a linear-state functional on a scaled shift of scale ``lam``.

    State weights become ``C^T (A/lam)^T^(k-1) a`` per block and biases absorb
    ``a . sum_k A^k B``. The block series is cut once its certified l2 tail
    is below ``tol ||a||``.

    Args:
        H: Functional with identity state activation.
        lam: Scale in (0, 1] such that some power of ``A / lam`` contracts.
        tol: Relative tail tolerance.
    """
    sys = H.system
    if sys.activation != "identity":
        raise ValueError("normalization needs the identity state activation")
    if not 0 < lam <= 1:
        raise ValueError("lam must lie in (0, 1]")
    At = sys.A / lam
    if contracting_power(At) is None:
        raise ValueError(
            f"lam={lam} is too small: no power of A/lam contracts, the weight series is not summable"
        )
    bc = block_constants(At)
    tail_factor = operator_norm(sys.C) * math.sqrt(bc.series_sum(2.0))
    mu = H.measure
    blocks = []
    row = mu.a.copy()
    P = np.eye(sys.N)
    while True:
        # discarded blocks j >= len(blocks) have l2 mass <= ||C|| ||At^j|| sqrt(S2) ||a||
        if operator_norm(P) * tail_factor <= tol or not np.any(P):
            break
        blocks.append(row @ sys.C)
        row = row @ At
        P = P @ At
        if len(blocks) > 100_000:
            raise RuntimeError("normalization series failed to converge")
    K = max(len(blocks), 1)
    if not blocks:
        blocks = [np.zeros((mu.size, sys.d))]
    a_new = np.hstack(blocks)
    offset = np.linalg.solve(np.eye(sys.N) - sys.A, sys.B)
    nu = AtomicMeasure(mu.probs, mu.w, a_new, mu.c, mu.b + mu.a @ offset)
    return _lambda_shift_functional(nu, sys.d, sys.d * K, lam, H.sigma2)


def transport_operator(esn, lam: float) -> np.ndarray:
    """``K^{-T} Lambda`` mapping scaled-shift state weights to reservoir weights."""
    from .esn import controllability

    ctrl = controllability(esn)
    if ctrl.is_singular:
        raise SingularControllabilityError(ctrl.sigma_min, ctrl.sigma_max)
    scales = lam ** np.repeat(np.arange(ctrl.T), esn.d)[: esn.N]
    return np.linalg.solve(ctrl.K.T, np.diag(scales))


def to_esn_coordinates(Hn: BarronFunctional, esn, M: float = 1.0) -> tuple[AtomicMeasure, float]:
    """Transport a scaled-shift functional onto a linear reservoir.

    Args:
        Hn: Functional on an unbiased scaled shift with state size N.
        esn: Linear reservoir of the same size N; N must be a multiple of d.
        M: Euclidean bound on the inputs.

    Returns:
        Measure for the reservoir state, and a uniform bound on the gap
        between the transported and the original functional over windows
        longer than ``N / d``.
    """
    from .esn import tail_bound  # local: esn imports this module

    lam = detect_lambda_shift(Hn.system)
    if lam is None:
        raise ValueError("transport needs a scaled-shift functional")
    if esn.N != Hn.N or esn.d != Hn.d:
        raise DimensionMismatchError(f"reservoir is ({esn.N}, {esn.d}), functional is ({Hn.N}, {Hn.d})")
    if Hn.N % Hn.d:
        raise ValueError("transport needs N to be a multiple of d")
    transport = transport_operator(esn, lam)
    d, N, T = Hn.d, Hn.N, -(-Hn.N // Hn.d)
    mu = Hn.measure
    a_new = mu.a @ transport.T
    drift = np.zeros(N)
    term = esn.B.copy()
    for _ in range(T):
        drift += term
        term = esn.A @ term
    nu = AtomicMeasure(mu.probs, mu.w, a_new, mu.c, mu.b - a_new @ drift)
    bound = Hn.lipschitz * tail_bound(esn, M, T, refined=True) * operator_norm(transport)
    bound *= mu.state_weight_integral(2.0)
    return nu, float(bound)
