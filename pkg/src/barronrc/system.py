"""State-space systems ``x_t = sigma(A x_{t-1} + C z_t + B)``.

A system is only constructed when a unique-solution certificate exists:
either ``L_sigma ||A|| < 1``, or identity activation with a power
``||A^k0|| < 1`` for some ``k0`` found by search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DimensionMismatchError, UncertifiedSystemError
from .seq import Window

ACTIVATION_LIPSCHITZ = {"identity": 1.0, "relu": 1.0}
K0_CAP = 64


def operator_norm(A: np.ndarray) -> float:
    """Spectral (largest singular value) norm of a matrix or vector."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if A.ndim == 1:
        return float(np.linalg.norm(A))
    return float(np.linalg.norm(A, 2))


def spectral_radius(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("spectral radius needs a square matrix")
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def contracting_power(A: np.ndarray, cap: int = K0_CAP) -> tuple[int, float] | None:
    """Smallest ``k <= cap`` with ``||A^k|| < 1``, with that norm."""
    A = np.asarray(A, dtype=float)
    P = np.eye(A.shape[0])
    for k in range(1, cap + 1):
        P = P @ A
        nrm = operator_norm(P)
        if nrm < 1.0:
            return k, nrm
    return None


@dataclass(frozen=True)
class BlockConstants:
    """Geometric envelope ``||A^k|| <= head * rate^floor(k / k0)``.

    Attributes:
        k0: Block length.
        rate: ``||A^k0||``.
        norms: ``||A^i||`` for ``i < k0``.
    """

    k0: int
    rate: float
    norms: tuple

    @property
    def head(self) -> float:
        return max(self.norms)

    def series_sum(self, power: float = 1.0) -> float:
        """Upper bound on ``sum_{k >= 0} ||A^k||^power``."""
        return sum(v**power for v in self.norms) / (1.0 - self.rate**power)


def block_constants(A: np.ndarray, cap: int = K0_CAP) -> BlockConstants:
    found = contracting_power(A, cap)
    if found is None:
        raise UncertifiedSystemError(f"no power of A up to {cap} has norm below one")
    k0, rate = found
    norms, P = [], np.eye(A.shape[0])
    for _ in range(k0):
        norms.append(operator_norm(P))
        P = P @ A
    return BlockConstants(k0, rate, tuple(norms))


@dataclass(frozen=True)
class UspCertificate:
    """Evidence that the state recursion has a unique bounded solution.

    Attributes:
        kind: ``"operator-norm"`` or ``"spectral-radius"``.
        value: ``L ||A||`` or ``rho(A)`` respectively.
        k0: Power with ``||A^k0|| < 1`` (spectral-radius kind only).
        power_norm: ``||A^k0||`` (spectral-radius kind only).
    """

    kind: Literal["operator-norm", "spectral-radius"]
    value: float
    k0: int | None = None
    power_norm: float | None = None


def certify(A: np.ndarray, activation: str = "identity", cap: int = K0_CAP) -> UspCertificate:
    """Find a unique-solution certificate or raise ``UncertifiedSystemError``."""
    if activation not in ACTIVATION_LIPSCHITZ:
        raise ValueError(f"unsupported activation {activation!r}")
    lip = ACTIVATION_LIPSCHITZ[activation]
    nrm = operator_norm(A)
    if lip * nrm < 1.0:
        return UspCertificate("operator-norm", lip * nrm)
    if activation != "identity":
        raise UncertifiedSystemError(
            f"L*||A|| = {lip * nrm:.6g} >= 1 and the activation is not the identity"
        )
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise UncertifiedSystemError(f"spectral radius {rho:.6g} >= 1")
    found = contracting_power(A, cap)
    if found is None:
        raise UncertifiedSystemError(f"no power of A up to {cap} has norm below one")
    return UspCertificate("spectral-radius", rho, found[0], found[1])


def _as_matrix(x, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim == 1 and cols == 1:
        arr = arr[:, None]
    if arr.shape != (rows, cols):
        raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceSystem:
    """Certified state system of size N driven by d-dimensional inputs.

    Attributes:
        A: Array (N, N).
        B: Array (N,).
        C: Array (N, d).
        activation: ``"identity"`` or ``"relu"``.
        certificate: Filled in on construction.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    activation: str = "identity"
    certificate: UspCertificate | None = field(default=None, init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionMismatchError("A must be a non-empty square matrix")
        n = A.shape[0]
        C = np.array(self.C, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        C = _as_matrix(C, n, C.shape[1], "C")
        B = _as_matrix(self.B, n, 1, "B")[:, 0]
        A = _as_matrix(A, n, n, "A")
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "certificate", certify(A, self.activation))

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.C.shape[1]

    @property
    def lipschitz(self) -> float:
        return ACTIVATION_LIPSCHITZ[self.activation]

    @property
    def norm_A(self) -> float:
        return operator_norm(self.A)

    def blocks(self) -> BlockConstants:
        """Geometric envelope of the powers of A."""
        return block_constants(self.A)

    def washout_length(self, M: float = 1.0, tol: float = 1e-9) -> int:
        """Steps after which the influence of the initial state is below ``tol``.

        Args:
            M: Euclidean bound on the inputs, used to bound the state size.
            tol: Target tolerance.
        """
        if not np.any(self.A):
            return 1
        if self.certificate.kind == "operator-norm":
            rate = self.certificate.value
            size = (operator_norm(self.C) * M + np.linalg.norm(self.B)) / (1 - rate)
            if size == 0:
                return 1
            return max(1, math.ceil(math.log(tol / size) / math.log(rate)))
        bc = self.blocks()
        size = (operator_norm(self.C) * M + np.linalg.norm(self.B)) * bc.series_sum()
        if size == 0:
            return 1
        # need head * size * rate^floor(k / k0) <= tol
        blocks = math.log(tol / (bc.head * size)) / math.log(bc.rate)
        return max(1, bc.k0 * (math.ceil(max(blocks, 0)) + 1))

    def to_dict(self) -> dict:
        return {
            "n": self.N,
            "d": self.d,
            "activation": self.activation,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StateSpaceSystem":
        sys = cls(obj["A"], obj["B"], obj["C"], obj.get("activation", "identity"))
        if sys.N != obj.get("n", sys.N) or sys.d != obj.get("d", sys.d):
            raise DimensionMismatchError("declared n/d disagree with the matrices")
        return sys

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StateSpaceSystem":
        return cls.from_dict(json.loads(text))


def _activate(kind: str, v: np.ndarray) -> np.ndarray:
    if kind == "identity":
        return v
    return np.maximum(v, 0.0)


def run_batch(sys: StateSpaceSystem, Z: np.ndarray, x_init: np.ndarray | None = None) -> np.ndarray:
    """Run the recursion on a batch of equal-length input paths.

    Args:
        sys: State system.
        Z: Inputs of shape (S, L, d), oldest first.
        x_init: Optional initial states (S, N) or (N,); zero by default.

    Returns:
        States of shape (S, L, N); entry ``[:, k]`` is the state after input k.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 3 or Z.shape[2] != sys.d:
        raise DimensionMismatchError(f"inputs must have shape (S, L, {sys.d})")
    S, L, _ = Z.shape
    x = np.zeros((S, sys.N))
    if x_init is not None:
        x = x + np.asarray(x_init, dtype=float)
    drive = Z @ sys.C.T + sys.B
    At = sys.A.T
    out = np.empty((S, L, sys.N))
    for k in range(L):
        x = _activate(sys.activation, x @ At + drive[:, k])
        out[:, k] = x
    return out


def run(sys: StateSpaceSystem, w: Window | np.ndarray, x_init: np.ndarray | None = None) -> np.ndarray:
    """States after each entry of the window, starting from zero.

    Returns:
        Array (L, N); the last row is the state at time 0.
    """
    data = w.data if isinstance(w, Window) else Window(w).data
    if data.shape[1] != sys.d:
        raise DimensionMismatchError(f"window dimension {data.shape[1]} != {sys.d}")
    return run_batch(sys, data[None], x_init)[0]


def bias_series(sys: StateSpaceSystem, tol: float = 1e-12) -> np.ndarray:
    """``sum_{k >= 0} A^k B`` with a certified tail below ``tol``."""
    bc = sys.blocks()
    bnorm = float(np.linalg.norm(sys.B))
    total = np.zeros(sys.N)
    term = sys.B.copy()
    P = np.eye(sys.N)
    k = 0
    while True:
        # ||sum_{j >= k} A^j B|| <= ||A^k|| * sum_j ||A^j|| * ||B||
        if operator_norm(P) * bc.series_sum() * bnorm <= tol:
            return total
        total += term
        term = sys.A @ term
        P = P @ sys.A
        k += 1
        if k > 1_000_000:
            raise RuntimeError("bias series failed to converge")


def closed_form(sys: StateSpaceSystem, w: Window | np.ndarray, t: int = 0, tol: float = 1e-12) -> np.ndarray:
    """State at time ``t`` from the explicit series of a linear system.

    Inputs before the window are zero; the constant drive B acts over the
    whole infinite past.

    Args:
        sys: System with identity activation.
        w: Input window.
        t: Time index in ``{-(L-1), ..., 0}``.
        tol: Tolerance for the truncated bias series.
    """
    if sys.activation != "identity":
        raise NotImplementedError("closed form needs the identity activation")
    data = w.data if isinstance(w, Window) else Window(w).data
    L = data.shape[0]
    if not -(L - 1) <= t <= 0:
        raise IndexError("t outside the window")
    pos = L - 1 + t
    x = bias_series(sys, tol)
    P = np.eye(sys.N)
    for k in range(pos + 1):
        x = x + P @ (sys.C @ data[pos - k])
        P = P @ sys.A
    return x


def shift_register(d: int, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of the plain shift register storing the last T inputs."""
    if d < 1 or T < 1:
        raise ValueError("d and T must be >= 1")
    return lambda_shift(d, d * T, 1.0)


def lambda_shift(d: int, N: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of the scaled shift: coordinate ``(k-1)d + j`` holds ``lam^(k-1) z_{t-k+1, j}``."""
    if d < 1 or N < d:
        raise ValueError("need d >= 1 and N >= d")
    if not 0 <= lam <= 1:
        raise ValueError("lam must lie in [0, 1]")
    A = np.zeros((N, N))
    idx = np.arange(d, N)
    A[idx, idx - d] = lam
    C = np.zeros((N, d))
    C[np.arange(d), np.arange(d)] = 1.0
    return A, C


def detect_lambda_shift(sys: StateSpaceSystem) -> float | None:
    """Return the scale if ``sys`` is an unbiased scaled shift, else None."""
    if np.any(sys.B):
        return None
    lam = float(sys.A[sys.d, 0]) if sys.N > sys.d else 0.0
    A, C = lambda_shift(sys.d, sys.N, lam)
    if np.array_equal(A, sys.A) and np.array_equal(C, sys.C):
        return lam
    return None
