"""Explicit approximation and risk bounds.

All constants are evaluated in float64 from a flat record of the
quantities they depend on. Norm bounds ``M`` are Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import BoundHypothesisError


@dataclass
class BoundInputs:
    """Quantities entering the bounds. Unused fields may stay ``None``.

    Attributes:
        d: Input dimension.
        N: Reservoir size and number of features.
        p: Exponent of the state-weight norm; ``q`` is its conjugate.
        lam: Normalization scale of the target realization.
        M: Euclidean bound on the inputs.
        L: Lipschitz constant of the readout activation.
        sigma0: ``|sigma2(0)|``.
        I_mu: ``int |w| (||a||_p + ||c|| + |b|) dmu``.
        I_mu2: ``(int w^2 (||a||_p^2 + ||c||^2 + b^2 + 1) dmu)^(1/2)``.
        norm_A, norm_B_q, norm_C: Norms of the target realization.
        esn_norm_A, esn_norm_B, esn_norm_C: Reservoir norms.
        transport_norm: ``||K^{-T} Lambda||``.
        kappa: Sup of the density of the transported target law.
        R: Readout cap.
        n: Sample size.
        r: Auxiliary rate in (esn_norm_A, 1).
        lam_dep: Dependence decay rate.
        C_dep: Dependence constant.
        M_out: Bound on the outputs.
        Ea2, Ec2, Eb2: Second moments of the feature law.
        w_sup: Sup of ``|w|`` under the feature law.
        v_sup: Sup of ``||v||`` over static inputs.
    """

    d: int | None = None
    N: int | None = None
    p: float = 2.0
    lam: float | None = None
    M: float | None = None
    L: float = 1.0
    sigma0: float = 0.0
    I_mu: float | None = None
    I_mu2: float | None = None
    norm_A: float | None = None
    norm_B_q: float | None = None
    norm_C: float | None = None
    esn_norm_A: float | None = None
    esn_norm_B: float | None = None
    esn_norm_C: float | None = None
    transport_norm: float | None = None
    kappa: float = 1.0
    R: float | None = None
    n: int | None = None
    r: float | None = None
    lam_dep: float | None = None
    C_dep: float | None = None
    M_out: float | None = None
    Ea2: float | None = None
    Ec2: float | None = None
    Eb2: float | None = None
    w_sup: float | None = None
    v_sup: float | None = None

    @property
    def q(self) -> float:
        p = self.p
        return math.inf if p == 1 else p / (p - 1.0)

    def need(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ValueError(f"bound input {name!r} is missing")

    def check(self) -> None:
        """Validate the ranges of the fields that are set."""
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.lam is not None and self.norm_A is not None and not self.norm_A < self.lam < 1:
            raise BoundHypothesisError(f"lam={self.lam} must lie in (||A||, 1) = ({self.norm_A}, 1)")
        if self.r is not None and self.esn_norm_A is not None and not self.esn_norm_A < self.r < 1:
            raise BoundHypothesisError(f"r={self.r} must lie in (||A_esn||, 1)")
        if self.esn_norm_A is not None and not self.esn_norm_A < 1:
            raise BoundHypothesisError("reservoir norm must be below one")
        if self.kappa < 1:
            raise ValueError("a density bound of a probability law is at least one")


@dataclass
class BoundReport:
    """Constants, per-term values and totals."""

    c1_tilde: float = math.nan
    C_H_esn: float = math.nan
    approx_terms: tuple = ()
    approx_total: float = math.nan
    C_approx: float = math.nan
    learn_terms: tuple = ()
    c2_tilde: float = math.nan
    C_est: float = math.nan
    est_term: float = math.nan
    learning_total: float = math.nan
    static_C_H: float = math.nan
    static_total: float = math.nan

    def to_dict(self) -> dict:
        out = asdict(self)
        out["approx_terms"] = list(self.approx_terms)
        out["learn_terms"] = list(self.learn_terms)
        return out


def first_constant(inp: BoundInputs) -> float:
    """Leading constant of the approximation bound."""
    inp.need("d", "lam", "M")
    d, p, q, lam = inp.d, inp.p, inp.q, inp.lam
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    tail_q = 1.0 if math.isinf(q) else (1.0 - lam**q) ** (-1.0 / q)
    return (
        math.sqrt(8.0)
        * max(inp.L, abs(inp.sigma0), 1.0)
        * max(1.0, d ** (0.5 - 1.0 / p))
        * d ** (1.0 / (2.0 * p))
        * max(1.0, d ** (inv_q - 0.5))
        / (1.0 - lam)
        * tail_q
        / lam
        * max(inp.M, 1.0) ** 2
    )


def approximation_constant(inp: BoundInputs) -> float:
    """Constant multiplying the three approximation terms."""
    inp.need("norm_A", "norm_B_q", "norm_C", "I_mu", "I_mu2", "esn_norm_A", "esn_norm_B", "esn_norm_C", "transport_norm")
    inp.check()
    p = inp.p
    realization = max(
        inp.norm_C / (1.0 - (inp.norm_A / inp.lam) ** p) ** (1.0 / p),
        inp.norm_B_q / (1.0 - inp.norm_A),
        1.0,
    )
    reservoir = 1.0 + (inp.esn_norm_C + inp.esn_norm_B) / (1.0 - inp.esn_norm_A) * inp.transport_norm
    return first_constant(inp) * realization * max(inp.I_mu, inp.I_mu2) * reservoir


def _terms(inp: BoundInputs, with_kappa: bool) -> tuple[float, float, float]:
    inp.need("N", "d")
    T = -(-inp.N // inp.d)
    mc = inp.N ** -0.5 * (math.sqrt(inp.kappa) if with_kappa else 1.0)
    return (inp.lam ** (inp.N / inp.d), inp.esn_norm_A**T, mc)


def approx_bound(inp: BoundInputs) -> BoundReport:
    """Bound on the L2 distance between the target and the random-feature reservoir."""
    C = approximation_constant(inp)
    terms = _terms(inp, with_kappa=True)
    return BoundReport(c1_tilde=first_constant(inp), C_H_esn=C, approx_terms=terms, approx_total=C * sum(terms))


def second_constant(inp: BoundInputs) -> float:
    inp.need("C_dep", "M", "M_out")
    inner = max(1.0, inp.C_dep) * max(inp.M, 1.0) ** 5 * max(inp.M_out, 1.0) ** 3 * max(inp.L, abs(inp.sigma0), 1.0)
    return 2.0**6 * math.sqrt(inner)


def estimation_constant(inp: BoundInputs) -> float:
    inp.need("esn_norm_A", "esn_norm_B", "esn_norm_C", "r", "lam_dep", "R", "Ea2", "Ec2", "Eb2", "w_sup")
    inp.check()
    lam_max = max(inp.r, inp.lam_dep)
    log_inv = math.log(1.0 / lam_max)
    a, bnorm, cnorm = inp.esn_norm_A, inp.esn_norm_B, inp.esn_norm_C
    moments = math.sqrt(inp.Ea2) + math.sqrt(inp.Ec2) + math.sqrt(inp.Eb2) + 1.0
    w_term = max(1.0 / (inp.kappa * inp.w_sup), 1.0) if inp.w_sup > 0 else math.inf
    rates = inp.r / (1.0 - inp.r) + 1.0 / lam_max + math.sqrt(cnorm**2 + 1.0) / lam_max / log_inv
    inside = (
        (cnorm + bnorm + 1.0) ** 3
        / ((1.0 - a) ** 3 * math.sqrt(log_inv))
        * max(inp.R, 1.0)
        * moments
        / math.sqrt(inp.r**2 - a**2)
        * w_term
        * rates
    )
    return second_constant(inp) * math.sqrt(inside)


def learning_bound(inp: BoundInputs) -> BoundReport:
    """Bound on the expected generalization error of the fitted readout."""
    inp.need("n", "N", "R", "r", "lam_dep")
    n = inp.n
    lam_max = max(inp.r, inp.lam_dep)
    if not n > 1 or not math.log(n) < n * math.log(1.0 / lam_max):
        raise BoundHypothesisError(f"sample size n={n} is too small for decay rate {lam_max}")
    if inp.w_sup is not None and inp.R < inp.kappa * inp.w_sup / math.sqrt(inp.N) - 1e-12:
        raise BoundHypothesisError("readout cap R is below kappa * sup|w| / sqrt(N)")
    C_H = approximation_constant(inp)
    C_approx = C_H * max(math.sqrt(inp.kappa), 1.0)
    terms = _terms(inp, with_kappa=False)
    C_est = estimation_constant(inp)
    est = math.sqrt(inp.R * math.sqrt(inp.N) * math.sqrt(math.log(n)) / math.sqrt(n))
    return BoundReport(
        c1_tilde=first_constant(inp),
        C_H_esn=C_H,
        C_approx=C_approx,
        learn_terms=terms,
        c2_tilde=second_constant(inp),
        C_est=C_est,
        est_term=est,
        learning_total=C_approx * sum(terms) + C_est * est,
    )


def static_bound(inp: BoundInputs) -> BoundReport:
    """Random-feature bound for functions of a single input."""
    inp.need("N", "I_mu2", "v_sup")
    C_H = math.sqrt(2.0 * max(2.0 * inp.L**2, inp.sigma0**2) * max(1.0, inp.v_sup**2)) * inp.I_mu2 * math.sqrt(inp.kappa)
    return BoundReport(static_C_H=C_H, static_total=C_H / math.sqrt(inp.N))


def field_names() -> list[str]:
    return [f.name for f in fields(BoundInputs)]
