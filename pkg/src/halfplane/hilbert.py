"""The Hilbert-type operator on weighted spaces of the half-line.

    H_beta f(x) = int_0^inf f(y) y^beta (x + y)^-(1 + beta) dy.

Throughout, ``spec.k`` is the exponent of the weight carried by the space,
so the measure is ``omega**spec.k (y) y^alpha dy``.  The operator is bounded
on ``L^p`` of that measure exactly when ``alpha + 1 < p (beta + 1)``
(``beta > alpha`` when p = 1), whatever the weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quadrature import (
    DEFAULT_SCHEME,
    PanelScheme,
    SpaceParams,
    composite_rule,
    geometric_breakpoints,
    integrate_halfline,
    integrate_range,
)
from .special import beta as beta_fn
from .weights import DomainError, WeightSpec, log_base_weight, weight_eval

__all__ = [
    "HalfLineFunction",
    "hilbert_kernel",
    "apply_hilbert",
    "apply_adjoint",
    "weighted_pairing",
    "SchurResult",
    "schur_verify",
    "schur_constant",
    "sharp_norm",
    "DiscreteOperator",
    "NormEstimate",
    "norm_estimate",
    "WitnessResult",
    "witness",
    "ThresholdVerdict",
    "threshold_classify",
    "near_critical",
    "NORM_SCHEME",
]


# -- functions on the half-line -----------------------------------------------

@dataclass(frozen=True)
class HalfLineFunction:
    """A function on (0, inf) given by a vectorised evaluator.

    ``support`` (if set) is a compact interval outside which the function
    vanishes; ``breakpoints`` are points where it is not smooth.
    ``envelope`` records the power behaviour ``(s0, s_inf)`` at 0 and at
    infinity (``|f| ~ y^s0`` and ``|f| ~ y^s_inf``).
    """

    evaluator: Callable
    support: tuple[float, float] | None = None
    breakpoints: tuple[float, ...] = ()
    envelope: tuple[float, float] | None = None
    label: str = ""

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.asarray(self.evaluator(y), dtype=float)
        if self.support is not None:
            a, b = self.support
            out = np.where((y >= a) & (y <= b), out, 0.0)
        return out

    def dilate(self, c: float) -> "HalfLineFunction":
        """y -> f(c y)."""
        if not c > 0:
            raise DomainError("dilation factor must be positive")
        sup = None if self.support is None else (self.support[0] / c, self.support[1] / c)
        return HalfLineFunction(lambda y: self.evaluator(c * np.asarray(y)), sup,
                                tuple(b / c for b in self.breakpoints), self.envelope,
                                f"{self.label}(c*y)")

    @classmethod
    def indicator(cls, a: float = 1.0, b: float = 2.0) -> "HalfLineFunction":
        return cls(lambda y: np.ones_like(np.asarray(y, float)), (a, b), (a, b), None,
                   f"chi[{a},{b}]")

    @classmethod
    def bump(cls, a: float = 1.0, b: float = 2.0) -> "HalfLineFunction":
        """Smooth bump exp(-1 / (1 - u^2)) in u = affine image of [a, b] onto [-1, 1]."""
        mid, half = 0.5 * (a + b), 0.5 * (b - a)

        def ev(y):
            u = (np.asarray(y, float) - mid) / half
            inside = np.abs(u) < 1
            out = np.zeros_like(u)
            out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
            return out

        return cls(ev, (a, b), (a, b), None, f"bump[{a},{b}]")

    @classmethod
    def power(cls, s0: float, s_inf: float | None = None) -> "HalfLineFunction":
        """y^s0 / (1 + y)^(s0 - s_inf): power s0 at 0 and s_inf at infinity."""
        s_inf = s0 if s_inf is None else s_inf
        return cls(lambda y: np.exp(s0 * np.log(y) - (s0 - s_inf) * np.log1p(y)),
                   None, (), (s0, s_inf), f"pow({s0},{s_inf})")

    @classmethod
    def zero(cls) -> "HalfLineFunction":
        return cls(lambda y: np.zeros_like(np.asarray(y, float)), None, (), None, "0")


def hilbert_kernel(x, y, beta: float):
    """y^beta (x + y)^-(1 + beta), evaluated through logs."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return np.exp(beta * np.log(y) - (1.0 + beta) * np.log(x + y))


def _integrate_against(f: HalfLineFunction, g: Callable, x: float, scheme: PanelScheme,
                       extra=()) -> float:
    def integrand(y):
        return f(y) * g(y)

    if f.support is not None:
        a, b = f.support
        r = integrate_range(integrand, a, b, scheme, tuple(extra) + tuple(f.breakpoints))
    else:
        r = integrate_halfline(integrand, scheme, scale=x,
                               breakpoints=tuple(extra) + tuple(f.breakpoints))
    return math.inf if r.diverged else float(r.value)


def apply_hilbert(f: HalfLineFunction, beta: float, x, scheme: PanelScheme = DEFAULT_SCHEME):
    """H_beta f at x (scalar or array).  A divergent integral gives inf."""
    if not beta > -1:
        raise DomainError("beta must be > -1")
    xs = np.atleast_1d(np.asarray(x, float))
    if np.any(xs <= 0):
        raise DomainError("x must be > 0")
    out = np.array([_integrate_against(f, lambda y, xv=xv: hilbert_kernel(xv, y, beta), xv, scheme)
                    for xv in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


def apply_adjoint(f: HalfLineFunction, params: SpaceParams, spec: WeightSpec, x,
                  scheme: PanelScheme = DEFAULT_SCHEME):
    """Adjoint of H_beta for the pairing with omega**k(y) y^alpha dy:

        omega^-k(x) x^(beta - alpha) int f(y) omega^k(y) y^alpha (x + y)^-(1 + beta) dy.
    """
    alpha, beta = params.alpha, params.beta
    xs = np.atleast_1d(np.asarray(x, float))
    if np.any(xs <= 0):
        raise DomainError("x must be > 0")
    kinks = spec.kinks()
    vals = []
    for xv in xs:
        def g(y, xv=xv):
            return weight_eval(spec, y) * np.exp(alpha * np.log(y)) / (xv + y) ** (1.0 + beta)

        inner = _integrate_against(f, g, xv, scheme, kinks)
        vals.append(inner * xv ** (beta - alpha) / weight_eval(spec, float(xv)))
    out = np.array(vals)
    return float(out[0]) if np.ndim(x) == 0 else out


def weighted_pairing(u: Callable, v: Callable, params: SpaceParams, spec: WeightSpec,
                     support: tuple[float, float] | None = None,
                     scheme: PanelScheme = DEFAULT_SCHEME) -> float:
    """<u, v> = int u v omega^k(y) y^alpha dy (over ``support`` when given)."""
    alpha = params.alpha

    def integrand(y):
        return u(y) * v(y) * weight_eval(spec, y) * np.exp(alpha * np.log(y))

    if support is not None:
        r = integrate_range(integrand, support[0], support[1], scheme, spec.kinks())
    else:
        r = integrate_halfline(integrand, scheme, breakpoints=spec.kinks())
    return math.inf if r.diverged else float(r.value)


# -- Schur test ---------------------------------------------------------------

def schur_constant(params: SpaceParams) -> float:
    """Both unweighted Schur ratios equal B((alpha+1)/p, beta + 1 - (alpha+1)/p)."""
    c = (params.alpha + 1.0) / params.p
    if not params.beta + 1.0 - c > 0:
        return math.inf
    return beta_fn(c, params.beta + 1.0 - c)


def sharp_norm(p: float, beta: float) -> float:
    """Norm of H_beta on the unweighted L^p(dy): B(beta + 1 - 1/p, 1/p)."""
    return beta_fn(beta + 1.0 - 1.0 / p, 1.0 / p)


@dataclass
class SchurResult:
    grid: np.ndarray
    ratio1: np.ndarray
    ratio2: np.ndarray
    sup1: float
    sup2: float
    finite: bool

    def to_record(self):
        return {"sup1": self.sup1, "sup2": self.sup2, "finite": self.finite,
                "inf1": float(np.min(self.ratio1)), "inf2": float(np.min(self.ratio2))}


def schur_verify(params: SpaceParams, spec: WeightSpec, grid: Sequence[float] | None = None,
                 scheme: PanelScheme = DEFAULT_SCHEME) -> SchurResult:
    """Both Schur integrals for phi(t) = t^-((alpha+1)/(p p')) against phi^p' and phi^p.

    With W = omega**k the kernel of H_beta relative to W(y) y^alpha dy is
    K(x, y) = W^-1(y) y^(beta - alpha) (x + y)^-(1 + beta).  The ratios

        r1(x) = int K(x, y) phi^p'(y) W(y) y^alpha dy / phi^p'(x)
        r2(y) = int K(x, y) phi^p(x) W(x) x^alpha dx / phi^p(y)

    are bounded exactly when alpha + 1 < p (beta + 1); a divergent integral
    makes the corresponding ratio infinite.
    """
    p, alpha, beta = params.p, params.alpha, params.beta
    if p == 1:
        raise DomainError("the Schur test is the p > 1 path; use the p = 1 witnesses")
    pc = params.p_conj
    grid = 2.0 ** np.arange(-8, 9) if grid is None else np.asarray(grid, float)
    c1 = (alpha + 1.0) / p          # phi^p'(t) = t^-c1
    c2 = (alpha + 1.0) / pc         # phi^p(t)  = t^-c2
    kinks = spec.kinks()
    r1, r2 = [], []
    for x in grid:
        # weight cancels in the first integral
        q1 = integrate_halfline(lambda y, x=x: np.exp((beta - c1) * np.log(y)
                                                      - (1 + beta) * np.log(x + y)),
                                scheme, scale=x)
        r1.append(math.inf if q1.diverged else q1.value * x ** c1)
        q2 = integrate_halfline(lambda t, y=x: weight_eval(spec, t)
                                * np.exp((alpha - c2) * np.log(t) - (1 + beta) * np.log(t + y)),
                                scheme, scale=x, breakpoints=kinks)
        pref = x ** (beta - alpha) / weight_eval(spec, float(x))
        r2.append(math.inf if q2.diverged else q2.value * pref * x ** c2)
    r1, r2 = np.array(r1), np.array(r2)
    sup1, sup2 = float(np.max(r1)), float(np.max(r2))
    return SchurResult(grid, r1, r2, sup1, sup2, bool(math.isfinite(sup1) and math.isfinite(sup2)))


# -- discretisation and norm estimation ---------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """H_beta on the Gauss nodes of a dyadic panel scheme.

    ``matrix[i, j] = m_i^(1/p) K(x_i, x_j) u_j m_j^(-1/p)`` where ``u`` are the
    quadrature weights and ``m = u omega^k x^alpha``, so the weighted L^p norm
    becomes the plain l^p norm.
    """

    nodes: np.ndarray
    weights: np.ndarray
    measure: np.ndarray
    matrix: np.ndarray
    p: float
    j_lo: int
    j_hi: int

    @classmethod
    def build(cls, params: SpaceParams, spec: WeightSpec, scheme: PanelScheme) -> "DiscreteOperator":
        bps = geometric_breakpoints(2.0 ** scheme.j_lo, 2.0 ** scheme.j_hi,
                                    scheme.panels_per_octave)
        x, u = composite_rule(bps, scheme.nodes_per_panel)
        p = params.p
        log_m = np.log(u) + params.alpha * np.log(x)
        if spec.k != 0:
            log_m = log_m + spec.k * log_base_weight(spec, x)
        lx = np.log(x)
        log_k = params.beta * lx[None, :] - (1 + params.beta) * np.log(x[:, None] + x[None, :])
        logt = log_m[:, None] / p + log_k + np.log(u)[None, :] - log_m[None, :] / p
        mat = np.exp(logt)
        if not np.all(np.isfinite(mat)) or np.any(mat < 0):
            raise DomainError("discretised kernel has non-finite entries")
        return cls(x, u, np.exp(log_m), mat, p, scheme.j_lo, scheme.j_hi)

    @property
    def size(self) -> int:
        return self.nodes.size


# Wide in log y, coarse in nodes: the kernel is smooth on the log scale, while
# the finite-section deficit decays only like (ln(b/a))^-2.
NORM_SCHEME = PanelScheme(-64, 64, 8, 1)


@dataclass
class NormEstimate:
    value: float
    converged: bool
    iterations: int
    trend: list = field(default_factory=list)
    domains: list = field(default_factory=list)

    def to_record(self):
        return {"norm_estimate": self.value, "converged": self.converged,
                "iterations": self.iterations, "trend": list(self.trend)}


def _lp_norm(v, p):
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def _lanczos_top(T: np.ndarray, start: np.ndarray, tol: float, max_iter: int):
    """Top eigenvalue of T^T T by Lanczos with full reorthogonalisation.

    Stops when the top Ritz value changes by less than ``tol`` (relative).
    """
    n = start.size
    Q = np.zeros((min(max_iter, n) + 1, n))
    Q[0] = start / np.linalg.norm(start)
    alphas, betas = [], []
    prev = 0.0
    for it in range(1, min(max_iter, n) + 1):
        w = T.T @ (T @ Q[it - 1])
        a = float(Q[it - 1] @ w)
        w -= a * Q[it - 1]
        if it > 1:
            w -= betas[-1] * Q[it - 2]
        w -= Q[:it].T @ (Q[:it] @ w)
        alphas.append(a)
        tri = np.diag(alphas)
        if betas:
            tri += np.diag(betas, 1) + np.diag(betas, -1)
        top = float(np.linalg.eigvalsh(tri)[-1])
        b = float(np.linalg.norm(w))
        if abs(top - prev) <= tol * top or b <= 1e-14 * max(top, 1e-300):
            return math.sqrt(max(top, 0.0)), True, it
        prev = top
        betas.append(b)
        Q[it] = w / b
    return math.sqrt(max(prev, 0.0)), False, max_iter


def _power_norm(T: np.ndarray, p: float, start: np.ndarray, tol=1e-6, max_iter=None):
    """Largest ||T a||_p / ||a||_p for a nonnegative matrix T.

    p = 1 is the exact largest column sum; p = 2 uses Krylov (Lanczos) steps
    on T^T T; other p use Boyd's nonlinear power iteration, which converges
    from below.
    """
    if p == 1:
        return float(np.max(T.sum(axis=0))), True, 1
    if p == 2:
        return _lanczos_top(T, start, tol, max_iter or 300)
    a = start / _lp_norm(start, p)
    est_prev = 0.0
    max_iter = max_iter or 200
    q = p / (p - 1.0)
    for it in range(1, max_iter + 1):
        ta = T @ a
        est = _lp_norm(ta, p)
        if est == 0:
            return 0.0, True, it
        z = T.T @ (ta ** (p - 1.0))
        a = z ** (q - 1.0)
        a = a / _lp_norm(a, p)
        if abs(est - est_prev) <= tol * est:
            return est, True, it
        est_prev = est
    return est, False, max_iter


def norm_estimate(params: SpaceParams, spec: WeightSpec,
                  discretization: DiscreteOperator | PanelScheme | None = None,
                  trend_shrink: Sequence[int] = (8, 4), tol: float = 1e-6) -> NormEstimate:
    """Estimate the norm of H_beta on L^p(omega^k y^alpha dy).

    The estimate on the full domain is reported with the estimates on the
    nested domains obtained by dropping ``trend_shrink`` octaves at each end
    (principal sub-matrices, so the sequence is nondecreasing up to the
    iteration tolerance).
    """
    if discretization is None:
        discretization = NORM_SCHEME
    op = (discretization if isinstance(discretization, DiscreteOperator)
          else DiscreteOperator.build(params, spec, discretization))
    p = op.p
    c = (params.alpha + 1.0) / p
    # near-extremal start: the Schur function, expressed in l^p coordinates
    start = op.measure ** (1.0 / p) * np.exp(-c * np.log(op.nodes))
    trend, domains = [], []
    span = op.j_hi - op.j_lo
    for s in sorted(trend_shrink, reverse=True):
        if 2 * s >= span:
            continue
        lo, hi = 2.0 ** (op.j_lo + s), 2.0 ** (op.j_hi - s)
        idx = np.nonzero((op.nodes >= lo) & (op.nodes <= hi))[0]
        v, _, _ = _power_norm(op.matrix[np.ix_(idx, idx)], p, start[idx], tol)
        trend.append(v)
        domains.append((op.j_lo + s, op.j_hi - s))
    value, conv, its = _power_norm(op.matrix, p, start, tol)
    trend.append(value)
    domains.append((op.j_lo, op.j_hi))
    return NormEstimate(value, conv, its, trend, domains)


# -- necessity witnesses and threshold classification -------------------------

_FAR = np.array([200.0, 400.0, 600.0, 800.0, 1000.0])


def _asymptotics(log_g: Callable, side: str):
    """Fit ln g(x) = c + s ln x + m ln|ln x| far towards ``side`` (0 or inf)."""
    lx = (-_FAR if side == "zero" else _FAR) * math.log(2.0)
    vals = np.array([log_g(float(v)) for v in lx])
    A = np.column_stack([np.ones_like(lx), lx, np.log(np.abs(lx))])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return float(coef[1]), float(coef[2])


def _integral_diverges(s, m, side, tol=1e-3):
    # int x^s |ln x|^m dx near the endpoint
    e = s + 1.0 if side == "zero" else -(s + 1.0)
    if e < -tol:
        return True
    if e > tol:
        return False
    return m >= -1.0 - 0.05


def _sup_diverges(s, m, side, tol=1e-3):
    # sup of x^s |ln x|^m near the endpoint
    e = s if side == "zero" else -s
    if e < -tol:
        return True
    if e > tol:
        return False
    return m > 0.05


@dataclass
class WitnessResult:
    verdict: str
    exponents: dict
    kind: str

    def to_record(self):
        return {"witness_verdict": self.verdict, "witness_kind": self.kind,
                **{f"witness_{k}": v for k, v in self.exponents.items()}}


def witness(p: float, alpha: float, beta: float, spec: WeightSpec) -> WitnessResult:
    """Divergence of the necessity witnesses built on f = chi_[1,2].

    p > 1: the adjoint image omega^-k x^(beta-alpha) (x+1)^-(1+beta) must lie
    in L^p'(omega^k x^alpha), i.e.

        int omega^(k(1-p')) x^((beta-alpha)p' + alpha) (x+1)^(-(1+beta)p') dx < inf.

    p = 1: omega^-k x^(beta-alpha) must stay bounded near 0 and
    int omega^k x^alpha (x+1)^-(1+beta) dx must converge.
    The tails are decided from fitted power/log exponents far out
    (|ln2 x| up to 1000), computed in log space.
    """
    K = spec.k

    def lw(x_log):
        return log_base_weight(spec, math.exp(x_log)) if spec.k != 0 else 0.0

    if p > 1:
        pc = p / (p - 1.0)

        def log_g(t):
            return (K * (1 - pc) * lw(t) + ((beta - alpha) * pc + alpha) * t
                    - (1 + beta) * pc * np.logaddexp(t, 0.0))

        s0, m0 = _asymptotics(log_g, "zero")
        s1, m1 = _asymptotics(log_g, "inf")
        div = _integral_diverges(s0, m0, "zero") or _integral_diverges(s1, m1, "inf")
        return WitnessResult("unbounded" if div else "bounded",
                             {"s0": s0, "m0": m0, "s_inf": s1, "m_inf": m1}, "adjoint-Lp'")

    def log_sup(t):
        return -K * lw(t) + (beta - alpha) * t

    def log_int(t):
        return K * lw(t) + alpha * t - (1 + beta) * np.logaddexp(t, 0.0)

    s0, m0 = _asymptotics(log_sup, "zero")
    i0, n0 = _asymptotics(log_int, "zero")
    i1, n1 = _asymptotics(log_int, "inf")
    div = (_sup_diverges(s0, m0, "zero") or _integral_diverges(i0, n0, "zero")
           or _integral_diverges(i1, n1, "inf"))
    return WitnessResult("unbounded" if div else "bounded",
                         {"s0": s0, "m0": m0, "s_inf": i1, "m_inf": n1}, "adjoint-sup+L1")


def near_critical(p: float, alpha: float, beta: float, band: float = 0.05) -> bool:
    return abs(alpha + 1.0 - p * (beta + 1.0)) < band


@dataclass
class ThresholdVerdict:
    p: float
    alpha: float
    beta: float
    predicate: bool
    verdict: str
    witness_verdict: str
    trend_verdict: str | None
    signals_agree: bool | None
    norm_trend: list

    def to_record(self):
        return {"p": self.p, "alpha": self.alpha, "beta": self.beta,
                "predicate": self.predicate, "verdict": self.verdict,
                "witness_verdict": self.witness_verdict,
                "trend_verdict": self.trend_verdict or "",
                "norm_estimate": self.norm_trend[-1] if self.norm_trend else float("nan"),
                "trend": ";".join(repr(v) for v in self.norm_trend)}


TREND_SCHEME = PanelScheme(-12, 12, 8, 2)


def threshold_classify(p: float, alpha: float, spec: WeightSpec, beta_grid: Sequence[float],
                       band: float = 0.05, trend: bool = True,
                       trend_scheme: PanelScheme = TREND_SCHEME) -> list[ThresholdVerdict]:
    """Classify H_beta on L^p(omega^k y^alpha) as bounded/unbounded for each beta.

    The verdict is the necessity witness.  When the point is far from the
    threshold (gap >= 0.5) the truncation trend of the norm estimate is a
    second signal: growth of 1.5x or more between the last two nested
    domains reads as unbounded.  Points within ``band`` of the threshold are
    reported as "near-critical".
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    out = []
    for beta in beta_grid:
        beta = float(beta)
        if not beta > -1:
            raise DomainError("beta must be > -1")
        pred = alpha + 1.0 < p * (beta + 1.0) if p > 1 else beta > alpha
        w = witness(p, alpha, beta, spec)
        tv, agree, tr = None, None, []
        gap = abs(alpha + 1.0 - p * (beta + 1.0))
        if trend and gap >= 0.5:
            params = SpaceParams(p, p, alpha, beta)
            est = norm_estimate(params, spec, trend_scheme, trend_shrink=(4,), tol=1e-4)
            tr = est.trend
            grow = tr[-1] / tr[-2] if tr[-2] > 0 else math.inf
            tv = "unbounded" if grow >= 1.5 else "bounded"
            agree = tv == w.verdict
        verdict = "near-critical" if gap < band else w.verdict
        out.append(ThresholdVerdict(p, alpha, beta, bool(pred), verdict, w.verdict, tv, agree, tr))
    return out
