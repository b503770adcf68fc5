"""Dyadic-panel quadrature on (0, inf) and on the upper half-plane.

The half-line rule is composite Gauss-Legendre on panels that are uniform in
``log y`` (``panels_per_octave`` panels per factor of two), so algebraic
behaviour at 0 and at infinity is resolved at every scale.  The truncated
ends are closed with power-law tails fitted to the integrand at the domain
ends; a fitted exponent that is not integrable marks the integral divergent.

Horizontal slices ``x -> f(x + iy)`` use composite Gauss panels graded
geometrically around the horizontal positions of the singularities of ``f``
(its *features*), truncated at ``|x| = R`` with a fitted algebraic tail.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .special import beta as beta_fn
from .weights import DomainError, WeightSpec, weight_eval

__all__ = [
    "IntegrationError",
    "PanelScheme",
    "SpaceParams",
    "QuadResult",
    "gauss_rule",
    "composite_rule",
    "geometric_breakpoints",
    "integrate_range",
    "integrate_halfline",
    "interval_mass",
    "forelli_rudin",
    "forelli_rudin_exact",
    "slice_rule",
    "slice_integral",
    "GridFunction",
    "Evaluable",
    "SliceProfile",
    "slice_pnorm",
    "mixed_norm",
    "MixedNorm",
    "integrate_halfplane",
    "divergence_trend",
]


class IntegrationError(ArithmeticError):
    """The integrand produced a non-finite value."""


# -- schemes and parameters ---------------------------------------------------

@dataclass(frozen=True)
class PanelScheme:
    """Composite Gauss rule on ``[2**j_lo, 2**j_hi]`` (times a scale)."""

    j_lo: int = -20
    j_hi: int = 20
    nodes_per_panel: int = 16
    panels_per_octave: int = 4
    x_half_width: float = 2.0 ** 10

    def __post_init__(self):
        if not self.j_lo < self.j_hi:
            raise DomainError("PanelScheme needs j_lo < j_hi")
        if self.nodes_per_panel < 2 or self.panels_per_octave < 1:
            raise DomainError("PanelScheme needs nodes_per_panel >= 2 and panels_per_octave >= 1")

    def refined(self) -> "PanelScheme":
        return replace(self, nodes_per_panel=2 * self.nodes_per_panel)

    def coarsened(self) -> "PanelScheme":
        return replace(self, nodes_per_panel=max(2, self.nodes_per_panel // 2))

    def with_domain(self, j_lo: int, j_hi: int) -> "PanelScheme":
        return replace(self, j_lo=j_lo, j_hi=j_hi)

    def to_dict(self):
        return asdict(self)


DEFAULT_SCHEME = PanelScheme()


@dataclass(frozen=True)
class SpaceParams:
    """Exponents (p, q) and the power weights alpha (space) / beta (operator)."""

    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1 and math.isfinite(self.p) and math.isfinite(self.q)):
            raise DomainError("p and q must lie in [1, inf)")
        if not self.alpha > -1:
            raise DomainError("alpha must be > -1")
        if not self.beta > -1:
            raise DomainError("beta must be > -1")

    @staticmethod
    def conj(r: float) -> float:
        return math.inf if r == 1 else r / (r - 1.0)

    @property
    def p_conj(self) -> float:
        return self.conj(self.p)

    @property
    def q_conj(self) -> float:
        return self.conj(self.q)

    def predicate(self) -> bool:
        """alpha + 1 < q (beta + 1)."""
        return self.alpha + 1 < self.q * (self.beta + 1)


# -- rules --------------------------------------------------------------------

@lru_cache(maxsize=None)
def gauss_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_rule(breakpoints, n: int):
    """Gauss-Legendre with ``n`` nodes on every interval between breakpoints."""
    b = np.asarray(breakpoints, dtype=float)
    gx, gw = gauss_rule(n)
    half = 0.5 * np.diff(b)
    mid = 0.5 * (b[1:] + b[:-1])
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    return nodes, weights


def _merge_points(points, lo, hi, rel=1e-12):
    pts = np.unique(np.clip(np.asarray(points, dtype=float), lo, hi))
    keep = [pts[0]]
    for v in pts[1:]:
        if v - keep[-1] > rel * max(abs(v), abs(keep[-1]), 1e-300):
            keep.append(v)
    if keep[-1] != hi:
        keep[-1] = hi
    return np.asarray(keep)


def geometric_breakpoints(lo: float, hi: float, panels_per_octave: int, extra=()):
    """Panel ends uniform in log between lo and hi, plus ``extra`` points inside."""
    if not 0 < lo < hi:
        raise DomainError("geometric_breakpoints needs 0 < lo < hi")
    m = max(1, int(math.ceil(math.log2(hi / lo) * panels_per_octave - 1e-9)))
    pts = np.exp(np.linspace(math.log(lo), math.log(hi), m + 1))
    pts[0], pts[-1] = lo, hi
    inside = [e for e in extra if lo < e < hi]
    if inside:
        pts = np.concatenate([pts, inside])
    return _merge_points(pts, lo, hi)


# -- half-line integration ----------------------------------------------------

@dataclass
class QuadResult:
    value: float | complex
    error_estimate: float
    truncated: float | complex
    tail_lo: float | complex = 0.0
    tail_hi: float | complex = 0.0
    diverged: bool = False
    divergence: str | None = None
    lo: float = 0.0
    hi: float = math.inf
    n_evals: int = 0
    extras: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        def real(v):
            return float(v.real) if isinstance(v, complex) else float(v)

        rec = {
            "value": real(self.value),
            "error_estimate": float(self.error_estimate),
            "tail_lo": real(self.tail_lo),
            "tail_hi": real(self.tail_hi),
            "diverged": bool(self.diverged),
            "lo": float(self.lo),
            "hi": float(self.hi),
        }
        if isinstance(self.value, complex):
            rec["value_im"] = float(self.value.imag)
        return rec


def _checked(f, y):
    vals = np.asarray(f(y))
    if vals.shape != np.shape(y):
        vals = np.broadcast_to(vals, np.shape(y))
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = np.asarray(y)[bad].ravel()[0]
        raise IntegrationError(f"integrand is not finite at {where!r}")
    return vals


def _power_tail(f, end: float, side: str):
    """Tail integral beyond ``end`` from a fitted power law with a 1/y correction.

    On the upper side the model is ``A y^e (1 + c/y)``; the local exponents
    over [E/2, E] and [E/4, E/2] give e by Richardson extrapolation.  The
    lower side is the same problem after y -> 1/y.  Returns
    (tail, uncertainty, diverged, exponent).
    """
    if side == "lo":
        pts = np.array([end, end * 2.0, end * 4.0])
        v = _checked(f, pts) * pts ** 2        # g(u) = f(1/u) / u^2 at u = 1/pts
        E = 1.0 / end
    else:
        pts = np.array([end, end / 2.0, end / 4.0])
        v = _checked(f, pts)
        E = end
    a0 = abs(v[0])
    if a0 == 0:
        return 0.0, 0.0, False, float("nan")
    if abs(v[1]) == 0 or abs(v[2]) == 0:
        # faster than any power; bound by one octave of the boundary value
        return 0.0, float(a0 * E), False, float("nan")
    s1 = math.log2(a0 / abs(v[1]))
    s2 = math.log2(abs(v[1]) / abs(v[2]))
    e = 2.0 * s1 - s2
    u = (e - s1) * math.log(2.0)               # c / E
    expo = e if side == "hi" else -e - 2.0     # exponent of f itself
    if e >= -1 or s1 >= -1:
        return math.inf, math.inf, True, expo
    plain = v[0] * E / (-s1 - 1.0)
    tail = v[0] * E / (1.0 + u) * (1.0 / (-e - 1.0) + u / (-e))
    return tail, float(abs(tail - plain) * min(1.0, abs(u)) + 1e-15 * abs(tail)), False, expo


def integrate_range(f: Callable, lo: float, hi: float, scheme: PanelScheme = DEFAULT_SCHEME,
                    breakpoints: Sequence[float] = (), tail_lo: bool = False,
                    tail_hi: bool = False) -> QuadResult:
    """Integrate a vectorised ``f`` over [lo, hi] on log-uniform panels.

    ``tail_lo`` / ``tail_hi`` close the interval towards 0 / infinity with a
    fitted power tail.  The error estimate is the difference between the
    rule and the same panels with half the nodes, plus the tail-fit spread.
    """
    bps = geometric_breakpoints(lo, hi, scheme.panels_per_octave, breakpoints)
    n = scheme.nodes_per_panel
    x, w = composite_rule(bps, n)
    val = w @ _checked(f, x)
    x2, w2 = composite_rule(bps, max(2, n // 2))
    val2 = w2 @ _checked(f, x2)
    err = abs(val - val2)
    res = QuadResult(value=val, error_estimate=float(err), truncated=val, lo=lo, hi=hi,
                     n_evals=x.size + x2.size)
    for side, on, end in (("lo", tail_lo, lo), ("hi", tail_hi, hi)):
        if not on:
            continue
        t, terr, div, expo = _power_tail(f, end, side)
        res.extras[f"exponent_{side}"] = expo
        if div:
            res.diverged = True
            res.divergence = side if res.divergence is None else "both"
            continue
        setattr(res, f"tail_{side}", t)
        res.error_estimate += terr
    if res.diverged:
        res.value = math.inf
        res.error_estimate = math.inf
    else:
        res.value = res.truncated + res.tail_lo + res.tail_hi
        res.lo = 0.0 if tail_lo else lo
        res.hi = math.inf if tail_hi else hi
    if isinstance(res.value, np.generic):
        res.value = res.value.item()
    if isinstance(res.truncated, np.generic):
        res.truncated = res.truncated.item()
    return res


def integrate_halfline(f: Callable, scheme: PanelScheme = DEFAULT_SCHEME, scale: float = 1.0,
                       breakpoints: Sequence[float] = (), tails: bool = True) -> QuadResult:
    """Integrate ``f`` over (0, inf): panels on ``scale * [2**j_lo, 2**j_hi]`` plus tails."""
    lo = scale * 2.0 ** scheme.j_lo
    hi = scale * 2.0 ** scheme.j_hi
    return integrate_range(f, lo, hi, scheme, breakpoints, tail_lo=tails, tail_hi=tails)


def divergence_trend(f: Callable, scheme: PanelScheme = DEFAULT_SCHEME, js=(12, 16, 20),
                     scale: float = 1.0, breakpoints=()):
    """Truncated integrals over [2^-J, 2^J] for each J and their growth ratios.

    Growth of at least 1.5x per step is the divergence signal.
    """
    values = []
    for j in js:
        r = integrate_range(f, scale * 2.0 ** -j, scale * 2.0 ** j, scheme, breakpoints)
        values.append(abs(r.truncated))
    ratios = [values[i + 1] / values[i] if values[i] > 0 else
              (1.0 if values[i + 1] == 0 else math.inf)
              for i in range(len(values) - 1)]
    return {"J": list(js), "values": values, "ratios": ratios,
            "growing": bool(ratios and min(ratios) >= 1.5)}


def _log_power(y, expo):
    return np.exp(expo * np.log(y))


# -- weighted interval masses and Forelli-Rudin integrals ---------------------

@dataclass
class RatioResult:
    value: float
    ratio: float
    error_estimate: float
    quad: QuadResult | None = None

    def to_record(self):
        return {"value": self.value, "ratio": self.ratio, "error_estimate": self.error_estimate}


def interval_mass(spec: WeightSpec, beta: float, t: float,
                  scheme: PanelScheme = DEFAULT_SCHEME) -> RatioResult:
    """int_0^t omega^k(y) y^beta dy and its ratio to omega^k(t) t^(1+beta).

    The sign of the weight power is the sign of ``spec.k``.
    """
    if not beta > -1:
        raise DomainError("interval_mass needs beta > -1 (divergent at 0)")
    if not t > 0:
        raise DomainError("interval_mass needs t > 0")

    def f(y):
        return weight_eval(spec, y) * _log_power(y, beta)

    span = scheme.j_hi - scheme.j_lo
    q = integrate_range(f, t * 2.0 ** -span, t, scheme, spec.kinks(), tail_lo=True)
    norm = weight_eval(spec, t) * t ** (1.0 + beta)
    return RatioResult(q.value, q.value / norm, q.error_estimate / norm, q)


def forelli_rudin(spec: WeightSpec, a: float, beta: float, x: float,
                  scheme: PanelScheme = DEFAULT_SCHEME) -> RatioResult:
    """int_0^inf omega^k(y) y^beta (x + y)^-(1 + a + beta) dy and its ratio to omega^k(x) x^-a.

    ``a`` is the homogeneity gap and must be positive for convergence at
    infinity; ``beta > -1`` for convergence at 0.
    """
    if not a > 0:
        raise DomainError("forelli_rudin needs a > 0 (divergent tail)")
    if not beta > -1:
        raise DomainError("forelli_rudin needs beta > -1")
    if not x > 0:
        raise DomainError("forelli_rudin needs x > 0")
    c = 1.0 + a + beta

    def f(y):
        return weight_eval(spec, y) * np.exp(beta * np.log(y) - c * np.log(x + y))

    q = integrate_halfline(f, scheme, scale=x, breakpoints=spec.kinks())
    norm = weight_eval(spec, x) * x ** (-a)
    return RatioResult(q.value, q.value / norm, q.error_estimate / norm, q)


def forelli_rudin_exact(a: float, beta: float, x: float) -> float:
    """Unweighted closed form x^-a B(beta + 1, a)."""
    return x ** (-a) * beta_fn(beta + 1.0, a)


# -- horizontal slices --------------------------------------------------------

def _cluster(features, y):
    """Merge features whose centres are within a quarter of the slice width."""
    items = sorted((float(c), float(h) + y) for c, h in features)
    out = []
    for c, w in items:
        if out and abs(c - out[-1][0]) < 0.25 * min(w, out[-1][1]):
            out[-1] = (out[-1][0], min(w, out[-1][1]))
        else:
            out.append((c, w))
    return out


def slice_rule(features, y: float, X: float, n: int, density: int = 2):
    """Gauss nodes/weights on [-R, R] graded around each feature at height y.

    Returns ``(nodes, weights, R)``.
    """
    feats = _cluster(features or ((0.0, 0.0),), y)
    wmax = max(w for _, w in feats)
    R = max(X, max(abs(c) for c, _ in feats) + 64.0 * wmax)
    pts = [-R, R]
    for c, w in feats:
        m_hi = int(math.ceil(density * math.log2(4.0 * R / w))) + 1
        g = w * 2.0 ** (np.arange(-4 * density, m_hi) / density)
        g = g[g < 2.0 * R]
        pts.append(np.array([c]))
        pts.append(c + g)
        pts.append(c - g)
    allpts = np.concatenate([np.atleast_1d(np.asarray(p, float)) for p in pts])
    bps = _merge_points(allpts, -R, R, rel=1e-13)
    x, wts = composite_rule(bps, n)
    return x, wts, R


def slice_integral(g: Callable, features, y: float, X: float = 2.0 ** 10, n: int = 16,
                   tails: bool = True):
    """int_R g(x + iy) dx for a vectorised complex-argument ``g``.

    Returns ``(value, diverged)``.  The tails beyond the truncation radius
    are power-law fits of ``g`` (which must have constant phase there, as
    nonnegative integrands do).
    """
    x, w, R = slice_rule(features, y, X, n)
    vals = np.asarray(g(x + 1j * y))
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise IntegrationError(f"slice integrand not finite at {bad + 1j * y!r}")
    total = w @ vals
    if not tails:
        return total, False
    for side in ("right", "left"):
        sgn = 1.0 if side == "right" else -1.0
        pts = np.array([sgn * R, sgn * R / 2.0]) + 1j * y
        gv = np.asarray(g(pts))
        a = np.abs(gv)
        if a[0] == 0 or a[1] == 0:
            continue
        e = math.log2(a[0] / a[1])
        if e >= -1:
            return math.inf, True
        total = total + gv[0] * R / (-e - 1.0)
    return total, False


# -- functions on the half-plane ----------------------------------------------

def _evaluator(f):
    """(callable z -> f(z), features) for anything we can evaluate off-grid."""
    fn = getattr(f, "evaluator", None)
    if fn is None and callable(f) and not isinstance(f, GridFunction):
        fn = f
    if fn is None:
        return None, ()
    feats = getattr(f, "features", ()) or ()
    return fn, tuple(feats)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples of a function on a tensor grid of the truncated half-plane.

    ``x_weights`` / ``y_weights`` are the quadrature weights belonging to the
    nodes.  ``evaluator`` (optional) is a closed form used for off-grid points
    and for adaptive slice rules; ``features`` lists ``(centre, depth)`` of
    its singularities below the real axis.
    """

    x_nodes: np.ndarray
    x_weights: np.ndarray
    y_nodes: np.ndarray
    y_weights: np.ndarray
    values: np.ndarray
    evaluator: Callable | None = None
    features: tuple = ()

    def __post_init__(self):
        xs, ys = np.asarray(self.x_nodes), np.asarray(self.y_nodes)
        if xs.ndim != 1 or ys.ndim != 1 or np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise DomainError("grid nodes must be strictly increasing 1-d arrays")
        if ys[0] <= 0:
            raise DomainError("y nodes must be positive")
        if self.values.shape != (xs.size, ys.size):
            raise DomainError("values must be indexed (x, y)")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("grid values must be finite")

    @classmethod
    def sample(cls, fn: Callable, features=(), X: float = 32.0, x_panels: int = 64,
               y_scheme: PanelScheme = PanelScheme(-8, 8, 8, 2), n_x: int = 8):
        """Sample ``fn`` on uniform x panels over [-X, X] and dyadic y panels."""
        xb = np.linspace(-X, X, x_panels + 1)
        xn, xw = composite_rule(xb, n_x)
        yb = geometric_breakpoints(2.0 ** y_scheme.j_lo, 2.0 ** y_scheme.j_hi,
                                   y_scheme.panels_per_octave)
        yn, yw = composite_rule(yb, y_scheme.nodes_per_panel)
        vals = np.asarray(fn(xn[:, None] + 1j * yn[None, :]), dtype=complex)
        return cls(xn, xw, yn, yw, vals, fn, tuple(features))

    def __call__(self, z):
        if self.evaluator is None:
            raise DomainError("no evaluator attached; only grid values are available")
        return self.evaluator(z)

    def y_index(self, y: float) -> int:
        idx = int(np.argmin(np.abs(self.y_nodes - y)))
        if not math.isclose(self.y_nodes[idx], y, rel_tol=1e-12):
            raise DomainError(f"y={y} is not a grid node and no evaluator is attached")
        return idx

    def evaluator_mismatch(self) -> float:
        """Largest |grid value - evaluator| (the grid/evaluator consistency check)."""
        if self.evaluator is None:
            return 0.0
        ref = self.evaluator(self.x_nodes[:, None] + 1j * self.y_nodes[None, :])
        return float(np.max(np.abs(ref - self.values)))


@dataclass(frozen=True, eq=False)
class Evaluable:
    """A closed-form function on the half-plane with its singularity features."""

    evaluator: Callable
    features: tuple = ()
    label: str = ""

    def __call__(self, z):
        return self.evaluator(z)


class SliceProfile:
    """Memoised y -> int |f(x + iy)|^p dx, shared by norms with different weights."""

    def __init__(self, f, p: float, X: float = 2.0 ** 10, n: int = 16):
        if p < 1:
            raise DomainError("p must be >= 1")
        self.f, self.p, self.X, self.n = f, float(p), float(X), int(n)
        self.fn, self.features = _evaluator(f)
        self._cache: dict[float, float] = {}

    def _one(self, y: float) -> float:
        if self.fn is None:
            g = self.f
            j = g.y_index(y)
            return float(g.x_weights @ (np.abs(g.values[:, j]) ** self.p))
        fn, p = self.fn, self.p
        v, div = slice_integral(lambda z: np.abs(fn(z)) ** p, self.features, y, self.X, self.n)
        return math.inf if div else float(np.real(v))

    def __call__(self, ys):
        ys = np.asarray(ys, dtype=float)
        out = np.empty(ys.shape)
        for i, y in np.ndenumerate(ys):
            key = float(y)
            if key not in self._cache:
                self._cache[key] = self._one(key)
            out[i] = self._cache[key]
        return out


def slice_pnorm(f, p: float, y: float, X: float = 2.0 ** 10, n: int = 16) -> float:
    """(int_R |f(x + iy)|^p dx)^(1/p)."""
    if p < 1:
        raise DomainError("p must be >= 1")
    if not y > 0:
        raise DomainError("y must be > 0")
    return float(SliceProfile(f, p, X, n)(np.array([y]))[0] ** (1.0 / p))


@dataclass
class MixedNorm:
    value: float
    qth_power: float
    error_estimate: float
    diverged: bool
    trend: dict
    quad: QuadResult | None = None

    def to_record(self):
        return {"value": self.value, "qth_power": self.qth_power,
                "error_estimate": self.error_estimate, "diverged": self.diverged,
                "trend_ratios": self.trend.get("ratios", [])}


def mixed_norm(f, params: SpaceParams, spec: WeightSpec | None = None,
               scheme: PanelScheme = DEFAULT_SCHEME, profile: SliceProfile | None = None,
               trend: bool = True) -> MixedNorm:
    """(int_0^inf ||f(. + iy)||_p^q omega^k(y) y^alpha dy)^(1/q).

    Divergence is flagged when a fitted tail is not integrable or when the
    truncated integrals over [2^-J, 2^J], J = 12, 16, 20 grow by 1.5x per
    step.
    """
    p, q, alpha = params.p, params.q, params.alpha
    if profile is None:
        profile = SliceProfile(f, p, scheme.x_half_width, scheme.nodes_per_panel)
    weight = (lambda y: np.ones_like(y)) if spec is None or spec.k == 0 else (
        lambda y: weight_eval(spec, y))
    kinks = () if spec is None else spec.kinks()

    def integrand(y):
        s = profile(y)
        return s ** (q / p) * weight(y) * _log_power(y, alpha)

    if profile.fn is None:
        g = f
        vals = integrand(g.y_nodes)
        total = float(g.y_weights @ vals)
        return MixedNorm(total ** (1.0 / q), total, 0.0, False, {})

    res = integrate_halfline(integrand, scheme, breakpoints=kinks)
    tr = {}
    if trend:
        js = [j for j in (12, 16, 20) if -j >= scheme.j_lo and j <= scheme.j_hi]
        if len(js) >= 2:
            tr = divergence_trend(integrand, scheme, js, breakpoints=kinks)
    diverged = res.diverged or bool(tr.get("growing", False))
    if diverged:
        return MixedNorm(math.inf, math.inf, math.inf, True, tr, res)
    total = float(np.real(res.value))
    value = total ** (1.0 / q) if total > 0 else 0.0
    err = res.error_estimate / (q * total) * value if total > 0 else res.error_estimate
    return MixedNorm(value, total, float(err), False, tr, res)


def integrate_halfplane(g: Callable, features=(), scheme: PanelScheme = DEFAULT_SCHEME,
                        y_scale: float = 1.0, breakpoints=(), tails: bool = True) -> QuadResult:
    """int_0^inf int_R g(x + iy) dx dy for a vectorised complex-valued ``g``.

    ``g`` should already include any measure factor such as y^beta.
    """
    X, n = scheme.x_half_width, scheme.nodes_per_panel
    cache: dict[float, complex] = {}

    def row(ys):
        out = np.empty(np.shape(ys), dtype=complex)
        for i, y in np.ndenumerate(np.asarray(ys, dtype=float)):
            key = float(y)
            if key not in cache:
                v, div = slice_integral(g, features, key, X, n)
                cache[key] = complex(v) if not div else complex(math.inf)
            out[i] = cache[key]
        return out

    return integrate_halfline(row, scheme, scale=y_scale, breakpoints=breakpoints, tails=tails)
