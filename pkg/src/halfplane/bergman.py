"""Bergman kernel and projections on the upper half-plane.

    K_a(z, w) = c_a (z - conj w)^-(2 + a),   dV_a(w) = (Im w)^a dA(w).

Complex powers use the principal branch: for z, w in the upper half-plane
``z - conj w`` has argument in (0, pi), so ``(z - conj w) / i`` has positive
real part and its principal power is unambiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hilbert import _asymptotics, _integral_diverges, _sup_diverges, apply_hilbert, HalfLineFunction
from .quadrature import (
    DEFAULT_SCHEME,
    GridFunction,
    PanelScheme,
    SpaceParams,
    _evaluator,
    divergence_trend,
    integrate_halfplane,
    mixed_norm,
    slice_integral,
)
from .special import beta as beta_fn
from .weights import DomainError, WeightSpec, log_base_weight, omega0_eval, weight_eval

__all__ = [
    "ComplexPoint",
    "KernelParams",
    "kernel_eval",
    "HoloTestFunction",
    "test_family",
    "project",
    "project_plus",
    "projection_matrix",
    "AdjointWitness",
    "adjoint_witness",
    "adjoint_witness_quadrature",
    "witness_norm_integrand",
    "BergmanProbe",
    "bergman_threshold_probe",
    "PointwiseBound",
    "pointwise_bound_check",
    "duality_pairing",
    "slice_domination_check",
]


@dataclass(frozen=True)
class ComplexPoint:
    re: float
    im: float

    def __post_init__(self):
        if not self.im > 0:
            raise DomainError(f"point must lie in the upper half-plane, got im={self.im}")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, z) -> "ComplexPoint":
        if isinstance(z, ComplexPoint):
            return z
        z = complex(z)
        return cls(z.real, z.imag)


def _as_complex(z):
    if isinstance(z, ComplexPoint):
        return z.z
    arr = np.asarray(z, dtype=complex)
    if np.any(~(arr.imag > 0)):
        raise DomainError("points must lie in the upper half-plane")
    return complex(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class KernelParams:
    """Normalisation of K_alpha: c_alpha = (alpha+1) 2^alpha / pi * i^(2+alpha)."""

    alpha: float = 0.0

    def __post_init__(self):
        if not self.alpha > -1:
            raise DomainError("alpha must be > -1")

    @property
    def modulus(self) -> float:
        return (self.alpha + 1.0) * 2.0 ** self.alpha / math.pi

    @property
    def c_alpha(self) -> complex:
        return self.modulus * complex(np.exp(0.5j * math.pi * (2.0 + self.alpha)))


def _kernel(alpha: float, z, w, modulus: bool = False):
    """K_alpha(z, w) for arrays; ``modulus`` returns |K_alpha| instead."""
    kp = KernelParams(alpha)
    zeta = (np.asarray(z) - np.conj(np.asarray(w))) / 1j   # Re zeta > 0
    if modulus:
        return kp.modulus * np.abs(zeta) ** (-(2.0 + alpha))
    return kp.modulus * zeta ** (-(2.0 + alpha))


def kernel_eval(kp: KernelParams, z, w) -> complex:
    """c_alpha (z - conj w)^-(2 + alpha) on the principal branch."""
    zc, wc = _as_complex(z), _as_complex(w)
    out = _kernel(kp.alpha, zc, wc)
    return complex(out) if np.ndim(out) == 0 else out


# -- holomorphic test functions -------------------------------------------------

@dataclass(frozen=True)
class HoloTestFunction:
    """f(z) = sum_n c_n (z - a_n)^-m_n with every pole a_n in the lower half-plane.

    ``terms`` holds ``(c_n, a_n, m_n)``; ``a_n = conj(w_n)`` for a point w_n of
    the upper half-plane.
    """

    terms: tuple = ((1.0, -1j, 3),)
    label: str = ""

    def __post_init__(self):
        clean = []
        for c, a, m in self.terms:
            a = complex(a)
            if not a.imag < 0:
                raise DomainError("poles must lie in the lower half-plane")
            if not m >= 2:
                raise DomainError("orders must be >= 2")
            clean.append((complex(c), a, float(m)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def single(cls, a: complex, m: float, c: complex = 1.0, label: str = ""):
        return cls(((c, a, m),), label)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for c, a, m in self.terms:
            out = out + c * ((z - a) / 1j) ** (-m) * (1j) ** (-m)
        return complex(out) if out.ndim == 0 else out

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for c, a, m in self.terms:
            out = out - m * c * ((z - a) / 1j) ** (-m - 1) * (1j) ** (-m - 1)
        return complex(out) if out.ndim == 0 else out

    @property
    def features(self):
        return tuple((a.real, -a.imag) for _, a, _ in self.terms)

    def dilate(self, s: float) -> "HoloTestFunction":
        """z -> f(s z) for s > 0."""
        if not s > 0:
            raise DomainError("dilation factor must be positive")
        return HoloTestFunction(tuple((c * s ** (-m), a / s, m) for c, a, m in self.terms),
                                f"{self.label}(s*z)")

    def translate(self, t: float) -> "HoloTestFunction":
        """z -> f(z + t) for real t."""
        return HoloTestFunction(tuple((c, a - t, m) for c, a, m in self.terms),
                                f"{self.label}(z+t)")

    def scale(self, s: complex) -> "HoloTestFunction":
        return HoloTestFunction(tuple((s * c, a, m) for c, a, m in self.terms), self.label)

    def __add__(self, other: "HoloTestFunction") -> "HoloTestFunction":
        return HoloTestFunction(self.terms + other.terms, f"{self.label}+{other.label}")

    def to_dict(self):
        return {"label": self.label,
                "terms": [[c.real, c.imag, a.real, a.imag, m] for c, a, m in self.terms]}


def test_family() -> list[HoloTestFunction]:
    """Six holomorphic test functions of varied order, height and centre."""
    H = HoloTestFunction
    return [
        H.single(-1j, 3, label="(z+i)^-3"),
        H.single(-1j, 4, label="(z+i)^-4"),
        H.single(-2j, 3, label="(z+2i)^-3"),
        H.single(-2j, 4, label="(z+2i)^-4"),
        H.single(1 - 0.5j, 3, label="(z-1+i/2)^-3"),
        H(((1.0, -1j, 3), (0.5, 2 - 2j, 4)), label="(z+i)^-3+0.5(z-2+2i)^-4"),
    ]


test_family.__test__ = False  # not a pytest test


# -- projections ----------------------------------------------------------------

def _tensor_integral(g: GridFunction, fn_values):
    wx, wy = g.x_weights, g.y_weights
    return complex(wx @ fn_values @ wy)


def project(f, beta: float, z, scheme: PanelScheme = DEFAULT_SCHEME,
            kp: KernelParams | None = None) -> complex:
    """P_beta f(z) = int K_beta(z, w) f(w) dV_beta(w).

    Functions with an evaluator use adaptive slice rules; bare grid samples
    use their own tensor rule.  A non-integrable fitted tail raises.
    """
    kp = KernelParams(beta) if kp is None else kp
    if not math.isclose(kp.alpha, beta):
        raise DomainError("kernel parameter must match beta")
    zc = _as_complex(z)
    fn, feats = _evaluator(f)
    if fn is None:
        W = f.x_nodes[:, None] + 1j * f.y_nodes[None, :]
        vals = _kernel(beta, zc, W) * f.values * f.y_nodes[None, :] ** beta
        return _tensor_integral(f, vals)

    def g(w):
        return _kernel(beta, zc, w) * fn(w) * np.exp(beta * np.log(w.imag))

    res = integrate_halfplane(g, tuple(feats) + ((zc.real, zc.imag),), scheme)
    if res.diverged:
        raise DomainError(f"projection integral diverges ({res.divergence} end)")
    return complex(res.value)


def project_plus(f, beta: float, z, scheme: PanelScheme = DEFAULT_SCHEME,
                 kp: KernelParams | None = None) -> float:
    """P_beta^+ |f|(z) = int |K_beta(z, w)| |f(w)| dV_beta(w)."""
    kp = KernelParams(beta) if kp is None else kp
    zc = _as_complex(z)
    fn, feats = _evaluator(f)
    if fn is None:
        W = f.x_nodes[:, None] + 1j * f.y_nodes[None, :]
        vals = _kernel(beta, zc, W, True) * np.abs(f.values) * f.y_nodes[None, :] ** beta
        return float(_tensor_integral(f, vals).real)

    def g(w):
        return _kernel(beta, zc, w, True) * np.abs(fn(w)) * np.exp(beta * np.log(w.imag))

    res = integrate_halfplane(g, tuple(feats) + ((zc.real, zc.imag),), scheme)
    return math.inf if res.diverged else float(np.real(res.value))


def projection_matrix(grid: GridFunction, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Discrete P_beta on a tensor grid: (matrix, measure) with P f = matrix @ f."""
    W = (grid.x_nodes[:, None] + 1j * grid.y_nodes[None, :]).ravel()
    mu = (grid.x_weights[:, None] * grid.y_weights[None, :]
          * grid.y_nodes[None, :] ** beta).ravel()
    return _kernel(beta, W[:, None], W[None, :]) * mu[None, :], mu


# -- the adjoint witness --------------------------------------------------------

@dataclass
class AdjointWitness:
    value: complex
    constant: float
    z: complex

    def to_record(self):
        return {"z_re": self.z.real, "z_im": self.z.imag, "re": self.value.real,
                "im": self.value.imag, "c": self.constant}


def _disc_rule(n_r=24, n_t=64):
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    t = 2 * math.pi * np.arange(n_t) / n_t
    pts = 1j + r[:, None] * np.exp(1j * t[None, :])
    wts = (wr * r)[:, None] * np.full(n_t, 2 * math.pi / n_t)[None, :]
    return pts.ravel(), wts.ravel()


def adjoint_witness(params: SpaceParams, spec: WeightSpec, z) -> AdjointWitness:
    """Closed form of P_beta^* f for f = W^-1(Im w) (Im w)^-alpha chi_B(i,1), W = omega^k:

        P_beta^* f(z) = c W^-1(y) y^(beta - alpha) (z + i)^-(2 + beta),

    with the unnormalised kernel (z - conj w)^-(2+beta).  The constant c is
    the area integral of chi_B(i,1) (mean value property), computed by the
    disc rule, which gives pi.
    """
    zc = _as_complex(z)
    alpha, beta = params.alpha, params.beta
    _, wts = _disc_rule()
    c = float(np.sum(wts))
    y = zc.imag
    val = (c / weight_eval(spec, y) * y ** (beta - alpha)
           * ((zc + 1j) / 1j) ** (-(2.0 + beta)) * (1j) ** (-(2.0 + beta)))
    return AdjointWitness(complex(val), c, zc)


def adjoint_witness_quadrature(params: SpaceParams, spec: WeightSpec, z,
                               n_r: int = 24, n_t: int = 64) -> complex:
    """Direct quadrature of the defining integral of P_beta^* f over the disc B(i, 1)."""
    zc = _as_complex(z)
    alpha, beta = params.alpha, params.beta
    w, wts = _disc_rule(n_r, n_t)
    v = w.imag
    f = np.exp(-alpha * np.log(v)) / weight_eval(spec, v)
    ker = ((zc - np.conj(w)) / 1j) ** (-(2.0 + beta)) * (1j) ** (-(2.0 + beta))
    inner = np.sum(wts * f * ker * weight_eval(spec, v) * np.exp(alpha * np.log(v)))
    y = zc.imag
    return complex(inner / weight_eval(spec, y) * y ** (beta - alpha))


def witness_norm_integrand(p: float, q: float, alpha: float, beta: float, spec: WeightSpec):
    """log of the y-integrand of ||P^* f||^q' in L^{p',q'}(W dV_alpha), as a function of ln y.

    With S(y) = int |x + i(y+1)|^-((2+beta)p') dx = (y+1)^(1-(2+beta)p') B(1/2, ((2+beta)p'-1)/2)
    the integrand is W^(1-q') y^((beta-alpha)q' + alpha) S(y)^(q'/p').  For
    q = 1 the returned function is the log of the sup-norm profile
    W^-1 y^(beta-alpha) S(y)^(1/p') instead; for p = 1 the x-norm is a sup.
    """
    pc = SpaceParams.conj(p)
    qc = SpaceParams.conj(q)
    if math.isinf(pc):
        def log_s(t):                       # log sup_x |x + i(y+1)|^-(2+beta)
            return -(2.0 + beta) * np.logaddexp(t, 0.0)
    else:
        lb = math.log(beta_fn(0.5, 0.5 * ((2.0 + beta) * pc - 1.0)))

        def log_s(t):
            return ((1.0 - (2.0 + beta) * pc) * np.logaddexp(t, 0.0) + lb) / pc

    def lw(t):
        return spec.k * log_base_weight(spec, math.exp(t)) if spec.k != 0 else 0.0

    if math.isinf(qc):
        return lambda t: -lw(t) + (beta - alpha) * t + log_s(t)
    return lambda t: ((1.0 - qc) * lw(t) + ((beta - alpha) * qc + alpha) * t + qc * log_s(t))


@dataclass
class BergmanProbe:
    p: float
    q: float
    alpha: float
    beta: float
    predicate: bool
    verdict: str
    exponents: dict
    trend: dict = field(default_factory=dict)

    def to_record(self):
        return {"p": self.p, "q": self.q, "alpha": self.alpha, "beta": self.beta,
                "predicate": self.predicate, "verdict": self.verdict,
                **{k: v for k, v in self.exponents.items()},
                "trend": ";".join(repr(v) for v in self.trend.get("ratios", []))}


def bergman_threshold_probe(p: float, q: float, alpha: float, beta: float, spec: WeightSpec,
                            band: float = 0.05, trend: bool = True) -> BergmanProbe:
    """Classify P_beta on L^{p,q}(omega^k dV_alpha) through the adjoint witness.

    Boundedness forces the witness into L^{p',q'}; the verdict is
    "unbounded" when its norm integral diverges (q > 1), or when its
    sup-profile is unbounded (q = 1).  Tails are judged from fitted
    exponents far out; the truncated integrals over [2^-J, 2^J] are also
    reported.
    """
    if not (p >= 1 and q >= 1):
        raise DomainError("p, q must be >= 1")
    log_g = witness_norm_integrand(p, q, alpha, beta, spec)
    s0, m0 = _asymptotics(log_g, "zero")
    s1, m1 = _asymptotics(log_g, "inf")
    if q == 1:
        div = _sup_diverges(s0, m0, "zero") or _sup_diverges(s1, m1, "inf")
    else:
        div = _integral_diverges(s0, m0, "zero") or _integral_diverges(s1, m1, "inf")
    tr = {}
    if trend and q > 1:
        tr = divergence_trend(lambda y: np.exp(np.array([log_g(math.log(v)) for v in np.atleast_1d(y)])),
                              PanelScheme(-20, 20, 8, 2))
    pred = alpha + 1.0 < q * (beta + 1.0)
    near = abs(alpha + 1.0 - q * (beta + 1.0)) < band
    verdict = "near-critical" if near else ("unbounded" if div else "bounded")
    return BergmanProbe(p, q, alpha, beta, bool(pred), verdict,
                        {"s0": s0, "m0": m0, "s_inf": s1, "m_inf": m1}, tr)


# -- pointwise bound, duality, slice domination ---------------------------------

@dataclass
class PointwiseBound:
    sup_ratio: float
    argmax: complex
    norm: float

    def to_record(self):
        return {"sup_ratio": self.sup_ratio, "argmax_re": self.argmax.real,
                "argmax_im": self.argmax.imag, "norm": self.norm}


def _default_grid():
    xs = np.arange(-4.0, 4.5, 1.0)
    ys = 2.0 ** np.arange(-6, 7)
    return (xs[:, None] + 1j * ys[None, :]).ravel()


def pointwise_bound_check(f, params: SpaceParams, spec: WeightSpec, grid=None,
                          scheme: PanelScheme = DEFAULT_SCHEME, norm: float | None = None
                          ) -> PointwiseBound:
    """sup over the grid of |f(x+iy)| y^((1+alpha)/q + 1/p) omega0(y)^(k'/q) / ||f||.

    The space weight is omega^spec.k with spec.k <= 0; k' = -spec.k is the
    positive exponent of the bound.
    """
    if spec.k > 0:
        raise DomainError("the pointwise bound is stated for weights omega^k with k <= 0")
    pts = _default_grid() if grid is None else np.asarray(grid, dtype=complex)
    if norm is None:
        norm = mixed_norm(f, params, spec, scheme).value
    if norm == 0:
        return PointwiseBound(0.0, complex(pts[0]), 0.0)
    y = pts.imag
    kprime = -spec.k
    fac = (y ** ((1 + params.alpha) / params.q + 1.0 / params.p)
           * omega0_eval(spec.eps1, spec.eps2, y) ** (-kprime / params.q))
    r = np.abs(f(pts)) * fac / norm
    i = int(np.argmax(r))
    return PointwiseBound(float(r[i]), complex(pts[i]), float(norm))


def duality_pairing(f, g, alpha: float, scheme: PanelScheme = DEFAULT_SCHEME) -> complex:
    """int f(z) conj(g(z)) dV_alpha(z)."""
    if not alpha > -1:
        raise DomainError("alpha must be > -1")
    fn, ff = _evaluator(f)
    gn, gf = _evaluator(g)
    if fn is None or gn is None:
        if not (isinstance(f, GridFunction) and isinstance(g, GridFunction)):
            raise DomainError("pairing needs two evaluators or two grid functions")
        vals = f.values * np.conj(g.values) * f.y_nodes[None, :] ** alpha
        return _tensor_integral(f, vals)

    def h(w):
        return fn(w) * np.conj(gn(w)) * np.exp(alpha * np.log(w.imag))

    res = integrate_halfplane(h, tuple(ff) + tuple(gf), scheme)
    if res.diverged:
        raise DomainError("pairing integral diverges")
    return complex(res.value)


SLICE_SCHEME = PanelScheme(-10, 10, 8, 1, 2.0 ** 7)


def slice_domination_check(f, p: float, beta: float, ys: Sequence[float] = (0.5, 1.0, 2.0),
                           scheme: PanelScheme = SLICE_SCHEME, n_x: int = 4) -> dict:
    """Compare ||(P^+ f)(. + iy)||_p with C_beta H_beta(||f(. + iv)||_p)(y).

    C_beta = |c_beta| B(1/2, (1+beta)/2) is the L^1 norm of the horizontal
    kernel |c_beta| |x + i(y+v)|^-(2+beta) at y + v = 1; Minkowski's
    inequality gives ratio <= 1.
    """
    fn, feats = _evaluator(f)
    if fn is None:
        raise DomainError("slice domination needs an evaluator")
    kp = KernelParams(beta)
    const = kp.modulus * beta_fn(0.5, 0.5 * (1.0 + beta))
    prof = HalfLineFunction(
        lambda v: np.array([float(np.real(slice_integral(lambda w: np.abs(fn(w)) ** p, feats, float(t),
                                                         scheme.x_half_width, 8)[0])) ** (1.0 / p)
                            for t in np.atleast_1d(v)]))
    rows = []
    for y in ys:
        def plus_slice(w, y=y):
            out = np.array([project_plus(f, beta, complex(x, y), scheme) for x in w.real])
            return out ** p

        lhs = float(np.real(slice_integral(plus_slice, feats, y, scheme.x_half_width, n_x)[0])) ** (1 / p)
        rhs = const * apply_hilbert(prof, beta, y, PanelScheme(-16, 16, 8, 1))
        rows.append({"y": float(y), "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    return {"constant": const, "rows": rows, "max_ratio": max(r["ratio"] for r in rows)}
