"""Sequence spaces on the delta-lattice, sampling, atoms and reconstruction.

Atoms are ``y_j^(alpha + 1 + q/p) K_alpha(z, z_{l,j})`` with ``y_j = 2^(gamma j)``;
the sequence norm is

    ( sum_j ( sum_l |lambda_{l,j}|^p )^(q/p) omega^k(y_j) y_j^(alpha + 1 + q/p) )^(1/q).

Row sums over the whole (infinite) lattice row are evaluated through
Poisson summation: the points of row j are spaced s_j = (delta^2/8) y_j, and
``sum_l |F(l s_j + i y_j)|^p = (1/s_j) int |F(x + i y_j)|^p dx`` up to an
aliasing term of order exp(-16 pi / delta^2) for the test family.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bergman import HoloTestFunction, _kernel
from .lattice import DeltaLattice, LatticeConfig, build_lattice
from .quadrature import (
    DEFAULT_SCHEME,
    Evaluable,
    PanelScheme,
    SliceProfile,
    SpaceParams,
    _evaluator,
    mixed_norm,
)
from .weights import DomainError, WeightSpec, weight_eval

__all__ = [
    "TruncationWarning",
    "CoefficientArray",
    "SequenceSpaceParams",
    "sequence_norm",
    "sample_on_lattice",
    "random_coefficients",
    "SliceInterpolant",
    "row_sums",
    "SamplingResult",
    "sampling_check",
    "AtomicFunction",
    "synthesize",
    "ReconstructResult",
    "reconstruct",
    "indicator_measure",
    "script_I",
    "derivative_char_check",
    "slice_average_check",
]


class TruncationWarning(UserWarning):
    """The truncated footprint misses more than 1% of the mass of F."""


# -- coefficients and sequence norms ------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientArray:
    """Finitely supported coefficients lambda_{l,j} on a lattice with the given delta, gamma."""

    l: np.ndarray
    j: np.ndarray
    values: np.ndarray
    delta: float
    gamma: float

    def __post_init__(self):
        l = np.asarray(self.l, dtype=np.int64)
        j = np.asarray(self.j, dtype=np.int64)
        v = np.asarray(self.values, dtype=complex)
        if not (l.shape == j.shape == v.shape and l.ndim == 1):
            raise DomainError("l, j and values must be 1-d arrays of equal length")
        if not np.all(np.isfinite(v)):
            raise DomainError("coefficients must be finite")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "values", v)

    @property
    def points(self) -> np.ndarray:
        y = 2.0 ** (self.gamma * self.j.astype(float))
        return (self.delta ** 2 / 4) * self.l * (y / 2.0) + 1j * y

    def with_values(self, values) -> "CoefficientArray":
        return CoefficientArray(self.l, self.j, values, self.delta, self.gamma)

    def __add__(self, other: "CoefficientArray") -> "CoefficientArray":
        if (self.delta, self.gamma) != (other.delta, other.gamma):
            raise DomainError("coefficient arrays live on different lattices")
        return CoefficientArray(np.concatenate([self.l, other.l]), np.concatenate([self.j, other.j]),
                                np.concatenate([self.values, other.values]), self.delta, self.gamma)

    def scale(self, c: complex) -> "CoefficientArray":
        return self.with_values(c * self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "j", "re", "im"])
        for l, j, v in zip(self.l, self.j, self.values):
            w.writerow([int(l), int(j), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


@dataclass(frozen=True)
class SequenceSpaceParams:
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.0
    spec: WeightSpec = field(default_factory=lambda: WeightSpec(1, 1, 0.0))
    gamma: float | None = None

    def __post_init__(self):
        SpaceParams(self.p, self.q, self.alpha)      # validates the exponents

    @property
    def exponent(self) -> float:
        return self.alpha + 1.0 + self.q / self.p

    @property
    def space(self) -> SpaceParams:
        return SpaceParams(self.p, self.q, self.alpha)

    def check(self, gamma: float):
        if self.gamma is not None and not math.isclose(self.gamma, gamma, rel_tol=1e-12):
            raise DomainError("sequence-space gamma differs from the lattice gamma")


def _row_weight(sp: SequenceSpaceParams, y):
    return weight_eval(sp.spec, y) * np.exp(sp.exponent * np.log(y))


def sequence_norm(lam: CoefficientArray, sp: SequenceSpaceParams) -> float:
    sp.check(lam.gamma)
    if lam.values.size == 0:
        return 0.0
    rows, inv = np.unique(lam.j, return_inverse=True)
    sums = np.bincount(inv, weights=np.abs(lam.values) ** sp.p, minlength=rows.size)
    y = 2.0 ** (lam.gamma * rows.astype(float))
    total = float(np.sum(sums ** (sp.q / sp.p) * _row_weight(sp, y)))
    return total ** (1.0 / sp.q)


def sample_on_lattice(F, lattice: DeltaLattice) -> CoefficientArray:
    """lambda_{l,j} = F(z_{l,j}) over the lattice's index ranges."""
    jj, ll = np.meshgrid(lattice.j, lattice.l, indexing="ij")
    vals = np.asarray(F(lattice.points), dtype=complex)
    cfg = lattice.config
    return CoefficientArray(ll.ravel(), jj.ravel(), vals.ravel(), cfg.delta, cfg.gamma)


def random_coefficients(config: LatticeConfig, n_atoms: int, rng: np.random.Generator,
                        x_box=(-6.0, 6.0), y_box=(2.0 ** -3, 2.0 ** 3),
                        min_separation: float = 0.0) -> CoefficientArray:
    """Distinct random lattice indices with points inside the box, complex normal values.

    ``min_separation`` (Bergman distance) thins the draw so atoms stay apart.
    """
    from .lattice import bergman_distance

    g, d = config.gamma, config.delta ** 2
    j_lo = int(math.ceil(math.log2(y_box[0]) / g))
    j_hi = int(math.floor(math.log2(y_box[1]) / g))
    chosen: list[tuple[int, int]] = []
    pts: list[complex] = []
    tries = 0
    while len(chosen) < n_atoms:
        tries += 1
        if tries > 200 * n_atoms:
            raise DomainError("could not place the requested atoms; relax the separation")
        j = int(rng.integers(j_lo, j_hi + 1))
        y = 2.0 ** (g * j)
        s = d / 8 * y
        l = int(rng.integers(math.ceil(x_box[0] / s), math.floor(x_box[1] / s) + 1))
        z = complex(l * s, y)
        if (l, j) in chosen:
            continue
        if min_separation > 0 and pts and np.min(bergman_distance(np.array(pts), z)) < min_separation:
            continue
        chosen.append((l, j))
        pts.append(z)
    l, j = np.array(chosen).T
    vals = rng.standard_normal(n_atoms) + 1j * rng.standard_normal(n_atoms)
    return CoefficientArray(l, j, vals, config.delta, config.gamma)


# -- row sums through the slice profile ---------------------------------------

class SliceInterpolant:
    """Piecewise Chebyshev interpolant of ln int |F(x + iy)|^p dx in t = log2 y, one piece per octave."""

    def __init__(self, F, p: float, octaves: tuple[int, int], deg: int = 15,
                 X: float = 2.0 ** 10, n: int = 16, profile: SliceProfile | None = None):
        self.profile = profile or SliceProfile(F, p, X, n)
        self.lo, self.hi = int(octaves[0]), int(octaves[1])
        self.pieces = []
        self.zero = False
        for m in range(self.lo, self.hi):
            def f(t):
                return np.log(self.profile(2.0 ** np.asarray(t)))

            with np.errstate(divide="ignore"):
                probe = self.profile(np.array([2.0 ** m]))
            if probe[0] == 0:
                self.zero = True
                break
            self.pieces.append(np.polynomial.Chebyshev.interpolate(f, deg, domain=[m, m + 1]))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.zero:
            return np.zeros_like(y)
        t = np.log2(y)
        if np.any(t < self.lo) or np.any(t > self.hi):
            raise DomainError("y outside the interpolation range")
        idx = np.minimum(np.floor(t).astype(int) - self.lo, len(self.pieces) - 1)
        out = np.empty_like(t)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = np.exp(self.pieces[k](t[sel]))
        return out


def row_sums(F, lattice: DeltaLattice | LatticeConfig, js, p: float, mode: str = "poisson",
             interpolant: SliceInterpolant | None = None) -> np.ndarray:
    """sum_l |F(z_{l,j})|^p for each row j.

    ``mode="poisson"`` sums over all integers l through the slice integral;
    ``mode="direct"`` sums over the lattice's own l-range.
    """
    js = np.asarray(js)
    if mode == "direct":
        if not isinstance(lattice, DeltaLattice):
            raise DomainError("direct row sums need a built lattice")
        out = []
        for j in js:
            z = lattice.x_of(lattice.l, j) + 1j * lattice.y_of(j)
            out.append(float(np.sum(np.abs(F(z)) ** p)))
        return np.array(out)
    cfg = lattice.config if isinstance(lattice, DeltaLattice) else lattice
    y = 2.0 ** (cfg.gamma * js.astype(float))
    s = cfg.delta ** 2 / 8 * y
    if interpolant is None:
        prof = SliceProfile(F, p)
        return prof(y) / s
    return interpolant(y) / s


@dataclass
class SamplingResult:
    lhs: float
    norm_q: float
    ratio_upper: float
    ratio_lower: float
    normalized: float
    tail_fraction: float
    n_rows: int
    warning: str = ""

    def to_record(self):
        return {"lhs": self.lhs, "norm_q": self.norm_q, "ratio_upper": self.ratio_upper,
                "ratio_lower": self.ratio_lower, "normalized": self.normalized,
                "tail_fraction": self.tail_fraction, "n_rows": self.n_rows,
                "warning": self.warning}


def _window_rows(cfg: LatticeConfig, window: tuple[int, int]):
    j_lo = int(math.ceil(window[0] / cfg.gamma))
    j_hi = int(math.floor(window[1] / cfg.gamma))
    return np.arange(j_lo, j_hi + 1)


def sampling_check(F, config: LatticeConfig, sp: SequenceSpaceParams,
                   window: tuple[int, int] = (-12, 12), scheme: PanelScheme = DEFAULT_SCHEME,
                   interpolant: SliceInterpolant | None = None) -> SamplingResult:
    """Both sides of the sampling inequalities for F on the delta-lattice.

    lhs = sum_j (sum_l |F(z_{l,j})|^p)^(q/p) omega^k(y_j) y_j^(alpha+1+q/p) over
    the rows with log2 y_j in ``window`` (all l).  ``normalized`` divides lhs by
    its continuum limit (8/delta^2)^(q/p) ||F||_W^q / (gamma ln 2), where ||F||_W
    is the norm restricted to the window, so it tends to 1 as delta -> 0.  The
    tail fraction is the share of ||F||^q outside the window.
    """
    sp.check(config.gamma)
    p, q = sp.p, sp.q
    if interpolant is None:
        interpolant = SliceInterpolant(F, p, (window[0] - 1, window[1] + 1))
    prof = interpolant.profile
    js = _window_rows(config, window)
    y = 2.0 ** (config.gamma * js.astype(float))
    sums = row_sums(F, config, js, p, interpolant=interpolant)
    lhs = float(np.sum(sums ** (q / p) * _row_weight(sp, y)))
    mn = mixed_norm(F, sp.space, sp.spec, scheme, profile=prof, trend=False)
    norm_q = mn.qth_power
    if norm_q == 0:
        return SamplingResult(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, int(js.size), "zero function")
    inside = mixed_norm(F, sp.space, sp.spec, PanelScheme(window[0], window[1],
                                                          scheme.nodes_per_panel,
                                                          scheme.panels_per_octave),
                        profile=prof, trend=False)
    inside_q = float(inside.quad.truncated) if inside.quad is not None else norm_q
    tail = max(0.0, 1.0 - inside_q / norm_q)
    warn = ""
    if tail > 0.01:
        warn = f"footprint misses {tail:.3%} of the norm"
        warnings.warn(warn, TruncationWarning, stacklevel=2)
    limit = (8.0 / config.delta ** 2) ** (q / p) * inside_q / (config.gamma * math.log(2.0))
    return SamplingResult(lhs, norm_q, lhs / norm_q, norm_q / lhs if lhs > 0 else math.inf,
                          lhs / limit, tail, int(js.size), warn)


# -- atoms ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AtomicFunction:
    """F(z) = sum lambda_{l,j} y_j^(alpha+1+q/p) K_alpha(z, z_{l,j})."""

    coeffs: CoefficientArray
    sp: SequenceSpaceParams

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        pts = self.coeffs.points
        amp = self.coeffs.values * np.exp(self.sp.exponent * np.log(pts.imag))
        flat = z.reshape(-1)
        out = np.zeros(flat.shape, dtype=complex)
        for start in range(0, flat.size, 4096):
            chunk = flat[start:start + 4096]
            out[start:start + 4096] = _kernel(self.sp.alpha, chunk[:, None], pts[None, :]) @ amp
        out = out.reshape(z.shape)
        return complex(out) if out.ndim == 0 else out

    @property
    def features(self):
        pts = self.coeffs.points
        return tuple((float(w.real), float(w.imag)) for w in pts)


def synthesize(lam: CoefficientArray, sp: SequenceSpaceParams, z=None):
    """The atomic sum at z, or the callable sum when z is None."""
    sp.check(lam.gamma)
    F = AtomicFunction(lam, sp)
    return F if z is None else F(z)


@dataclass
class ReconstructResult:
    coeffs: CoefficientArray
    residual: float
    tau: float
    condition: float
    n_atoms: int
    n_points: int
    converged: bool
    holdout_residual: float = math.nan

    def to_record(self):
        return {"residual": self.residual, "holdout_residual": self.holdout_residual,
                "tau": self.tau, "condition": self.condition, "n_atoms": self.n_atoms,
                "n_points": self.n_points, "converged": self.converged}


def _dictionary(config: LatticeConfig, box, level_ratio, x_step, max_per_level, margin):
    g, d = config.gamma, config.delta ** 2
    xlo, xhi, ylo, yhi = box
    j_step = max(1, int(round(math.log2(level_ratio) / g)))
    j_lo = int(math.floor((ylo - 1) / g))
    j_hi = int(math.ceil((yhi + 1) / g))
    ls, js = [], []
    for j in range(j_lo, j_hi + 1, j_step):
        y = 2.0 ** (g * j)
        s = d / 8 * y
        step = max(1, int(round(x_step * y / s)))
        a = int(math.floor((xlo - margin) / s))
        b = int(math.ceil((xhi + margin) / s))
        while (b - a) // step + 1 > max_per_level:
            step = int(math.ceil(step * 1.25))
        for l in range(a - (a % step), b + 1, step):
            ls.append(l)
            js.append(j)
    return np.array(ls), np.array(js)


def reconstruct(F, config: LatticeConfig, sp: SequenceSpaceParams,
                box=(-8.0, 8.0, -6, 6), support: CoefficientArray | None = None,
                level_ratio: float = 2 ** 0.5, x_step: float = 0.5, max_per_level: int = 64,
                margin: float = 4.0, grid_shape=(41, 25), rcond: float = 1e-10) -> ReconstructResult:
    """Regularised least-squares atomic coefficients for F on a verification grid.

    The dictionary is ``support`` when given, otherwise a sub-lattice of the
    delta-lattice: rows about ``level_ratio`` apart in y, points about
    ``x_step * y`` apart in x, covering ``box = (x_lo, x_hi, log2 y_lo, log2 y_hi)``
    with a margin.  Columns are normalised, and the system is solved by SVD
    with Tikhonov parameter ``tau = rcond * sigma_max``.  The residual is the
    relative l2 error on the grid; ``holdout_residual`` is the same error on
    the staggered grid of cell midpoints, which the fit never sees.
    """
    sp.check(config.gamma)
    if support is not None:
        ls, js = support.l, support.j
    else:
        ls, js = _dictionary(config, box, level_ratio, x_step, max_per_level, margin)
    dummy = CoefficientArray(ls, js, np.zeros(ls.size), config.delta, config.gamma)
    pts = dummy.points
    xg = np.linspace(box[0], box[1], grid_shape[0])
    tg = np.linspace(box[2], box[3], grid_shape[1])
    Z = (xg[:, None] + 1j * 2.0 ** tg[None, :]).ravel()
    Zh = ((xg[:-1, None] + xg[1:, None]) / 2 + 1j * 2.0 ** ((tg[None, :-1] + tg[None, 1:]) / 2)).ravel()
    b = np.asarray(F(Z), dtype=complex)
    amp = np.exp(sp.exponent * np.log(pts.imag))

    def design(z):
        return _kernel(sp.alpha, z[:, None], pts[None, :]) * amp[None, :]

    A = design(Z)
    cn = np.linalg.norm(A, axis=0)
    cn[cn == 0] = 1.0
    U, sig, Vh = np.linalg.svd(A / cn[None, :], full_matrices=False)
    tau = rcond * sig[0]
    filt = sig / (sig ** 2 + tau ** 2)
    x = Vh.conj().T @ (filt * (U.conj().T @ b))
    lam = x / cn
    fit = A @ lam
    bn = float(np.linalg.norm(b))
    res = float(np.linalg.norm(fit - b)) / bn if bn > 0 else float(np.linalg.norm(fit))
    bh = np.asarray(F(Zh), dtype=complex)
    bhn = float(np.linalg.norm(bh))
    err_h = float(np.linalg.norm(design(Zh) @ lam - bh))
    hold = err_h / bhn if bhn > 0 else err_h
    cond = float(sig[0] / sig[-1]) if sig[-1] > 0 else math.inf
    coeffs = CoefficientArray(ls, js, lam, config.delta, config.gamma)
    return ReconstructResult(coeffs, res, float(tau), cond, int(ls.size), int(Z.size),
                             bool(np.isfinite(res)), hold)


# -- the functional I(F) ----------------------------------------------------------

def indicator_measure(lattice: DeltaLattice, j: int, y: float, u: float, v: float) -> float:
    """int sum_l chi{x in I_{l,j}, |x + iy - (u + iv)| < y / (2 sqrt 2)} dx over the lattice's l-range."""
    r = y / (2.0 * math.sqrt(2.0))
    if abs(y - v) >= r:
        return 0.0
    rho = math.sqrt(r * r - (y - v) ** 2)
    lo, hi = lattice.I(lattice.l, j)
    return float(np.sum(np.clip(np.minimum(hi, u + rho) - np.maximum(lo, u - rho), 0.0, None)))


def _chebyshev_u_rule(n: int):
    # int_{-1}^{1} sqrt(1 - t^2) g(t) dt
    k = np.arange(1, n + 1)
    t = np.cos(k * math.pi / (n + 1))
    w = math.pi / (n + 1) * np.sin(k * math.pi / (n + 1)) ** 2
    return t, w


def script_I(F, config: LatticeConfig, sp: SequenceSpaceParams, window: tuple[int, int] = (-12, 12),
             interpolant: SliceInterpolant | None = None, n_y: int = 8, n_v: int = 16) -> float:
    """The functional I(F) on the rows whose J_j meet the window.

    Every x lies in exactly four I_{l,j} (up to a null set) when l ranges
    over all integers, so the inner x-integral equals 8 rho with
    rho = sqrt(r^2 - (y - v)^2), r = y / (2 sqrt 2), and the (u, v) integral
    reduces to int 8 rho(v) ||F(. + iv)||_p^p dv / v^2.  The outer integral is
    sum_j int_{J_j} (...)^(q/p) omega^k(y) y^alpha dy.
    """
    sp.check(config.gamma)
    p, q, d = sp.p, sp.q, config.delta ** 2
    if interpolant is None:
        interpolant = SliceInterpolant(F, p, (window[0] - 1, window[1] + 1))
    if interpolant.zero:
        return 0.0
    js = _window_rows(config, window)
    y_j = 2.0 ** (config.gamma * js.astype(float))
    gx, gw = np.polynomial.legendre.leggauss(n_y)
    h = d / 4 * y_j
    ys = (y_j[:, None] + h[:, None] * gx[None, :]).ravel()
    wy = (h[:, None] * gw[None, :]).ravel()
    t, wt = _chebyshev_u_rule(n_v)
    r = ys / (2.0 * math.sqrt(2.0))
    vs = ys[:, None] + r[:, None] * t[None, :]
    inner = 8.0 * r ** 2 * ((interpolant(vs.ravel()).reshape(vs.shape) / vs ** 2) @ wt)
    outer = inner ** (q / p) * weight_eval(sp.spec, ys) * np.exp(sp.alpha * np.log(ys))
    return float(np.sum(wy * outer))


# -- derivative characterisation and slice averages -------------------------------

def derivative_char_check(F: HoloTestFunction, params: SpaceParams, spec: WeightSpec,
                          scheme: PanelScheme = DEFAULT_SCHEME) -> tuple[float, float]:
    """(||y F'|| / ||F||, ||F|| / ||y F'||) in the mixed norm."""
    G = Evaluable(lambda z: np.asarray(z).imag * F.derivative(z), F.features, "yF'")
    nf = mixed_norm(F, params, spec, scheme, trend=False).value
    ng = mixed_norm(G, params, spec, scheme, trend=False).value
    if nf == 0 or ng == 0:
        raise DomainError("zero function: the ratios are undefined")
    return ng / nf, nf / ng


def slice_average_check(F, delta: float, p: float, q: float,
                        y_grid: Sequence[float] | None = None, n: int = 16) -> dict:
    """Worst ||F_y||_p^q / int_{|v-y|<y delta^2/4} ||F_v||_p^q dv/v over the grid."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    ys = 2.0 ** np.arange(-4, 5) if y_grid is None else np.asarray(y_grid, float)
    prof = SliceProfile(F, p)
    gx, gw = np.polynomial.legendre.leggauss(n)
    rows = []
    for y in ys:
        lhs = float(prof(np.array([y]))[0]) ** (q / p)
        h = delta ** 2 / 4 * y
        v = y + h * gx
        rhs = float(np.sum(h * gw * prof(v) ** (q / p) / v))
        ratio = 0.0 if lhs == 0 and rhs == 0 else lhs / rhs
        rows.append({"y": float(y), "lhs": lhs, "rhs": rhs, "ratio": ratio})
    return {"rows": rows, "worst_ratio": max(r["ratio"] for r in rows)}
