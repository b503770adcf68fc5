"""The delta-lattice of the upper half-plane and audits of its interval systems.

    z_{l,j} = (delta^2/4) l 2^(gamma j - 1) + i 2^(gamma j) = x_{l,j} + i y_j

with I_{l,j}, I'_{l,j} the x-intervals of half-width (delta^2/4) y_j and
(delta^2/20) y_j around x_{l,j}, and J_j, J'_j the y-intervals of the same
half-widths around y_j.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .weights import DomainError

__all__ = [
    "gamma_bounds",
    "consistent_gamma_bounds",
    "LatticeConfig",
    "DeltaLattice",
    "build_lattice",
    "bergman_distance",
    "bergman_ball",
    "AuditReport",
    "covering_audit",
    "inclusion_audit",
    "separation",
    "lattice_csv",
]


def _check_delta(delta):
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")


def gamma_bounds(delta: float) -> tuple[float, float, float]:
    """(lo, hi, midpoint) of the admissible gamma interval

        ln((1 + d/20)/(1 - d/20)) / (4 ln 2) < gamma < ln((1 + d/4)/(1 - d/4)) / (4 ln 2),

    with d = delta^2.
    """
    _check_delta(delta)
    d = delta * delta
    lo = math.log((1 + d / 20) / (1 - d / 20)) / (4 * math.log(2))
    hi = math.log((1 + d / 4) / (1 - d / 4)) / (4 * math.log(2))
    return lo, hi, 0.5 * (lo + hi)


def consistent_gamma_bounds(delta: float) -> tuple[float, float, float]:
    """(lo, hi, midpoint) for which every interval property holds.

    The J'_j are disjoint iff 2^gamma >= (1 + d/20)/(1 - d/20) and the J_j
    cover (0, inf) iff 2^gamma < (1 + d/4)/(1 - d/4).  These are the bounds
    of ``gamma_bounds`` without the factor 1/4.
    """
    _check_delta(delta)
    d = delta * delta
    lo = math.log2((1 + d / 20) / (1 - d / 20))
    hi = math.log2((1 + d / 4) / (1 - d / 4))
    return lo, hi, 0.5 * (lo + hi)


_BOUNDS = {"stated": gamma_bounds, "consistent": consistent_gamma_bounds}


@dataclass(frozen=True)
class LatticeConfig:
    """delta, gamma and the index ranges (inclusive) of a truncated lattice.

    ``gamma=None`` selects the midpoint of the chosen ``bounds`` family
    ("stated" or "consistent"); an explicit gamma must lie strictly inside it
    unless ``bounds="free"``.
    """

    delta: float = 0.5
    gamma: float | None = None
    l_range: tuple[int, int] = (-200, 200)
    j_range: tuple[int, int] = (-40, 40)
    bounds: str = "stated"

    def __post_init__(self):
        _check_delta(self.delta)
        if self.l_range[0] > self.l_range[1] or self.j_range[0] > self.j_range[1]:
            raise DomainError("index ranges must be nonempty")
        if self.bounds not in (*_BOUNDS, "free"):
            raise DomainError(f"unknown bounds family {self.bounds!r}")
        g = self.gamma
        if g is None:
            if self.bounds == "free":
                raise DomainError("bounds='free' needs an explicit gamma")
            g = _BOUNDS[self.bounds](self.delta)[2]
            object.__setattr__(self, "gamma", float(g))
        elif self.bounds != "free":
            lo, hi, _ = _BOUNDS[self.bounds](self.delta)
            if not lo < g < hi:
                raise DomainError(f"gamma={g} outside ({lo}, {hi})")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")

    def to_dict(self):
        return {"delta": self.delta, "gamma": self.gamma, "l_lo": self.l_range[0],
                "l_hi": self.l_range[1], "j_lo": self.j_range[0], "j_hi": self.j_range[1],
                "bounds": self.bounds}


@dataclass(frozen=True, eq=False)
class DeltaLattice:
    config: LatticeConfig
    l: np.ndarray            # (n_l,)
    j: np.ndarray            # (n_j,)
    y: np.ndarray            # (n_j,) y_j
    x: np.ndarray            # (n_j, n_l) x_{l,j}

    @property
    def d(self) -> float:
        return self.config.delta ** 2

    @property
    def points(self) -> np.ndarray:
        return self.x + 1j * self.y[:, None]

    def spacing(self, jj=None):
        y = self.y if jj is None else self.y_of(jj)
        return self.d / 8 * y

    def y_of(self, jj):
        return 2.0 ** (self.config.gamma * np.asarray(jj, dtype=float))

    def x_of(self, ll, jj):
        return self.d / 4 * np.asarray(ll, dtype=float) * 2.0 ** (self.config.gamma * np.asarray(jj, float) - 1)

    def I(self, ll, jj, primed: bool = False):
        h = (self.d / 20 if primed else self.d / 4) * self.y_of(jj)
        c = self.x_of(ll, jj)
        return c - h, c + h

    def J(self, jj, primed: bool = False):
        yj = self.y_of(jj)
        h = (self.d / 20 if primed else self.d / 4) * yj
        return yj - h, yj + h


def build_lattice(config: LatticeConfig) -> DeltaLattice:
    l = np.arange(config.l_range[0], config.l_range[1] + 1)
    j = np.arange(config.j_range[0], config.j_range[1] + 1)
    y = 2.0 ** (config.gamma * j.astype(float))
    x = (config.delta ** 2 / 4) * l[None, :] * 2.0 ** (config.gamma * j[:, None] - 1.0)
    return DeltaLattice(config, l, j, y, x)


# -- distance -------------------------------------------------------------------

def bergman_distance(z, w):
    """1/2 ln((1 + rho)/(1 - rho)) with rho = |z - w| / |conj z - w|."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(~(z.imag > 0)) or np.any(~(w.imag > 0)):
        raise DomainError("points must lie in the upper half-plane")
    # (1 + rho)/(1 - rho) = (|conj z - w| + |z - w|)^2 / (4 Im z Im w), free of cancellation
    s = np.abs(np.conj(z) - w) + np.abs(z - w)
    out = np.log(s / (2.0 * np.sqrt(z.imag * w.imag)))
    return float(out) if out.ndim == 0 else out


def bergman_ball(z0: complex, r: float) -> tuple[complex, float]:
    """Euclidean centre and radius of the Bergman ball B_r(z0)."""
    z0 = complex(z0)
    return complex(z0.real, z0.imag * math.cosh(2 * r)), z0.imag * math.sinh(2 * r)


# -- audits -----------------------------------------------------------------------

@dataclass
class AuditReport:
    passed: bool
    checks: dict
    notes: list = field(default_factory=list)

    def to_record(self):
        flat = {"passed": self.passed}
        for name, c in self.checks.items():
            for k, v in c.items():
                flat[f"{name}.{k}"] = v
        return flat


def _count_in(centres, half, v):
    """Number of open intervals (centres +- half) containing each v (centres sorted)."""
    lo = np.searchsorted(centres + half, v, side="right")
    hi = np.searchsorted(centres - half, v, side="left")
    return hi - lo


def covering_audit(lat: DeltaLattice, n_samples: int = 10_000, seed: int = 0) -> AuditReport:
    """Check properties (i)-(v) of the interval lemma on the truncated lattice.

    Coverage (i) is sampled inside the footprint: for y, between the centres
    of the interior rows (N_max rows away from either end); for x, inside
    the span of the l-range at a random row.  (ii)-(iii) are checked
    exhaustively on neighbouring pairs (equal widths in a row and increasing
    widths along a ladder make that sufficient) and also on samples; (iv)
    and (v) are sampled multiplicities.
    """
    rng = np.random.default_rng(seed)
    d, g = lat.d, lat.config.gamma
    y = lat.y
    checks, notes = {}, []

    # (v) multiplicity of J_j, with its a-priori bound
    n_bound = int(math.floor(math.log2((1 + d / 4) / (1 - d / 4)) / g)) + 1
    margin = n_bound + 1
    j_lo, j_hi = lat.j[0] + margin, lat.j[-1] - margin
    if j_lo >= j_hi:
        raise DomainError("j-range too short for an interior footprint")
    ys = 2.0 ** rng.uniform(g * j_lo, g * j_hi, n_samples)
    mult_J = _count_in_ladder(y, d / 4, ys)
    mult_Jp = _count_in_ladder(y, d / 20, ys)
    checks["i_y"] = {"violations": int(np.sum(mult_J == 0)), "samples": n_samples}
    checks["v"] = {"N": int(mult_J.max()), "bound": n_bound,
                   "violations": int(np.sum(mult_J > n_bound))}

    # (iii) J'_j pairwise disjoint: neighbours j, j+1
    overl = y[:-1] * (1 + d / 20) > y[1:] * (1 - d / 20)
    checks["iii"] = {"violations": int(np.sum(overl)), "pairs": int(overl.size),
                     "sample_violations": int(np.sum(mult_Jp > 1)),
                     "gap_min": float(np.min(y[1:] * (1 - d / 20) - y[:-1] * (1 + d / 20)))}

    # per-row x-properties on random rows
    rows = rng.integers(0, lat.j.size, n_samples)
    s = lat.spacing()[rows]
    span = lat.l[-1] * s                              # |x| <= x_{l_max}
    xs = rng.uniform(-1, 1, n_samples) * span
    # every row is a translate-free arithmetic progression: scale to units of the spacing
    u = xs / s                                        # lattice centres at integers l
    cent = lat.l.astype(float)
    mult_I = _count_in(cent, 2.0, u)                  # half-width d/4 y = 2 spacings
    mult_Ip = _count_in(cent, 0.4, u)                 # half-width d/20 y = 0.4 spacings
    checks["i_x"] = {"violations": int(np.sum(mult_I == 0)), "samples": n_samples}
    checks["iv"] = {"max_multiplicity": int(mult_I.max()), "violations": int(np.sum(mult_I > 4))}
    # (ii) exhaustive on neighbours in every row
    gaps = np.diff(lat.x, axis=1) - 2 * (d / 20) * y[:, None]
    checks["ii"] = {"violations": int(np.sum(gaps < 0)) + int(np.sum(mult_Ip > 1)),
                    "pairs": int(gaps.size)}
    passed = all(c.get("violations", 0) == 0 for c in checks.values())
    if not passed:
        bad = [k for k, c in checks.items() if c.get("violations", 0)]
        notes.append("failed: " + ", ".join(sorted(bad)))
    return AuditReport(passed, checks, notes)


def _count_in_ladder(y, rel, v):
    """Number of intervals (y_j (1 - rel), y_j (1 + rel)) containing each v."""
    lo = np.searchsorted(y * (1 + rel), v, side="right")
    hi = np.searchsorted(y * (1 - rel), v, side="left")
    return hi - lo


def inclusion_audit(lat: DeltaLattice, n_cells: int = 100, samples_per_cell: int = 25,
                    seed: int = 0) -> AuditReport:
    """I_{l,j} + i J_j inside B_{delta^2}(z_{l,j}) and B_{delta^2/80}(z_{l,j}) inside I' + i J'.

    Each cell gets its four corners plus random interior points for the
    first inclusion, and random points of the (Euclidean) disc that is the
    Bergman ball, including points near its boundary, for the second.
    """
    rng = np.random.default_rng(seed)
    d = lat.d
    ls = rng.integers(lat.l[0], lat.l[-1] + 1, n_cells)
    js = rng.integers(lat.j[0], lat.j[-1] + 1, n_cells)
    v1 = v2 = 0
    worst1 = worst2 = 0.0
    r_small = d / 80
    for l, j in zip(ls, js):
        z0 = complex(lat.x_of(l, j), lat.y_of(j))
        ilo, ihi = lat.I(l, j)
        jlo, jhi = lat.J(j)
        corners = np.array([ilo + 1j * jlo, ilo + 1j * jhi, ihi + 1j * jlo, ihi + 1j * jhi])
        inner = (rng.uniform(ilo, ihi, samples_per_cell)
                 + 1j * rng.uniform(jlo, jhi, samples_per_cell))
        dist = bergman_distance(np.concatenate([corners, inner]), z0)
        v1 += int(np.sum(dist >= d))
        worst1 = max(worst1, float(np.max(dist)) / d)
        c, rad = bergman_ball(z0, r_small)
        t = rng.uniform(0, 2 * math.pi, samples_per_cell)
        rr = rad * np.sqrt(rng.uniform(0, 1, samples_per_cell))
        rr[: samples_per_cell // 5] = rad * (1 - 1e-12)      # near the boundary
        pts = c + rr * np.exp(1j * t)
        pts = pts[bergman_distance(pts, z0) < r_small]
        iplo, iphi = lat.I(l, j, primed=True)
        jplo, jphi = lat.J(j, primed=True)
        out = ~((pts.real > iplo) & (pts.real < iphi) & (pts.imag > jplo) & (pts.imag < jphi))
        v2 += int(np.sum(out))
        if pts.size:
            ex = np.maximum(np.abs(pts.real - z0.real) / (iphi - z0.real),
                            np.abs(pts.imag - z0.imag) / (jphi - z0.imag))
            worst2 = max(worst2, float(np.max(ex)))
    checks = {
        "I_J_in_ball": {"violations": v1, "max_dist_over_delta2": worst1},
        "ball_in_primed": {"violations": v2, "max_rel_extent": worst2},
    }
    passed = v1 == 0 and v2 == 0
    return AuditReport(passed, checks, [])


def separation(lat: DeltaLattice) -> float:
    """Smallest Bergman distance between neighbouring lattice points.

    The distance only depends on index differences within a row and on the
    row ratio 2^gamma, so horizontal neighbours and the nearest points of
    the next row are enough.
    """
    z = lat.points
    dh = bergman_distance(z[:, 1:], z[:, :-1])
    best = float(np.min(dh))
    # next row: nearest x among a few candidates
    for shift in range(-2, 3):
        a = z[:-1, max(0, shift): z.shape[1] + min(0, shift)]
        b = z[1:, max(0, -shift): z.shape[1] + min(0, -shift)]
        m = min(a.shape[1], b.shape[1])
        best = min(best, float(np.min(bergman_distance(a[:, :m], b[:, :m]))))
    return best


def lattice_csv(lat: DeltaLattice) -> str:
    """Rows (l, j, x, y, I_lo, I_hi, J_lo, J_hi)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "j", "x", "y", "I_lo", "I_hi", "J_lo", "J_hi"])
    for a, jj in enumerate(lat.j):
        jlo, jhi = lat.J(jj)
        for b, ll in enumerate(lat.l):
            ilo, ihi = lat.I(ll, jj)
            w.writerow([int(ll), int(jj), repr(float(lat.x[a, b])), repr(float(lat.y[a])),
                        repr(float(ilo)), repr(float(ihi)), repr(float(jlo)), repr(float(jhi))])
    return buf.getvalue()
