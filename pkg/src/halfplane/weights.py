"""Growth functions and the logarithmic weights built from them.

A growth function ``Phi`` is continuous, nondecreasing and onto the positive
half-line.  From it we build the base weight

    omega(t) = 1 + eps1 * ln+(Phi(1/t)) + eps2 * ln+(Phi(t)),    t > 0,

and its real powers ``omega**k``.  Everything is evaluated in the log domain
(``log Phi`` is available in closed form for the built-in families), which
keeps ``ln+`` exact near ``Phi = 1`` and avoids overflow for extreme ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "DomainError",
    "GrowthFunction",
    "WeightSpec",
    "ClassCertificate",
    "growth_eval",
    "log_growth",
    "growth_class_check",
    "p_phi",
    "base_weight",
    "log_base_weight",
    "weight_eval",
    "omega0_eval",
    "weight_doubling_bound",
    "BUILTIN_GROWTH",
    "builtin_specs",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


def _positive(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be > 0, got {t!r}")
    return arr


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


FAMILIES = ("power", "power_log")


@dataclass(frozen=True)
class GrowthFunction:
    """A growth function from one of two built-in families.

    ``power``:     Phi(t) = c * t**s
    ``power_log``: Phi(t) = c * t**s * ln(e + t)

    ``class_tag`` is ``"upper"`` or ``"lower"``; ``type_exponent`` is the p of
    the class inequality ``Phi(s t) <= C_p t**p Phi(s)`` and ``type_constant``
    its C_p.  Omitted fields are filled from the family.
    """

    family: str = "power"
    s: float = 1.0
    c: float = 1.0
    class_tag: str | None = None
    type_exponent: float | None = None
    type_constant: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown growth family {self.family!r}")
        if not (self.s > 0 and self.c > 0):
            raise DomainError("growth parameters s and c must be positive")
        tag, p = self.class_tag, self.type_exponent
        if tag is None:
            if self.family == "power":
                tag = "upper" if self.s > 1 else "lower"
            else:
                tag = "upper" if self.s >= 1 else "lower"
        if tag not in ("upper", "lower"):
            raise DomainError(f"class_tag must be 'upper' or 'lower', got {tag!r}")
        if p is None:
            p = self.s + 1.0 if (self.family == "power_log" and tag == "upper") else self.s
        if tag == "upper" and p < 1:
            raise DomainError("upper type requires exponent >= 1")
        if tag == "lower" and not (0 < p <= 1):
            raise DomainError("lower type requires exponent in (0, 1]")
        object.__setattr__(self, "class_tag", tag)
        object.__setattr__(self, "type_exponent", float(p))
        if self.type_constant is None:
            if self.family == "power":
                cp = 1.0
            else:
                # C_p by grid maximisation over the certificate grid.
                cp = float(np.max(_class_ratios(self, tag, float(p))))
            object.__setattr__(self, "type_constant", cp)

    def __call__(self, t):
        return growth_eval(self, t)

    def unit_point(self) -> float:
        """The t* with Phi(t*) = 1 (where ln+ Phi switches on)."""
        if self.family == "power":
            return self.c ** (-1.0 / self.s)
        lo, hi = 1e-300, 1e300
        lo, hi = math.log(lo), math.log(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if log_growth(self, math.exp(mid)) < 0:
                lo = mid
            else:
                hi = mid
        return math.exp(0.5 * (lo + hi))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "s": self.s, "c": self.c}


def log_growth(phi: GrowthFunction, t):
    """``ln Phi(t)`` computed directly in the log domain."""
    arr = _positive(t)
    out = math.log(phi.c) + phi.s * np.log(arr)
    if phi.family == "power_log":
        out = out + np.log(np.log(math.e + arr))
    return _ret(out, t)


def growth_eval(phi: GrowthFunction, t):
    """Evaluate Phi(t) for t > 0."""
    arr = _positive(t)
    if phi.family == "power":
        out = phi.c * arr ** phi.s
    else:
        out = phi.c * arr ** phi.s * np.log(math.e + arr)
    return _ret(out, t)


def p_phi(phi: GrowthFunction) -> float:
    """The exponent that controls ln Phi(2^n t) - ln Phi(t) <= n p ln 2 + C."""
    return phi.type_exponent if phi.class_tag == "upper" else 1.0


# -- class certificates -------------------------------------------------------

_S_GRID = 2.0 ** np.linspace(-20, 20, 161)
_T_UPPER = 2.0 ** np.linspace(0, 20, 81)
_T_LOWER = 2.0 ** np.linspace(-20, 0, 81)
_MONO_GRID = 2.0 ** np.linspace(-30, 30, 481)


def _class_ratios(phi, tag, p, s_grid=_S_GRID, t_grid=None):
    if t_grid is None:
        t_grid = _T_UPPER if tag == "upper" else _T_LOWER
    s = s_grid[:, None]
    t = t_grid[None, :]
    log_ratio = log_growth(phi, s * t) - p * np.log(t) - log_growth(phi, s)
    return np.exp(log_ratio)


@dataclass(frozen=True)
class ClassCertificate:
    passed: bool
    worst_ratio: float
    type_constant: float
    inequality_ok: bool
    monotone_ok: bool
    limits_ok: bool
    n_pairs: int


def growth_class_check(phi: GrowthFunction, s_grid=None, t_grid=None,
                       rtol: float = 1e-9) -> ClassCertificate:
    """Grid-verify that ``phi`` belongs to its declared class.

    Checks ``Phi(s t) / (t^p Phi(s)) <= C_p`` over all grid pairs (t >= 1 for
    the upper class, t <= 1 for the lower one), monotonicity of ``Phi(t)/t``
    in the direction the class demands, and that Phi is nondecreasing with
    Phi -> 0 at 0 and Phi -> infinity at infinity.  A failed check is a
    result, not an error.
    """
    tag, p, cp = phi.class_tag, phi.type_exponent, phi.type_constant
    s_grid = _S_GRID if s_grid is None else np.asarray(s_grid, float)
    ratios = _class_ratios(phi, tag, p, s_grid, t_grid)
    worst = float(np.max(ratios))
    ineq_ok = worst <= cp * (1 + rtol)

    g = _MONO_GRID
    log_phi = log_growth(phi, g)
    dq = np.diff(log_phi - np.log(g))
    mono_ok = bool(np.all(dq >= -1e-12)) if tag == "upper" else bool(np.all(dq <= 1e-12))

    limits_ok = bool(
        np.all(np.diff(log_phi) >= -1e-12)
        and log_growth(phi, 2.0 ** -600) < -50
        and log_growth(phi, 2.0 ** 600) > 50
    )
    return ClassCertificate(
        passed=bool(ineq_ok and mono_ok and limits_ok),
        worst_ratio=worst,
        type_constant=cp,
        inequality_ok=bool(ineq_ok),
        monotone_ok=mono_ok,
        limits_ok=limits_ok,
        n_pairs=int(ratios.size),
    )


# -- weights ------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSpec:
    """The weight ``omega**k`` with ``omega = 1 + eps1 ln+ Phi(1/t) + eps2 ln+ Phi(t)``."""

    eps1: int = 1
    eps2: int = 1
    k: float = 1.0
    phi: GrowthFunction = field(default_factory=GrowthFunction)

    def __post_init__(self):
        if self.eps1 not in (0, 1) or self.eps2 not in (0, 1):
            raise DomainError("eps1 and eps2 must be 0 or 1")
        if not math.isfinite(self.k):
            raise DomainError("k must be finite")

    def with_k(self, k: float) -> "WeightSpec":
        return WeightSpec(self.eps1, self.eps2, float(k), self.phi)

    def kinks(self) -> tuple[float, ...]:
        """Points where omega is not smooth (ln+ switching on)."""
        t_star = self.phi.unit_point()
        pts = []
        if self.eps2:
            pts.append(t_star)
        if self.eps1:
            pts.append(1.0 / t_star)
        return tuple(sorted(set(pts)))

    def to_dict(self) -> dict[str, Any]:
        return {**self.phi.to_dict(), "eps1": self.eps1, "eps2": self.eps2, "k": self.k}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "WeightSpec":
        phi = GrowthFunction(family=str(d.get("family", "power")),
                             s=float(d.get("s", 1.0)), c=float(d.get("c", 1.0)))
        return cls(int(d.get("eps1", 1)), int(d.get("eps2", 1)), float(d.get("k", 1.0)), phi)


def _lnplus_terms(spec: WeightSpec, arr):
    total = np.zeros_like(arr)
    if spec.eps1:
        total = total + np.maximum(log_growth(spec.phi, 1.0 / arr), 0.0)
    if spec.eps2:
        total = total + np.maximum(log_growth(spec.phi, arr), 0.0)
    return total


def base_weight(spec: WeightSpec, t):
    """omega(t) >= 1 (the power k is ignored)."""
    arr = _positive(t)
    return _ret(1.0 + _lnplus_terms(spec, arr), t)


def log_base_weight(spec: WeightSpec, t):
    arr = _positive(t)
    return _ret(np.log1p(_lnplus_terms(spec, arr)), t)


def weight_eval(spec: WeightSpec, t):
    """omega(t)**k."""
    arr = _positive(t)
    if spec.k == 0:
        return _ret(np.ones_like(arr), t)
    return _ret(np.exp(spec.k * np.log1p(_lnplus_terms(spec, arr))), t)


def omega0_eval(eps1: int, eps2: int, y):
    """The auxiliary weight 1 + eps1 ln+(1/y) + eps2 ln+(y)."""
    arr = _positive(y, "y")
    out = 1.0 + eps1 * np.maximum(-np.log(arr), 0.0) + eps2 * np.maximum(np.log(arr), 0.0)
    return _ret(out, y)


def weight_doubling_bound(spec: WeightSpec, x: float, jmax: int) -> float:
    """max over 1 <= j <= jmax of omega(2^j x) / (j omega(x))."""
    if jmax < 1:
        raise DomainError("jmax must be >= 1")
    _positive(x, "x")
    j = np.arange(1, jmax + 1, dtype=float)
    return float(np.max(base_weight(spec, x * 2.0 ** j) / (j * base_weight(spec, x))))


# -- catalogue ----------------------------------------------------------------

BUILTIN_GROWTH = {
    "identity": GrowthFunction("power", 1.0, 1.0),
    "square": GrowthFunction("power", 2.0, 1.0),
    "sqrt": GrowthFunction("power", 0.5, 1.0),
    "tlog": GrowthFunction("power_log", 1.0, 1.0),
}


def builtin_specs(ks=(-1.0, 1.0)) -> list[WeightSpec]:
    """Every built-in growth function with every nontrivial eps and each k."""
    out = []
    for phi in BUILTIN_GROWTH.values():
        for eps in ((1, 0), (0, 1), (1, 1)):
            for k in ks:
                out.append(WeightSpec(eps[0], eps[1], float(k), phi))
    return out
