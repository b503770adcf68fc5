"""Experiment runners behind the command-line subcommands.

Each runner takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult`: a table of flat rows, a summary and a pass flag
for the contracts checked in the run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .atomic import (
    SequenceSpaceParams,
    SliceInterpolant,
    TruncationWarning,
    random_coefficients,
    reconstruct,
    sampling_check,
    script_I,
    sequence_norm,
    synthesize,
    derivative_char_check,
)
from .bergman import (
    adjoint_witness,
    adjoint_witness_quadrature,
    bergman_threshold_probe,
    project,
    test_family,
)
from .hilbert import norm_estimate, schur_verify, sharp_norm, threshold_classify
from .lattice import LatticeConfig, build_lattice, covering_audit, inclusion_audit
from .quadrature import (
    PanelScheme,
    SliceProfile,
    SpaceParams,
    forelli_rudin,
    forelli_rudin_exact,
    interval_mass,
    mixed_norm,
)
from .weights import (
    DomainError,
    GrowthFunction,
    WeightSpec,
    base_weight,
    growth_class_check,
    weight_doubling_bound,
    weight_eval,
)

__all__ = ["ExperimentConfig", "ExperimentResult", "EXPERIMENTS", "run", "parse_list"]


def parse_list(text: str) -> list[float]:
    """``"a,b,c"`` or ``"lo:hi:step"`` (inclusive of hi up to rounding)."""
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise DomainError("range step must be positive")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(max(n, 0))]
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in parse_list(text)]


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of every experiment, with the defaults used by the CLI.

    List-valued fields are strings in ``parse_list`` syntax so that a config
    file stays flat ``key = value`` text.
    """

    experiment: str = "weights-check"
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.0
    beta: float = 0.0
    k: float = 0.0
    eps1: int = 1
    eps2: int = 1
    family: str = "power"
    s: float = 1.0
    c: float = 1.0
    delta: float = 0.5
    gamma: float = 0.0              # 0 selects the midpoint of the bounds family
    bounds: str = "stated"
    j_lo: int = -20
    j_hi: int = 20
    nodes: int = 16
    panels_per_octave: int = 4
    seed: int = 0
    betas: str = "-0.9:1.0:0.1"
    a_values: str = "0.5,1,2,3,4"
    beta_values: str = "-0.5,0,0.5,1,2"
    x_values: str = "0.01,0.1,1,10,100"
    t_exponents: str = "-16:16:1"
    z_points: str = "0+1j,1+2j,-2+0.5j"
    band: float = 0.05
    members: str = "0:5:1"
    n_samples: int = 10000
    n_cells: int = 100
    l_max: int = 200
    j_max: int = 40
    n_atoms: int = 50
    function: str = "roundtrip"
    window: int = 12
    trend: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"experiment: unknown name {self.experiment!r}")
        for name in ("betas", "a_values", "beta_values", "x_values", "t_exponents", "members"):
            try:
                parse_list(getattr(self, name))
            except ValueError as exc:
                raise DomainError(f"{name}: {exc}") from None
        try:
            self.points()
        except ValueError as exc:
            raise DomainError(f"z_points: {exc}") from None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        """Build from string values, naming the offending field on error."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in data.items():
            if key not in kinds:
                raise DomainError(f"{key}: unknown config field")
            kind = kinds[key]
            try:
                if kind == "bool":
                    val = str(raw).strip().lower()
                    if val not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(f"not a boolean: {raw!r}")
                    kw[key] = val in ("true", "1", "yes")
                elif kind == "int":
                    kw[key] = int(str(raw).strip())
                elif kind == "float":
                    kw[key] = float(str(raw).strip())
                else:
                    kw[key] = str(raw).strip()
            except ValueError as exc:
                raise DomainError(f"{key}: {exc}") from None
        return cls(**kw)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        d = {k: str(v) for k, v in self.to_dict().items()}
        d[axis] = str(value)
        return ExperimentConfig.from_mapping(d)

    # -- derived objects

    def spec(self) -> WeightSpec:
        phi = GrowthFunction(self.family, self.s, self.c)
        return WeightSpec(self.eps1, self.eps2, self.k, phi)

    def scheme(self) -> PanelScheme:
        return PanelScheme(self.j_lo, self.j_hi, self.nodes, self.panels_per_octave)

    def space(self) -> SpaceParams:
        return SpaceParams(self.p, self.q, self.alpha, self.beta)

    def lattice_config(self, **kw) -> LatticeConfig:
        g = None if self.gamma == 0 else self.gamma
        return LatticeConfig(self.delta, g, bounds=self.bounds, **kw)

    def points(self) -> list[complex]:
        return [complex(v.replace(" ", "")) for v in self.z_points.split(",") if v.strip()]

    def family_members(self):
        fam = test_family()
        idx = _ints(self.members)
        for i in idx:
            if not 0 <= i < len(fam):
                raise DomainError(f"members: index {i} outside 0..{len(fam) - 1}")
        return [(i, fam[i]) for i in idx]


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[dict]
    passed: bool
    summary: dict = field(default_factory=dict)


def _spread(values) -> float:
    v = np.asarray([x for x in values if np.isfinite(x)], float)
    if v.size == 0 or np.min(v) <= 0:
        return math.inf
    return float(np.max(v) / np.min(v))


# -- runners ----------------------------------------------------------------------

def _weights_check(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec()
    cert = growth_class_check(spec.phi)
    rows = []
    for e in _ints(cfg.t_exponents):
        t = 2.0 ** e
        rows.append({"t": t, "omega": float(base_weight(spec, t)),
                     "omega_k": float(weight_eval(spec, t)),
                     "doubling": weight_doubling_bound(spec, t, 16)})
    ok = cert.passed and all(r["omega"] >= 1 and math.isfinite(r["omega_k"]) for r in rows)
    summary = {"class": spec.phi.class_tag, "type_exponent": spec.phi.type_exponent,
               "type_constant": cert.type_constant, "certificate": cert.passed,
               "worst_ratio": cert.worst_ratio}
    return ExperimentResult(cfg.experiment, rows, ok, summary)


def _interval_mass(cfg: ExperimentConfig) -> ExperimentResult:
    spec, scheme = cfg.spec(), cfg.scheme()
    rows = []
    for e in _ints(cfg.t_exponents):
        r = interval_mass(spec, cfg.beta, 2.0 ** e, scheme)
        rows.append({"t": 2.0 ** e, **r.to_record()})
    ratios = [r["ratio"] for r in rows]
    spread = _spread(ratios)
    ok = spread <= 50
    summary = {"spread": spread}
    if spec.k == 0:
        err = max(abs(v * (1 + cfg.beta) - 1) for v in ratios)
        summary["k0_rel_err"] = err
        ok = ok and err <= 1e-8
    return ExperimentResult(cfg.experiment, rows, ok, summary)


def _forelli_rudin(cfg: ExperimentConfig) -> ExperimentResult:
    spec, scheme = cfg.spec(), cfg.scheme()
    rows = []
    for a in parse_list(cfg.a_values):
        for beta in parse_list(cfg.beta_values):
            for x in parse_list(cfg.x_values):
                r = forelli_rudin(spec, a, beta, x, scheme)
                row = {"a": a, "beta": beta, "x": x, **r.to_record()}
                if spec.k == 0:
                    ex = forelli_rudin_exact(a, beta, x)
                    row["exact"] = ex
                    row["rel_err"] = abs(r.value / ex - 1)
                rows.append(row)
    if spec.k == 0:
        worst = max((r["rel_err"] for r in rows), default=0.0)
        return ExperimentResult(cfg.experiment, rows, worst <= 1e-6, {"max_rel_err": worst})
    # the two-sided constants depend on (a, beta); the spread is taken over x
    cells: dict[tuple, list] = {}
    for r in rows:
        cells.setdefault((r["a"], r["beta"]), []).append(r["ratio"])
    spread = max((_spread(v) for v in cells.values()), default=1.0)
    return ExperimentResult(cfg.experiment, rows, spread <= 50, {"spread": spread})


def _hilbert_norm(cfg: ExperimentConfig) -> ExperimentResult:
    params, spec = SpaceParams(cfg.p, cfg.p, cfg.alpha, cfg.beta), cfg.spec()
    est = norm_estimate(params, spec)
    pred = params.predicate()
    row = {"p": cfg.p, "alpha": cfg.alpha, "beta": cfg.beta, "k": cfg.k, "predicate": pred,
           **est.to_record()}
    ok = bool(est.converged and math.isfinite(est.value))
    if spec.k == 0 and cfg.alpha == 0:
        sharp = sharp_norm(cfg.p, cfg.beta)
        row["sharp"] = sharp
        row["ratio_to_sharp"] = est.value / sharp
        ok = ok and est.value <= sharp * (1 + 1e-9)
        if cfg.p == 2:
            ok = ok and est.value >= 0.98 * sharp
    return ExperimentResult(cfg.experiment, [row], ok, {})


def _schur_check(cfg: ExperimentConfig) -> ExperimentResult:
    params, spec = SpaceParams(cfg.p, cfg.p, cfg.alpha, cfg.beta), cfg.spec()
    res = schur_verify(params, spec, scheme=cfg.scheme())
    rows = [{"x": float(x), "ratio1": float(a), "ratio2": float(b)}
            for x, a, b in zip(res.grid, res.ratio1, res.ratio2)]
    pred = params.predicate()
    ok = res.finite if pred else True
    return ExperimentResult(cfg.experiment, rows, bool(ok), {"predicate": pred, **res.to_record()})


def _threshold_map(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec()
    verdicts = threshold_classify(cfg.p, cfg.alpha, spec, parse_list(cfg.betas),
                                  band=cfg.band, trend=cfg.trend)
    rows, bad = [], 0
    for v in verdicts:
        rec = v.to_record()
        rec.pop("trend", None)
        rows.append(rec)
        if v.verdict != "near-critical" and (v.verdict == "bounded") != v.predicate:
            bad += 1
    return ExperimentResult(cfg.experiment, rows, bad == 0, {"misclassified": bad})


def _bergman_project(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    for i, f in cfg.family_members():
        for z in cfg.points():
            val = project(f, cfg.beta, z, cfg.scheme())
            ref = f(z)
            rows.append({"member": i, "label": f.label, "z_re": z.real, "z_im": z.imag,
                         "re": val.real, "im": val.imag, "rel_err": abs(val - ref) / abs(ref)})
    worst = max((r["rel_err"] for r in rows), default=0.0)
    return ExperimentResult(cfg.experiment, rows, worst <= 1e-3, {"max_rel_err": worst})


def _adjoint_witness(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec()
    z = cfg.points()[0]
    rows, bad, worst = [], 0, 0.0
    for beta in parse_list(cfg.betas):
        params = SpaceParams(cfg.p, cfg.q, cfg.alpha, beta)
        w = adjoint_witness(params, spec, z)
        quad = adjoint_witness_quadrature(params, spec, z)
        err = abs(w.value - quad) / abs(w.value)
        worst = max(worst, err)
        probe = bergman_threshold_probe(cfg.p, cfg.q, cfg.alpha, beta, spec, cfg.band, trend=False)
        if probe.verdict != "near-critical" and (probe.verdict == "bounded") != probe.predicate:
            bad += 1
        rows.append({"beta": beta, "z_re": z.real, "z_im": z.imag, "re": w.value.real,
                     "im": w.value.imag, "quad_rel_err": err, "predicate": probe.predicate,
                     "verdict": probe.verdict})
    return ExperimentResult(cfg.experiment, rows, bad == 0 and worst <= 1e-6,
                            {"misclassified": bad, "max_quad_rel_err": worst})


def _lattice_audit(cfg: ExperimentConfig) -> ExperimentResult:
    lc = cfg.lattice_config(l_range=(-cfg.l_max, cfg.l_max), j_range=(-cfg.j_max, cfg.j_max))
    lat = build_lattice(lc)
    cov = covering_audit(lat, cfg.n_samples, cfg.seed)
    inc = inclusion_audit(lat, cfg.n_cells, seed=cfg.seed)
    rows = []
    for audit, rep in (("covering", cov), ("inclusion", inc)):
        for name, chk in rep.checks.items():
            rows.append({"audit": audit, "check": name, "violations": chk.get("violations", 0),
                         "detail": ";".join(f"{k}={v!r}" for k, v in chk.items()
                                            if k != "violations")})
    return ExperimentResult(cfg.experiment, rows, cov.passed and inc.passed,
                            {"delta": lc.delta, "gamma": lc.gamma, "bounds": lc.bounds})


def _seq_params(cfg: ExperimentConfig, gamma: float) -> SequenceSpaceParams:
    return SequenceSpaceParams(cfg.p, cfg.q, cfg.alpha, cfg.spec(), gamma)


def _sampling_check(cfg: ExperimentConfig) -> ExperimentResult:
    lc = cfg.lattice_config()
    sp = _seq_params(cfg, lc.gamma)
    rows = []
    win = (-cfg.window, cfg.window)
    for i, f in cfg.family_members():
        interp = SliceInterpolant(f, cfg.p, (win[0] - 1, win[1] + 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            r = sampling_check(f, lc, sp, win, interpolant=interp)
        rows.append({"member": i, "label": f.label, **r.to_record()})
    up = [r["ratio_upper"] for r in rows]
    lo = [r["ratio_lower"] for r in rows]
    finite = all(math.isfinite(v) and v > 0 for v in up + lo)
    s_up, s_lo = _spread(up), _spread(lo)
    ok = finite and s_up <= 10 and s_lo <= 10
    return ExperimentResult(cfg.experiment, rows, ok,
                            {"delta": lc.delta, "gamma": lc.gamma, "spread_upper": s_up,
                             "spread_lower": s_lo,
                             "min_normalized": min((r["normalized"] for r in rows), default=1.0)})


def _random_lambda(cfg: ExperimentConfig, lc: LatticeConfig):
    rng = np.random.default_rng(cfg.seed)
    return random_coefficients(lc, cfg.n_atoms, rng)


_ATOMIC_SCHEME = PanelScheme(-10, 10, 8, 1)


def _atomic_synthesize(cfg: ExperimentConfig) -> ExperimentResult:
    lc = cfg.lattice_config()
    sp = _seq_params(cfg, lc.gamma)
    lam = _random_lambda(cfg, lc)
    F = synthesize(lam, sp)
    pts = lam.points
    rows = [{"l": int(l), "j": int(j), "re": v.real, "im": v.imag, "x": z.real, "y": z.imag}
            for l, j, v, z in zip(lam.l, lam.j, lam.values, pts)]
    seq = sequence_norm(lam, sp)
    # many poles per slice: a coarser rule keeps this to seconds (agrees to ~1e-6)
    nf = mixed_norm(F, cfg.space(), sp.spec, _ATOMIC_SCHEME, profile=SliceProfile(F, cfg.p, n=8),
                    trend=False)
    ratio = nf.value / seq if seq > 0 else math.nan
    ok = bool(math.isfinite(ratio) and not nf.diverged)
    return ExperimentResult(cfg.experiment, rows, ok,
                            {"sequence_norm": seq, "function_norm": nf.value, "ratio": ratio})


def _reconstruct(cfg: ExperimentConfig) -> ExperimentResult:
    lc = cfg.lattice_config()
    sp = _seq_params(cfg, lc.gamma)
    if cfg.function == "roundtrip":
        lam = _random_lambda(cfg, lc)
        res = reconstruct(synthesize(lam, sp), lc, sp, support=lam)
        limit = 1e-6
    else:
        try:
            idx = int(cfg.function)
            f = test_family()[idx]
        except (ValueError, IndexError):
            raise DomainError(f"function: expected 'roundtrip' or a family index, "
                              f"got {cfg.function!r}") from None
        res = reconstruct(f, lc, sp)
        limit = 0.05
    row = {"function": cfg.function, **res.to_record()}
    return ExperimentResult(cfg.experiment, [row], bool(res.converged and res.residual <= limit),
                            {"limit": limit})


def _derivative_check(cfg: ExperimentConfig) -> ExperimentResult:
    spec = cfg.spec()
    params = SpaceParams(cfg.p, cfg.q, cfg.alpha, 0.0)
    rows = []
    for i, f in cfg.family_members():
        r, inv = derivative_char_check(f, params, spec, cfg.scheme())
        rows.append({"member": i, "label": f.label, "ratio": r, "inverse": inv})
    vals = [r["ratio"] for r in rows] + [r["inverse"] for r in rows]
    width = _spread(vals)
    return ExperimentResult(cfg.experiment, rows, width <= 100, {"bracket_width": width})


def _script_i(cfg: ExperimentConfig) -> ExperimentResult:
    lc = cfg.lattice_config()
    sp = _seq_params(cfg, lc.gamma)
    win = (-cfg.window, cfg.window)
    rows = []
    for i, f in cfg.family_members():
        interp = SliceInterpolant(f, cfg.p, (win[0] - 1, win[1] + 1))
        val = script_I(f, lc, sp, win, interpolant=interp)
        nq = mixed_norm(f, cfg.space(), sp.spec, profile=interp.profile, trend=False).qth_power
        rows.append({"member": i, "label": f.label, "I": val, "norm_q": nq, "ratio": val / nq})
    ratios = [r["ratio"] for r in rows]
    ok = all(math.isfinite(v) and v > 0 for v in ratios)
    return ExperimentResult(cfg.experiment, rows, ok, {"spread": _spread(ratios)})


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    "weights-check": _weights_check,
    "interval-mass": _interval_mass,
    "forelli-rudin": _forelli_rudin,
    "hilbert-norm": _hilbert_norm,
    "schur-check": _schur_check,
    "threshold-map": _threshold_map,
    "bergman-project": _bergman_project,
    "adjoint-witness": _adjoint_witness,
    "lattice-audit": _lattice_audit,
    "sampling-check": _sampling_check,
    "atomic-synthesize": _atomic_synthesize,
    "reconstruct": _reconstruct,
    "derivative-check": _derivative_check,
    "script-i": _script_i,
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return EXPERIMENTS[cfg.experiment](cfg)
