"""Command-line experiment runner.

    halfplane <experiment> [--config FILE] [--set key=value ...] [--out DIR]
                           [--seed N] [--format csv|json]
    halfplane sweep <experiment> --axis NAME --values LIST [--workers N] ...

Config files are flat ``key = value`` text (no section header).  Every
output starts with the full effective config so that each table can be
regenerated from its own header.  Exit status: 0 if every contract of the
run passed, 1 if one failed, 2 for a usage error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .experiments import EXPERIMENTS, ExperimentConfig, ExperimentResult, parse_list, run
from .weights import DomainError

__all__ = ["main", "load_config", "format_result", "sweep"]

SECTION = "experiment"


def load_config(path: str | None, overrides: list[str] = (), experiment: str | None = None,
                seed: int | None = None) -> ExperimentConfig:
    data: dict[str, str] = {}
    if path:
        text = Path(path).read_text()
        cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            cp.read_string(f"[{SECTION}]\n" + text)
        except configparser.Error as exc:
            raise DomainError(f"config: {exc}") from None
        data.update(cp[SECTION])
    for item in overrides:
        if "=" not in item:
            raise DomainError(f"--set: expected key=value, got {item!r}")
        key, val = item.split("=", 1)
        data[key.strip()] = val.strip()
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            raise DomainError(f"experiment: config names {data['experiment']!r}, "
                              f"command line names {experiment!r}")
        data["experiment"] = experiment
    if seed is not None:
        data["seed"] = str(seed)
    return ExperimentConfig.from_mapping(data)


# -- formatting -------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def format_result(cfg: ExperimentConfig, result: ExperimentResult, fmt: str = "csv",
                  extra_header: dict | None = None) -> str:
    header = {**cfg.to_dict(), **(extra_header or {})}
    if fmt == "json":
        doc = {"config": header, "passed": result.passed, "summary": result.summary,
               "rows": result.rows}
        return json.dumps(_json_value(doc), indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k} = {_cell(v)}\n")
    for k, v in result.summary.items():
        buf.write(f"# result.{k} = {_cell(v)}\n")
    buf.write(f"# passed = {_cell(result.passed)}\n")
    cols = _columns(result.rows)
    if cols:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in result.rows:
            w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _emit(text: str, out: str | None, name: str, fmt: str):
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{name}.{fmt}").write_text(text)


# -- sweep ------------------------------------------------------------------------

def _run_one(cfg: ExperimentConfig) -> ExperimentResult:
    return run(cfg)


def sweep(cfg: ExperimentConfig, axis: str, values: list, workers: int = 1) -> ExperimentResult:
    """Run ``cfg`` once per value of ``axis``; rows are merged in the order of ``values``."""
    if axis not in cfg.to_dict() or axis == "experiment":
        raise DomainError(f"axis: {axis!r} is not a config field")
    cfgs = [cfg.with_value(axis, v) for v in values]
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, cfgs))
    else:
        results = [_run_one(c) for c in cfgs]
    rows, summary = [], {}
    for v, c, res in zip(values, cfgs, results):
        val = getattr(c, axis)
        for r in res.rows:
            rows.append({axis: val, **r})
        summary[f"passed[{axis}={_cell(val)}]"] = res.passed
    return ExperimentResult(cfg.experiment, rows, all(r.passed for r in results), summary)


# -- entry point ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field (repeatable)")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halfplane", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=f"run the {name} experiment"))
    sp = sub.add_parser("sweep", help="run one experiment over a list of values of one field")
    sp.add_argument("experiment", choices=sorted(EXPERIMENTS))
    sp.add_argument("--axis", required=True)
    sp.add_argument("--values", default="", help="comma list or lo:hi:step")
    _common(sp)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    experiment = args.experiment if args.command == "sweep" else args.command
    try:
        cfg = load_config(args.config, args.set, experiment, args.seed)
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if len(values) == 1 and ":" in values[0]:
                values = [repr(v) for v in parse_list(values[0])]
            result = sweep(cfg, args.axis, values, args.workers)
            text = format_result(cfg, result, args.format,
                                 {"sweep_axis": args.axis, "sweep_values": ",".join(values)})
            name = f"sweep-{experiment}-{args.axis}"
        else:
            result = run(cfg)
            text = format_result(cfg, result, args.format)
            name = experiment
    except (DomainError, OSError) as exc:
        print(f"halfplane: error: {exc}", file=sys.stderr)
        return 2
    _emit(text, args.out, name, args.format)
    if not result.passed:
        print(f"halfplane: {name}: contract failed", file=sys.stderr)
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
