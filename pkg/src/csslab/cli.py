"""Command line: ``csslab run <scenario> --config <path> [--out <dir>] [--seed <n>]``.

The config file holds ``key = value`` lines (``#`` starts a comment).  Values
are parsed as Python literals, so lists are written ``[0.02, 0.01]``.
Unknown keys are rejected.  Every key and its default is listed in
``DEFAULTS``; command-line flags override the file.
"""
from __future__ import annotations

import argparse
import ast
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .experiments import SCENARIOS

SCHEMA_VERSION = 1

log = logging.getLogger("csslab")

DEFAULTS = {
    # grid used by the identity suites; n is the total node count
    "n": 8192,
    "r_max": 400.0,
    "r_inner": 10.0,
    "seed": 0,
    "samples": 20,
    # kernel refinement study (per-region node counts)
    "kernel_base": 512,
    "kernel_levels": 3,
    # Volterra sample
    "volterra_min": 0.01,
    "volterra_max": 100.0,
    "volterra_points": 50,
    # profiles and decomposition
    "b_values": [0.02, 0.01, 0.005],
    "cb_values": [1e-4, 1e-6, 1e-8],
    "eta0": 0.0,
    "M_profile": 50.0,
    "M": 5.0,
    "delta": 0.02,
    "lam0": 1.2,
    "gamma0": 0.3,
    "eta_fraction": 0.3,
    # norm suite
    "counter_N": [8, 16, 32],
    # parameter laws
    "b0": 0.01,
    "b0_values": [0.02, 0.01, 0.005],
    "eta_rot": 0.05,
    "s_end": 1e30,
    "n_out": 4001,
    # renormalized solver
    "ds": 0.01,
    "picard_iters": 3,
    "picard_tol": 1e-10,
    "decomposition_every": 20,
    "y_max": 1.0e4,
    "n_inner": 4096,
    "n_outer": 4096,
    "record_every": 20,
    "b_end": 0.008,
    "s_max": 1000.0,
    "K": 100.0,
    "b_star": 0.05,
    # shooting
    "bracket": None,
    "budget": 40,
    "pde_shoot": False,
    "pde_b0": 0.02,
    "pde_budget": 8,
    "pde_s_max": 2.0,
    "pde_n": 2048,
    "pde_y_max": 2000.0,
    # lab frame
    "dt": 1e-3,
    "steps": 1000,
    # pseudoconformal snapshots
    "pc_times": [0.5, 2.0, -3.0],
}


class ConfigError(ValueError):
    pass


def _coerce(key, value):
    ref = DEFAULTS[key]
    if ref is None:
        return value
    if isinstance(ref, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(ref, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(ref, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(ref, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return list(value)
    return value


def parse_config_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        low = val.lower()
        if low in ("true", "false"):
            parsed = low == "true"
        elif low in ("none", "null"):
            parsed = None
        else:
            try:
                parsed = ast.literal_eval(val)
            except (ValueError, SyntaxError) as exc:
                raise ConfigError(f"line {lineno}: cannot parse value {val!r}") from exc
        out[key] = _coerce(key, parsed)
    return out


def load_config(path=None, overrides=None):
    cfg = dict(DEFAULTS)
    if path is not None:
        cfg.update(parse_config_text(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if k not in DEFAULTS:
            raise ConfigError(f"unknown key {k!r}")
        cfg[k] = _coerce(k, v)
    if cfg["n"] < 64 or cfg["n"] % 8:
        raise ConfigError("n must be a multiple of 8 and at least 64")
    if cfg["bracket"] is not None and len(cfg["bracket"]) != 2:
        raise ConfigError("bracket needs two numbers")
    return cfg


# ------------------------------------------------------------------ reports
def _jsonable(v):
    from .experiments import _num

    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return _num(v)


def summary_dict(results, cfg=None):
    """Machine-readable summary; deterministic for a fixed config and seed."""
    body = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
            "config": _jsonable(cfg or {}), "scenarios": {}, "criteria": {}}
    for r in results:
        body["scenarios"][r.scenario] = {
            "passed": r.passed,
            "checks": [c.as_dict() for c in r.checks],
            "metrics": _jsonable(r.metrics),
            "tables": {name: f"{r.scenario}_{name}.csv" for name in r.tables},
        }
        for crit, checks in r.by_criterion().items():
            entry = body["criteria"].setdefault(crit, {"passed": True, "scenarios": []})
            entry["passed"] = entry["passed"] and all(c.passed for c in checks)
            if r.scenario not in entry["scenarios"]:
                entry["scenarios"].append(r.scenario)
    body["criteria"] = dict(sorted(body["criteria"].items(), key=lambda kv: _crit_key(kv[0])))
    return body


def _crit_key(c):
    return (0, int(c[1:])) if c.startswith("C") and c[1:].isdigit() else (1, 0)


def _fmt(v):
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_markdown(results):
    lines = ["# csslab report", ""]
    if not results:
        lines += ["No scenarios were run.", ""]
        return "\n".join(lines)
    lines += ["| criterion | scenario | check | value | bound | verdict |", "|---|---|---|---|---|---|"]
    rows = []
    for r in results:
        for c in r.checks:
            rows.append((_crit_key(c.criterion), c.criterion, r.scenario, c.name, _fmt(c.value), c.bound,
                         "PASS" if c.passed else "FAIL"))
    for row in sorted(rows, key=lambda x: x[0]):
        lines.append("| " + " | ".join(row[1:]) + " |")
    lines.append("")
    for r in results:
        if r.scenario == "rate-fit" and "rate_fit" in r.tables:
            lines += ["## rate-fit", "", "| b0 | T | ell | flatness% |", "|---|---|---|---|"]
            for row in r.tables["rate_fit"][1]:
                lines.append(f"| {row[0]:g} | {row[1]:.10g} | {row[2]:.6g} | {row[3]:.3f} |")
            lines.append("")
        if r.metrics:
            lines += [f"## {r.scenario} metrics", ""]
            lines += [f"- {k}: {_fmt(v)}" for k, v in sorted(r.metrics.items())]
            lines.append("")
        if r.tables:
            lines.append("Tables: " + ", ".join(f"`{r.scenario}_{n}.csv`" for n in sorted(r.tables)))
            lines.append("")
    return "\n".join(lines)


def emit_report(results, out_dir, cfg=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        for name, (header, rows) in r.tables.items():
            with open(out / f"{r.scenario}_{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for row in rows:
                    w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    (out / "summary.json").write_text(json.dumps(summary_dict(results, cfg), indent=2, sort_keys=True) + "\n")
    (out / "report.md").write_text(render_markdown(results))
    timings = {r.scenario: r.timings for r in results}
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
    return out


def run_scenario(name, cfg):
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return SCENARIOS[name](cfg)


def main(argv=None):
    p = argparse.ArgumentParser(prog="csslab", description="Numerical experiments for the radial self-dual flow.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("scenario", choices=sorted(SCENARIOS))
    r.add_argument("--config", type=Path, default=None)
    r.add_argument("--out", type=Path, default=Path("results"))
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, {} if args.seed is None else {"seed": args.seed})
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        res = run_scenario(args.scenario, cfg)
    except Exception as exc:  # scenario failures propagate as a nonzero status
        print(f"{args.scenario} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    out = emit_report([res], args.out / args.scenario, cfg)
    for c in res.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.criterion} {c.name}: {_fmt(c.value)} ({c.bound})")
    print(f"artifacts in {out}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
