"""Configuration-driven sweep runner.

A single YAML file describes one run: a command, model parameters (any of
which may be a list, turning it into a sweep axis), numerical knobs and an
output target.  The schema is fail-closed: unknown keys are rejected.

Commands
--------
phase-diagram   untilted cluster mean-field magnetization over the sweep grid
fcs-cmf         covariance growth rate of jump counts on the central pair
fcs-cumulant    covariance rate from the second-order cumulant equations
wtd             Monte Carlo waiting-time moments for the monitored cluster
oracle-check    run the oracle-equivalence checks and print a pass/fail table

Output files start with a ``#``-prefixed header echoing the full config and
the code version; given the same config and seed the body is byte-identical
across runs and across ``--threads`` settings (sweep points execute in a
work-stealing pool, rows are reduced in deterministic grid order).
``--golden <dir>`` compares the fresh output against stored references
column by column instead of just writing it.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import acceptance, cumulant, fcs_cmf, wtd
from .model import ModelParams

try:
    VERSION = metadata.version("spinjumps")
except metadata.PackageNotFoundError:  # running from a source tree
    VERSION = "unknown"

COMMANDS = ("phase-diagram", "fcs-cmf", "fcs-cumulant", "wtd", "oracle-check")

# axes expand in this fixed order so row order never depends on scheduling
SWEEP_AXES = ("alpha", "h", "gamma", "Nc", "N")

_PARAM_KEYS = {"N", "Nc", "J", "h", "gamma", "alpha"}
_NUMERIC_KEYS = {"M", "dt", "t_final", "delta_chi", "n_samples", "seed", "t_cens", "d"}
_OUTPUT_KEYS = {"path", "format"}

# --golden per-column absolute tolerances; unlisted columns compare exactly
GOLDEN_TOL = {
    "m_x": 1e-9,
    "cov_rate": 1e-9,
    "fit_r2": 1e-9,
    "inv_mean": 1e-9,
    "inv_var": 1e-9,
    "ci_lo": 1e-9,
    "ci_hi": 1e-9,
    "censored_frac": 1e-12,
}

DEFAULT_NUMERICS = {
    "M": 128,
    "dt": None,
    "t_final": None,
    "delta_chi": 1e-3,
    "n_samples": 2000,
    "seed": 0,
    "t_cens": None,
    "d": 1,
}

# built-in sweeps used when a command is invoked without a config file
DEFAULT_CONFIGS = {
    "phase-diagram": {
        "command": "phase-diagram",
        "params": {"N": 120, "Nc": 1, "J": 1.0,
                   "h": [round(0.2 * k, 1) for k in range(1, 13)],
                   "gamma": [round(0.2 * k, 1) for k in range(1, 13)],
                   "alpha": 1.1},
        "output": {"path": "phase_diagram.csv", "format": "csv"},
    },
    "fcs-cmf": {
        "command": "fcs-cmf",
        "params": {"N": 100, "Nc": 2, "J": 1.0, "h": 1.0,
                   "gamma": [round(0.1 + 0.2 * k, 1) for k in range(13)],
                   "alpha": 1.1},
        "output": {"path": "fcs_cmf.csv", "format": "csv"},
    },
    "fcs-cumulant": {
        "command": "fcs-cumulant",
        "params": {"N": [10, 20, 30], "Nc": 1, "J": 1.0, "h": 1.0,
                   "gamma": [round(0.1 + 0.2 * k, 1) for k in range(13)],
                   "alpha": 0.0},
        "output": {"path": "fcs_cumulant.csv", "format": "csv"},
    },
    "wtd": {
        "command": "wtd",
        "params": {"N": 120, "Nc": [1, 2, 3], "J": 1.0, "h": 0.9,
                   "gamma": [round(0.1 + 0.1 * k, 1) for k in range(15)],
                   "alpha": 1.1},
        "numerics": {"n_samples": 2000, "seed": 0},
        "output": {"path": "wtd_sweep.csv", "format": "csv"},
    },
    "oracle-check": {"command": "oracle-check",
                     "output": {"path": "oracle_check.csv", "format": "csv"}},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated run description: one command, sweep axes, numerics, output."""

    command: str
    params: dict
    numerics: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - {"command", "params", "numerics", "output"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        command = data.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")

        params = dict(data.get("params") or {})
        if unknown := set(params) - _PARAM_KEYS:
            raise ConfigError(f"unknown params keys: {sorted(unknown)}")
        numerics = dict(DEFAULT_NUMERICS)
        given = dict(data.get("numerics") or {})
        if unknown := set(given) - _NUMERIC_KEYS:
            raise ConfigError(f"unknown numerics keys: {sorted(unknown)}")
        numerics.update(given)
        output = dict(data.get("output") or {})
        if unknown := set(output) - _OUTPUT_KEYS:
            raise ConfigError(f"unknown output keys: {sorted(unknown)}")
        output.setdefault("format", "csv")
        if output["format"] not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        output.setdefault("path", command.replace("-", "_") + "." + output["format"])

        if command != "oracle-check":
            missing = _PARAM_KEYS - set(params)
            if missing:
                raise ConfigError(f"params missing keys: {sorted(missing)}")
            for key in _PARAM_KEYS:
                vals = params[key]
                if isinstance(vals, (list, tuple)):
                    if len(vals) == 0:
                        raise ConfigError(f"sweep axis {key!r} is empty")
                    if key not in SWEEP_AXES:
                        raise ConfigError(f"{key!r} cannot be a sweep axis")
            if numerics["seed"] is None and command == "wtd":
                raise ConfigError("wtd is stochastic and needs a seed")
        return cls(command, params, numerics, output, raw=data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def points(self) -> list[dict]:
        """Cartesian product of the sweep axes, in fixed axis order."""
        axes = []
        for key in SWEEP_AXES:
            vals = self.params[key]
            axes.append([(key, v) for v in (vals if isinstance(vals, (list, tuple)) else [vals])])
        fixed = {k: v for k, v in self.params.items() if k not in SWEEP_AXES}
        return [dict(fixed, **dict(combo)) for combo in itertools.product(*axes)]


# ---------------------------------------------------------------------------
# per-point work (top level so it pickles into worker processes)


def _phase_diagram_row(point: dict, numerics: dict) -> dict:
    row = {"alpha": point["alpha"], "h_over_J": point["h"] / point["J"],
           "gamma_over_J": point["gamma"] / point["J"],
           "Nc": point["Nc"], "m_x": np.nan, "status": "ok"}
    try:
        p = ModelParams(**point)
        _, mx = fcs_cmf.cmf_steady_state(p)
        row["m_x"] = float(np.mean(np.abs(mx)))
    except Exception as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def _fcs_cmf_row(point: dict, numerics: dict) -> dict:
    row = {"alpha": point["alpha"], "h_over_J": point["h"] / point["J"],
           "gamma_over_J": point["gamma"] / point["J"],
           "Nc": point["Nc"], "cov_rate": np.nan, "fit_r2": np.nan, "status": "ok"}
    try:
        p = ModelParams(**point)
        t_final = numerics["t_final"] or 10.0 / p.gamma
        stats = fcs_cmf.covariance_growth_rate(p, t_final=t_final, M=numerics["M"])
        row["cov_rate"] = stats.growth_rate
        row["fit_r2"] = stats.fit_r2
    except Exception as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def _fcs_cumulant_row(point: dict, numerics: dict) -> dict:
    row = {"alpha": point["alpha"], "N": point["N"], "d": numerics["d"],
           "gamma_over_J": point["gamma"] / point["J"],
           "cov_rate": np.nan, "fit_r2": np.nan, "status": "ok"}
    try:
        p = ModelParams(**point)
        res = cumulant.covariance_rate(p, d=numerics["d"],
                                       delta_chi=numerics["delta_chi"],
                                       t_window=numerics["t_final"])
        row["cov_rate"] = res.rate
        row["fit_r2"] = res.fit_r2
    except Exception as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def _wtd_row(point: dict, numerics: dict) -> dict:
    try:
        p = ModelParams(**point)
    except Exception as exc:
        return {"alpha": point["alpha"], "h_over_J": point["h"] / point["J"],
                "gamma_over_J": point["gamma"] / point["J"], "Nc": point["Nc"],
                "inv_mean": np.nan, "inv_var": np.nan, "ci_lo": np.nan,
                "ci_hi": np.nan, "censored_frac": np.nan, "divergent": True,
                "status": f"{type(exc).__name__}: {exc}"}
    rows = wtd.wtd_sweep(p, [p.gamma], [p.Nc],
                         n_samples=numerics["n_samples"], seed=numerics["seed"],
                         t_cens=numerics["t_cens"])
    row = rows[0]
    row["status"] = row.pop("error", "ok")
    return row


_ROW_FNS = {
    "phase-diagram": _phase_diagram_row,
    "fcs-cmf": _fcs_cmf_row,
    "fcs-cumulant": _fcs_cumulant_row,
    "wtd": _wtd_row,
}


def _run_point(args):
    index, command, point, numerics = args
    return index, _ROW_FNS[command](point, numerics)


def run_sweep(config: RunConfig, threads: int = 1) -> list[dict]:
    """Execute every sweep point; rows come back in grid order regardless of
    the execution schedule or the number of workers."""
    points = config.points()
    jobs = [(i, config.command, pt, config.numerics) for i, pt in enumerate(points)]
    rows: list = [None] * len(jobs)
    if threads <= 1 or len(jobs) == 1:
        for job in jobs:
            i, row = _run_point(job)
            rows[i] = row
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            pending = {pool.submit(_run_point, job) for job in jobs}
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    i, row = fut.result()
                    rows[i] = row
    return rows


# ---------------------------------------------------------------------------
# serialization


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _header_lines(config: RunConfig) -> list[str]:
    echo = json.dumps(config.raw, sort_keys=True, default=str)
    return [f"# spinjumps {VERSION}", f"# config {echo}"]


def write_rows(config: RunConfig, rows: list[dict], out_path: Path) -> None:
    if config.output["format"] == "json":
        payload = {"version": VERSION, "config": config.raw, "rows": rows}
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                                       default=_format_cell) + "\n", encoding="utf-8")
        return
    buf = io.StringIO()
    for line in _header_lines(config):
        buf.write(line + "\n")
    fieldnames = list(rows[0].keys()) if rows else []
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _format_cell(v) for k, v in row.items()})
    out_path.write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: Path) -> tuple[list[str], list[dict]]:
    """(header comment lines, rows) of a sweep CSV."""
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.DictReader(body))
    return comments, rows


def compare_golden(fresh: Path, golden: Path) -> list[str]:
    """Column-by-column comparison against a stored reference; returns a list
    of human-readable mismatches (empty means pass)."""
    problems = []
    _, new_rows = read_csv(fresh)
    _, ref_rows = read_csv(golden)
    if len(new_rows) != len(ref_rows):
        return [f"{fresh.name}: {len(new_rows)} rows vs {len(ref_rows)} in golden"]
    for i, (new, ref) in enumerate(zip(new_rows, ref_rows)):
        if set(new) != set(ref):
            problems.append(f"{fresh.name} row {i}: column sets differ")
            continue
        for col, ref_val in ref.items():
            new_val = new[col]
            tol = GOLDEN_TOL.get(col)
            if tol is not None:
                a, b = float(new_val), float(ref_val)
                same = (np.isnan(a) and np.isnan(b)) or abs(a - b) <= tol
            else:
                same = new_val == ref_val
            if not same:
                problems.append(
                    f"{fresh.name} row {i} col {col}: {new_val} != {ref_val}"
                )
    return problems


# ---------------------------------------------------------------------------
# entry point


def _run_oracle_check(config: RunConfig, out_path: Path) -> int:
    results = acceptance.run_checks(acceptance.ORACLE_CHECKS)
    rows = [
        {"check": r.name, "passed": r.passed, "value": r.value,
         "threshold": r.threshold, "detail": r.detail}
        for r in results
    ]
    write_rows(config, rows, out_path)
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinjumps", description="jump-statistics sweep runner"
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="run this command with its built-in default sweep")
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("SPINJUMPS_THREADS",
                                                   os.cpu_count() or 1)))
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--golden", help="compare output against this reference directory")
    args = parser.parse_args(argv)

    try:
        if args.config:
            config = RunConfig.load(args.config)
        elif args.command:
            config = RunConfig.from_dict(DEFAULT_CONFIGS[args.command])
        else:
            parser.error("give a command or --config")
    except ConfigError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / config.output["path"]

    if config.command == "oracle-check":
        status = _run_oracle_check(config, out_path)
    else:
        rows = run_sweep(config, threads=args.threads)
        write_rows(config, rows, out_path)
        status = 0
    print(f"wrote {out_path}")

    if args.golden:
        golden_path = Path(args.golden) / out_path.name
        if not golden_path.exists():
            print(json.dumps({"error": "golden", "detail": f"missing {golden_path}"}),
                  file=sys.stderr)
            return 3
        problems = compare_golden(out_path, golden_path)
        for p in problems:
            print(p, file=sys.stderr)
        if problems:
            return 3
        print(f"golden match: {golden_path}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
