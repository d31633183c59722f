"""Command-line entry point.

Exit codes: 0 success, 1 usage or runtime error, 2 blow-up suspected.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import check_energy_growth, energy_record, write_energy_csv
from .io import config_hash, load_field_binary, save_field_binary, save_field_csv, write_json
from .solver import SolverConfig, Status, initial_data, run
from .suites import SUITES, PreconditionError
from .weights import UNIT_WEIGHT, Weight

log = logging.getLogger("fractransport")

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2
WORKERS_ENV = "FRACTRANSPORT_WORKERS"
DEFAULT_INITIAL = {"kind": "gaussian", "params": {"amplitude": 1.0, "width": 1.0}, "R": None}


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    outputs: list = field(default_factory=list)
    wall_clock: float = 0.0
    exit_status: int = EXIT_OK
    status: str = ""
    reason: str = ""

    def write(self, path) -> None:
        write_json(path, self.__dict__)


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def split_config(doc: dict) -> tuple[SolverConfig, dict]:
    """Separate the optional ``initial_data`` block from the solver fields."""
    if not isinstance(doc, dict):
        raise CliError("config must be a JSON object")
    doc = dict(doc)
    init = dict(DEFAULT_INITIAL)
    init.update(doc.pop("initial_data", {}) or {})
    try:
        cfg = SolverConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    return cfg, init


def weight_for(cfg: SolverConfig):
    return UNIT_WEIGHT if cfg.weight_lambda is None else Weight(cfg.weight_lambda, cfg.weight_kappa)


def resolved(cfg: SolverConfig, init: dict) -> dict:
    d = cfg.to_dict()
    d["initial_data"] = init
    return d


# --- simulate ------------------------------------------------------------------------


def cmd_simulate(config_path, out_dir=None) -> int:
    t0 = time.perf_counter()
    cfg, init = split_config(load_json(config_path))
    out = Path(out_dir) if out_dir else Path(config_path).with_suffix("").parent / (Path(config_path).stem + "_out")
    out.mkdir(parents=True, exist_ok=True)
    full = resolved(cfg, init)
    theta0 = initial_data(init["kind"], cfg.grid, init.get("params"), init.get("R"),
                          init.get("require_positive", False))
    result = run(cfg, theta0, weight_for(cfg))
    outputs = []

    def emit(name):
        outputs.append(str(out / name))
        return out / name

    write_json(emit("config.json"), full)
    write_energy_csv(emit("energy.csv"), result.records)
    for i, snap in enumerate(result.snapshots):
        save_field_binary(emit(f"snapshot_{i:04d}.bin"), snap)
    if result.snapshots:
        save_field_csv(emit("final.csv"), result.snapshots[-1])
    code = {Status.COMPLETED: EXIT_OK, Status.BLOWUP_SUSPECTED: EXIT_BLOWUP}.get(result.status, EXIT_ERROR)
    manifest = RunManifest(config_hash(full), __version__, outputs, time.perf_counter() - t0, code,
                           result.status.value, result.reason)
    manifest.outputs.append(str(out / "manifest.json"))
    manifest.write(out / "manifest.json")
    print(json.dumps({"status": result.status.value, "reason": result.reason,
                      "final_time": result.final_time, "probes": len(result.records),
                      "output_dir": str(out)}))
    return code


# --- verify --------------------------------------------------------------------------


def cmd_verify(suite, params_path=None, out_path=None) -> int:
    if suite not in SUITES:
        raise CliError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    params = load_json(params_path) if params_path else {}
    try:
        report, passed = SUITES[suite](params)
    except PreconditionError as exc:
        print(json.dumps({"suite": suite, "passed": False, "precondition_error": str(exc)}))
        return EXIT_ERROR
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    report["passed"] = bool(passed)
    text = json.dumps(report, default=_default)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)
    return EXIT_OK if passed else EXIT_ERROR


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


# --- sweep ---------------------------------------------------------------------------

SWEEP_KEYS = ("alpha", "nu", "lambda", "kappa", "N", "L")
SWEEP_COLUMNS = SWEEP_KEYS + ("status", "reason", "c_fit", "final_time", "l2w", "hkw", "sup",
                              "grad_sup", "config_hash", "error")


def sweep_row(args) -> dict:
    row, base, init = args
    out = {k: row.get(k) for k in SWEEP_KEYS}
    out.update({c: "" for c in SWEEP_COLUMNS if c not in out})
    try:
        doc = dict(base)
        doc.update(alpha=row["alpha"], nu=row["nu"], n_points=int(row["N"]), length=float(row["L"]),
                   weight_lambda=row["lambda"], weight_kappa=int(row["kappa"]))
        cfg = SolverConfig.from_dict(doc)
        theta0 = initial_data(init["kind"], cfg.grid, init.get("params"), init.get("R"))
        res = run(cfg, theta0, weight_for(cfg))
        growth = check_energy_growth(res.records, cfg.nu)
        last = res.records[-1]
        out.update(status=res.status.value, reason=res.reason,
                   c_fit="" if growth.undefined else repr(growth.c_fit),
                   final_time=repr(float(res.final_time)), l2w=repr(last.l2w), hkw=repr(last.hkw),
                   sup=repr(last.sup), grad_sup=repr(last.grad_sup),
                   config_hash=config_hash(resolved(cfg, init)))
    except Exception as exc:  # a failed row is recorded, the sweep goes on
        out.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return out


def parse_matrix(doc) -> tuple[list, dict, dict]:
    if isinstance(doc, list):
        doc = {"rows": doc}
    if not isinstance(doc, dict) or "rows" not in doc:
        raise CliError("sweep matrix must be a list of rows or an object with 'rows'")
    rows = []
    for r in doc["rows"]:
        if isinstance(r, (list, tuple)):
            r = dict(zip(SWEEP_KEYS, r))
        missing = [k for k in SWEEP_KEYS if k not in r]
        if missing:
            raise CliError(f"sweep row {r} lacks {missing}")
        rows.append(r)
    init = dict(DEFAULT_INITIAL)
    init.update(doc.get("initial_data", {}) or {})
    return rows, dict(doc.get("base", {})), init


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise CliError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc


def cmd_sweep(matrix_path, out_path=None) -> int:
    rows, base, init = parse_matrix(load_json(matrix_path))
    out_path = Path(out_path) if out_path else Path(matrix_path).with_suffix(".csv")
    jobs = [(r, base, init) for r in rows]
    n = worker_count()
    if n == 1:
        results = [sweep_row(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(sweep_row, jobs))
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(results)
    print(json.dumps({"rows": len(results), "csv": str(out_path),
                      "errors": sum(r["status"] == "error" for r in results)}))
    return EXIT_OK


# --- norms ---------------------------------------------------------------------------


def cmd_norms(field_path, config_path) -> int:
    cfg, _ = split_config(load_json(config_path))
    try:
        f = load_field_binary(field_path)
    except OSError as exc:
        raise CliError(f"cannot read {field_path}: {exc.strerror}") from exc
    rec = energy_record(f, weight_for(cfg), cfg.alpha)
    print(json.dumps({k: v for k, v in rec.__dict__.items() if k != "time"}))
    return EXIT_ERROR if rec.poisoned else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fractransport", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="integrate one configuration")
    p.add_argument("config")
    p.add_argument("-o", "--out", help="output directory (default: <config stem>_out)")
    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite")
    p.add_argument("params", nargs="?")
    p.add_argument("-o", "--out", help="also write the JSON report here")
    p = sub.add_parser("sweep", help="run a parameter matrix")
    p.add_argument("matrix")
    p.add_argument("-o", "--out", help="CSV path (default: <matrix stem>.csv)")
    p = sub.add_parser("norms", help="weighted norms of a field dump")
    p.add_argument("field")
    p.add_argument("config")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out)
        if args.command == "verify":
            return cmd_verify(args.suite, args.params, args.out)
        if args.command == "sweep":
            return cmd_sweep(args.matrix, args.out)
        return cmd_norms(args.field, args.config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
