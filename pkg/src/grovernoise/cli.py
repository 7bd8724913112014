"""``grover-lab`` command line."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .circuit import circuit_metrics
from .errors import GroverNoiseError, ValidationError
from .grover import ALGORITHMS, config_for
from .lab import experiment as ex
from .lab.config import load_config
from .lab.fitting import MODELS, FitResult, extrapolate, fit_scaling
from .lab.report import export_relaxation, export_report, read_fit
from .noise import GATE_ERROR_FAMILIES, SHORT_NAMES, NoiseModel, NoiseRule

ERROR_CHOICES = tuple(SHORT_NAMES)
SCOPES = ("all", "1q", "2q", "single")


def parse_qubits(text: str) -> list[int]:
    """``4``, ``4,6,8`` or an inclusive range ``4:8``."""
    try:
        if ":" in text:
            lo, hi = (int(x) for x in text.split(":"))
            values = list(range(lo, hi + 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad qubit list {text!r}") from exc
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"bad qubit list {text!r}")
    return values


def _grid(text: str):
    try:
        return ex.parse_grid(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common(p: argparse.ArgumentParser, errors: bool = True) -> None:
    p.add_argument("--algo", choices=ALGORITHMS, default="sga")
    p.add_argument("--qubits", type=parse_qubits, default=[4], metavar="N")
    if errors:
        p.add_argument("--error", action="append", choices=ERROR_CHOICES, metavar="{" + ",".join(ERROR_CHOICES) + "}")
    p.add_argument("--shots", type=int, default=ex.DEFAULT_SHOTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=ex.BACKENDS, default="auto")
    p.add_argument("--out", type=Path, default=None, metavar="DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grover-lab", description="Noisy Grover search experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one circuit under one noise model")
    _common(p)
    p.add_argument("--param", type=float, help="error probability for gate-error families")
    p.add_argument("--t1", type=float, help="T1 in microseconds (thermal)")
    p.add_argument("--t2", type=float, help="T2 in microseconds (thermal)")
    p.add_argument("--target", help="target bitstring, highest qubit first")
    p.add_argument("--config", type=Path, help="JSON/YAML file with grover, noise and run sections")

    p = sub.add_parser("threshold", help="sweep an error parameter and interpolate S = 3")
    _common(p)
    p.add_argument("--grid", type=_grid, default=_grid("1e-4:1e-1:7"), metavar="lo:hi:points")
    p.add_argument("--scope", choices=SCOPES, default="all")
    p.add_argument("--noisy-qubit", type=int, default=0)

    p = sub.add_parser("relax-scan", help="scan the (T1, T2) plane under thermal noise")
    _common(p, errors=False)
    p.add_argument("--t1-grid", type=_grid, default=None, metavar="lo:hi:points")
    p.add_argument("--t2-grid", type=_grid, default=None, metavar="lo:hi:points")
    p.add_argument("--exhaustive", action="store_true", help="evaluate every admissible grid cell")

    p = sub.add_parser("fit", help="fit a scaling law")
    p.add_argument("--model", choices=MODELS, default="exponential")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--points", help="comma list of n:y pairs")
    src.add_argument("--input", type=Path, help="CSV with an n column and a value column")
    src.add_argument("--metric", choices=("gates", "depth"), help="fit transpiled circuit size")
    p.add_argument("--column", default=None, help="value column of --input (default: threshold or y)")
    p.add_argument("--where", action="append", default=[], metavar="COL=VALUE",
                   help="filter --input rows; repeatable")
    p.add_argument("--algo", choices=ALGORITHMS, default="sga")
    p.add_argument("--qubits", type=parse_qubits, default=parse_qubits("4:8"))
    p.add_argument("--out", type=Path, default=None, metavar="DIR")

    p = sub.add_parser("extrapolate", help="evaluate a fit at new n")
    p.add_argument("--fit", type=Path, help="fit JSON written by `fit`")
    p.add_argument("--model", choices=MODELS, default=None)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--qubits", type=parse_qubits, required=True)
    p.add_argument("--out", type=Path, default=None, metavar="DIR")

    p = sub.add_parser("report", help="run the experiments listed in a config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, metavar="DIR")
    return parser


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=False))


def _noise_from_args(args, n_total: int) -> NoiseModel | None:
    errors = args.error or []
    if len(errors) > 1:
        raise ValidationError("run takes a single --error")
    if not errors:
        return None
    family = SHORT_NAMES[errors[0]]
    if family == "thermal_relaxation":
        if args.t1 is None or args.t2 is None:
            raise ValidationError("--error thermal needs --t1 and --t2")
        return NoiseModel((NoiseRule.thermal(args.t1, args.t2),))
    if args.param is None:
        raise ValidationError(f"--error {errors[0]} needs --param")
    return NoiseModel.single(family, args.param)


def cmd_run(args) -> int:
    shots, seed, backend = args.shots, args.seed, args.backend
    if args.config is not None:
        cfg = load_config(args.config)
        if cfg.grover is None:
            raise ValidationError("config has no grover section")
        config, model = cfg.grover, cfg.noise
        shots, seed, backend = cfg.run.shots, cfg.run.seed, cfg.run.backend
    else:
        if len(args.qubits) != 1:
            raise ValidationError("run takes a single --qubits value")
        config = config_for(args.algo, args.qubits[0], args.target)
        model = _noise_from_args(args, config.total_qubits)
    dist = ex.run_shots(config, model, shots, backend, seed)
    rep = ex.selectivity(dist)
    if args.out is not None:
        export_report(dist, args.out)
    _emit(dist.to_json())
    print(f"{config.algorithm} n={config.n_qubits}: P_t={rep.P_t:.6g} P_hn={rep.P_hn:.6g} "
          f"S={rep.S:.4g} dB (runner-up {rep.hn_state})", file=sys.stderr)
    return 0


def _threshold_jobs(algo, qubits, errors, grid, shots, seed, backend, scope="all", noisy_qubit=0):
    results = []
    for n in qubits:
        config = config_for(algo, n)
        for err in errors:
            results.append(ex.find_error_threshold(config, err, grid, shots, seed, backend,
                                                   scope=scope, noisy_qubit=noisy_qubit))
    return results


def cmd_threshold(args) -> int:
    errors = args.error or ["dep"]
    if "thermal" in errors:
        raise ValidationError("thermal noise has no single error parameter; use relax-scan")
    results = _threshold_jobs(args.algo, args.qubits, errors, args.grid, args.shots, args.seed,
                              args.backend, args.scope, args.noisy_qubit)
    if args.out is not None:
        export_report(results, args.out)
    for r in results:
        _emit({"algorithm": r.algorithm, "n": r.n, "error_type": r.error_label, "scope": r.scope,
               "threshold": r.threshold})
    return 0


def cmd_relax_scan(args) -> int:
    points = []
    for n in args.qubits:
        points += ex.relaxation_scan(config_for(args.algo, n), args.t1_grid, args.t2_grid, args.shots,
                                     args.seed, args.backend, monotone=not args.exhaustive)
    if args.out is not None:
        export_relaxation(points, args.out)
    for p in points:
        _emit({"algorithm": p.algorithm, "n": p.n, "T1_us": p.T1, "T2_us": p.T2, "selectivity": p.S})
    return 0


def _points_from_csv(path: Path, column: str | None, where: list[str]) -> list[tuple[float, float]]:
    filters = []
    for item in where:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--where expects COL=VALUE, got {item!r}")
        filters.append((key, value))
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"{path} has no rows")
    if column is None:
        column = next((c for c in ("threshold", "y", "value") if c in rows[0]), None)
    if column is None or column not in rows[0] or "n" not in rows[0]:
        raise ValidationError(f"{path} needs an n column and a value column")
    rows = [r for r in rows if all(r.get(k) == v for k, v in filters)]
    return [(float(r["n"]), float(r[column])) for r in rows]


def cmd_fit(args) -> int:
    if args.points is not None:
        try:
            points = [tuple(float(x) for x in item.split(":")) for item in args.points.split(",")]
        except ValueError as exc:
            raise ValidationError(f"bad --points {args.points!r}") from exc
    elif args.input is not None:
        points = _points_from_csv(args.input, args.column, args.where)
    else:
        points = []
        for n in args.qubits:
            m = circuit_metrics(ex.basis_circuit(config_for(args.algo, n)))
            points.append((n, m.total_gates if args.metric == "gates" else m.depth))
    fit = fit_scaling(points, args.model)
    if args.out is not None:
        export_report(fit, args.out)
    _emit(fit.to_json())
    return 0


def cmd_extrapolate(args) -> int:
    if args.fit is not None:
        fit = read_fit(args.fit)
    else:
        if args.model is None or args.a is None or args.b is None:
            raise ValidationError("give --fit FILE or --model with --a and --b (and --c)")
        fit = FitResult(args.model, args.a, args.b, args.c)
    values = [{"n": n, "value": extrapolate(fit, n)} for n in args.qubits]
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "extrapolation.json").write_text(json.dumps({"fit": fit.to_json(), "values": values},
                                                                 indent=2) + "\n")
    for v in values:
        _emit(v)
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    written = []
    if cfg.grover is not None:
        dist = ex.run_shots(cfg.grover, cfg.noise, cfg.run.shots, cfg.run.backend, cfg.run.seed)
        written += export_report(dist, args.out)
    results = []
    for job in cfg.thresholds:
        qubits = job.get("qubits", [4])
        qubits = [qubits] if isinstance(qubits, int) else list(qubits)
        errors = job.get("errors", list(GATE_ERROR_FAMILIES))
        grid = ex.parse_grid(job.get("grid", "1e-4:1e-1:7"))
        results += _threshold_jobs(job.get("algo", "sga"), qubits, errors, grid,
                                   int(job.get("shots", cfg.run.shots)), int(job.get("seed", cfg.run.seed)),
                                   job.get("backend", cfg.run.backend), job.get("scope", "all"),
                                   int(job.get("noisy_qubit", 0)))
    if results:
        written += export_report(results, args.out)
        groups: dict[tuple[str, str], list] = {}
        for r in results:
            groups.setdefault((r.algorithm, r.error_label), []).append((r.n, r.threshold))
        for (algo, err), pts in sorted(groups.items()):
            if len({n for n, _ in pts}) >= 3:
                written += export_report(fit_scaling(pts, "exponential"), args.out / f"fit_{algo}_{err}.json")
    points = []
    for job in cfg.relaxation:
        qubits = job.get("qubits", [4])
        qubits = [qubits] if isinstance(qubits, int) else list(qubits)
        t1 = ex.parse_grid(job["t1_grid"]) if "t1_grid" in job else None
        t2 = ex.parse_grid(job["t2_grid"]) if "t2_grid" in job else None
        for n in qubits:
            points += ex.relaxation_scan(config_for(job.get("algo", "sga"), n), t1, t2,
                                         int(job.get("shots", cfg.run.shots)),
                                         int(job.get("seed", cfg.run.seed)),
                                         job.get("backend", cfg.run.backend))
    if cfg.relaxation:
        written.append(export_relaxation(points, args.out))
    for path in written:
        print(path)
    return 0


COMMANDS = {
    "run": cmd_run,
    "threshold": cmd_threshold,
    "relax-scan": cmd_relax_scan,
    "fit": cmd_fit,
    "extrapolate": cmd_extrapolate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except GroverNoiseError as exc:
        print(f"grover-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
