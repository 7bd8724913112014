"""CSV and JSON writers for lab results."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import GroverNoiseError, ValidationError
from .experiment import Distribution, RelaxationPoint, ThresholdResult
from .fitting import FitResult

THRESHOLD_HEADER = ("algorithm", "n", "error_type", "threshold", "target_S", "shots", "seed")
SAMPLE_HEADER = ("algorithm", "n", "error_type", "scope", "param", "selectivity")
RELAXATION_HEADER = ("algorithm", "n", "T1_us", "T2_us", "selectivity")

THRESHOLD_FILE = "thresholds.csv"
SAMPLE_FILE = "threshold_samples.csv"
RELAXATION_FILE = "relaxation.csv"
FIT_FILE = "fit.json"
DISTRIBUTION_FILE = "distribution.json"


class ReportError(GroverNoiseError, OSError):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def threshold_csv(results: Sequence[ThresholdResult]) -> str:
    return _csv_text(THRESHOLD_HEADER, (
        (r.algorithm, r.n, r.error_label, _num(r.threshold), _num(r.target_S), r.shots, r.seed)
        for r in results))


def sample_csv(results: Sequence[ThresholdResult]) -> str:
    return _csv_text(SAMPLE_HEADER, (
        (r.algorithm, r.n, r.error_label, r.scope, _num(p), _num(s))
        for r in results for p, s in r.samples))


def relaxation_csv(points: Sequence[RelaxationPoint]) -> str:
    return _csv_text(RELAXATION_HEADER, (
        (p.algorithm, p.n, _num(p.T1), _num(p.T2), _num(p.S)) for p in points))


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def export_report(results, path: str | Path) -> list[Path]:
    """Write results under ``path``.

    ``results`` may be threshold results, relaxation points, a fit or a
    distribution (or a list of one kind). A directory path gets the default
    file names; a path ending in ``.csv`` or ``.json`` is used as is.
    """
    if isinstance(results, (FitResult, Distribution, ThresholdResult, RelaxationPoint)):
        results = [results]
    results = list(results)
    if not results:
        raise ValidationError("nothing to export")
    kinds = {type(r) for r in results}
    if len(kinds) != 1:
        raise ValidationError("export_report takes results of one kind at a time")
    kind = kinds.pop()
    path = Path(path)
    as_file = path.suffix in (".csv", ".json")

    def target(default: str) -> Path:
        return path if as_file else path / default

    if kind is ThresholdResult:
        written = [_write(target(THRESHOLD_FILE), threshold_csv(results))]
        if not as_file:
            written.append(_write(path / SAMPLE_FILE, sample_csv(results)))
        return written
    if kind is RelaxationPoint:
        return [_write(target(RELAXATION_FILE), relaxation_csv(results))]
    if kind is FitResult:
        if len(results) != 1:
            raise ValidationError("export one fit per file")
        return [_write(target(FIT_FILE), _json_text(results[0].to_json()))]
    if kind is Distribution:
        if len(results) != 1:
            raise ValidationError("export one distribution per file")
        return [_write(target(DISTRIBUTION_FILE), _json_text(results[0].to_json()))]
    raise ValidationError(f"cannot export {kind.__name__}")


def export_relaxation(points: Sequence[RelaxationPoint], path: str | Path) -> Path:
    """Write a scan, including an empty one (header only)."""
    path = Path(path)
    return _write(path if path.suffix == ".csv" else path / RELAXATION_FILE, relaxation_csv(points))


def read_fit(path: str | Path) -> FitResult:
    try:
        with open(path) as fh:
            return FitResult.from_json(json.load(fh))
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
