"""Noisy Grover runs, selectivity, error thresholds and relaxation scans."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..circuit import Circuit, transpile_to_basis
from ..errors import UnbracketedError, ValidationError
from ..grover import GroverConfig, build_circuit
from ..noise import SHORT_NAMES, NoiseModel, NoiseRule, compile_program, scoped_models
from ..qsim import MAX_DENSITY_QUBITS, run_density, run_trajectories

BACKENDS = ("auto", "density", "trajectory")
DEFAULT_SHOTS = 20000
TARGET_S = 3.0
# exact density mode is used up to this many data qubits
AUTO_DENSITY_MAX_N = 8
QUALIFY_BAND = (2.5, 3.5)
REFINE_STEPS = 6
REFINE_TOL = 0.05
# exact probabilities below this are float round-off
ROUNDOFF = 1e-15

# short error labels used in CSV output
ERROR_LABELS = {v: k for k, v in SHORT_NAMES.items()}


def worker_count() -> int:
    """Thread cap from ``GROVER_LAB_THREADS``; defaults to the CPU count."""
    raw = os.environ.get("GROVER_LAB_THREADS")
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"GROVER_LAB_THREADS must be an integer, got {raw!r}") from exc
    return max(1, value)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map over a thread pool capped by :func:`worker_count`."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    """Outcome probabilities over n-bit strings, highest qubit first.

    ``shots`` is 0 for exact probabilities; otherwise ``counts`` holds the
    raw tallies and sums to ``shots``.
    """

    n_qubits: int
    target: str
    probs: np.ndarray
    shots: int = 0
    counts: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2 ** self.n_qubits,):
            raise ValidationError(f"expected {2 ** self.n_qubits} probabilities, got {p.shape}")
        if p.size == 0 or np.any(p < 0):
            raise ValidationError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError(f"probabilities sum to {p.sum()!r}")
        object.__setattr__(self, "probs", p)
        if self.counts is not None and int(np.sum(self.counts)) != self.shots:
            raise ValidationError("counts do not sum to shots")

    @property
    def exact(self) -> bool:
        return self.shots == 0

    def bitstring(self, index: int) -> str:
        return format(index, f"0{self.n_qubits}b")

    def prob(self, bitstring: str) -> float:
        return float(self.probs[int(bitstring, 2)])

    def as_dict(self) -> dict[str, float]:
        return {self.bitstring(i): float(p) for i, p in enumerate(self.probs) if p > 0}

    def to_json(self) -> dict:
        return {"target": self.target, "shots": self.shots, "probs": self.as_dict()}

    @classmethod
    def from_json(cls, d: Mapping) -> "Distribution":
        target = str(d["target"])
        n = len(target)
        probs = np.zeros(2 ** n)
        for bits, p in d["probs"].items():
            probs[int(bits, 2)] = float(p)
        shots = int(d.get("shots", 0))
        return cls(n, target, probs / probs.sum(), shots)

    @classmethod
    def from_mapping(cls, probs: Mapping[str, float], target: str, shots: int = 0) -> "Distribution":
        return cls.from_json({"target": target, "shots": shots, "probs": dict(probs)})


@lru_cache(maxsize=64)
def basis_circuit(config: GroverConfig) -> Circuit:
    """Transpiled, measured Grover circuit for ``config`` (cached)."""
    return transpile_to_basis(build_circuit(config))


def resolve_backend(config: GroverConfig, backend: str) -> str:
    if backend not in BACKENDS:
        raise ValidationError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend != "auto":
        return backend
    if config.n_qubits <= AUTO_DENSITY_MAX_N and config.total_qubits <= MAX_DENSITY_QUBITS:
        return "density"
    return "trajectory"


@lru_cache(maxsize=512)
def _exact_probs(config: GroverConfig, model: NoiseModel | None) -> np.ndarray:
    circ = basis_circuit(config)
    probs = run_density(compile_program(circ, model), circ.n_qubits, circ.num_clbits)
    probs.setflags(write=False)
    return probs


def run_shots(config: GroverConfig, model: NoiseModel | None = None, shots: int = DEFAULT_SHOTS,
              backend: str = "auto", seed: int = 0) -> Distribution:
    """Outcome distribution of the noisy program for ``config``.

    Density mode returns exact probabilities and ignores ``shots``.
    Trajectory mode is deterministic for a given ``seed``.
    """
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    mode = resolve_backend(config, backend)
    n = config.n_qubits
    if mode == "density":
        probs = np.array(_exact_probs(config, model))
        probs[probs < ROUNDOFF] = 0.0
        return Distribution(n, config.target, probs / probs.sum())
    circ = basis_circuit(config)
    counts = run_trajectories(compile_program(circ, model), circ.n_qubits, circ.num_clbits, shots, seed)
    return Distribution(n, config.target, counts / shots, shots, counts)


# ---------------------------------------------------------------------------
# selectivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectivityReport:
    P_t: float
    P_hn: float
    S: float
    hn_state: str | None = None


def selectivity_value(p_t: float, p_hn: float) -> float:
    """``10 log10(p_t / p_hn)`` with infinite sentinels at zero probabilities."""
    if p_t <= 0:
        return -math.inf
    if p_hn <= 0:
        return math.inf
    return 10.0 * math.log10(p_t / p_hn)


def selectivity(dist: Distribution | Mapping[str, float], target: str | None = None) -> SelectivityReport:
    """Target probability against the most likely wrong outcome."""
    if not isinstance(dist, Distribution):
        if not dist:
            raise ValidationError("distribution is empty")
        if target is None:
            raise ValidationError("target bitstring required")
        dist = Distribution.from_mapping(dist, target)
    target = dist.target if target is None else target
    if len(target) != dist.n_qubits:
        raise ValidationError(f"target {target!r} does not match {dist.n_qubits} qubits")
    t = int(target, 2)
    p_t = float(dist.probs[t])
    others = dist.probs.copy()
    others[t] = -1.0
    hn = int(np.argmax(others)) if others.size > 1 else None  # argmax picks the smallest index on ties
    p_hn = 0.0 if hn is None else float(others[hn])
    return SelectivityReport(p_t, p_hn, selectivity_value(p_t, p_hn),
                             None if hn is None else dist.bitstring(hn))


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if lo <= 0 or hi <= lo or points < 2:
        raise ValidationError(f"bad grid {lo}:{hi}:{points}")
    return np.logspace(math.log10(lo), math.log10(hi), points)


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:points`` with logarithmic spacing."""
    try:
        lo, hi, points = spec.split(":")
        return log_grid(float(lo), float(hi), int(points))
    except ValueError as exc:
        raise ValidationError(f"grid must look like lo:hi:points, got {spec!r}") from exc


@dataclass(frozen=True)
class ThresholdResult:
    algorithm: str
    n: int
    error_family: str
    samples: tuple[tuple[float, float], ...]
    threshold: float
    target_S: float = TARGET_S
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    scope: str = "all"

    @property
    def error_label(self) -> str:
        return ERROR_LABELS.get(self.error_family, self.error_family)


def noise_for(family: str, param: float, scope: str = "all", n_qubits: int = 1,
              noisy_qubit: int = 0) -> NoiseModel:
    family = SHORT_NAMES.get(family, family)
    if family == "thermal_relaxation":
        raise ValidationError("thermal noise is parameterised by T1/T2; use relaxation_scan")
    return scoped_models(family, float(param), scope, n_qubits, noisy_qubit)


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    g = np.asarray(sorted(float(x) for x in grid))
    if g.size < 4:
        raise ValidationError("threshold grid needs at least 4 points")
    if g[0] <= 0:
        raise ValidationError("threshold grid must be positive")
    if g[-1] / g[0] < 10 * (1 - 1e-12):
        raise ValidationError("threshold grid must span at least one decade")
    if np.any(np.diff(g) <= 0):
        raise ValidationError("threshold grid has repeated points")
    return g


def _crossing(x0, s0, x1, s1, target):
    return x0 + (target - s0) * (x1 - x0) / (s1 - s0)


def find_error_threshold(config: GroverConfig, error_family: str, grid: Sequence[float],
                         shots: int = DEFAULT_SHOTS, seed: int = 0, backend: str = "auto",
                         scope: str = "all", noisy_qubit: int = 0,
                         target_S: float = TARGET_S) -> ThresholdResult:
    """Error parameter where selectivity crosses ``target_S``.

    The grid is evaluated first and the first adjacent pair whose
    selectivities straddle ``target_S`` is refined by interpolating S
    linearly in log10(parameter), shrinking the bracket after each of at
    most ``REFINE_STEPS`` evaluations until ``|S - target_S| <= REFINE_TOL``.
    """
    family = SHORT_NAMES.get(error_family, error_family)
    g = _check_grid(grid)
    n = config.n_qubits

    def s_at(p: float) -> float:
        model = noise_for(family, p, scope, config.total_qubits, noisy_qubit)
        return selectivity(run_shots(config, model, shots, backend, seed)).S

    values = parallel_map(s_at, list(g))
    samples = dict(zip(g.tolist(), values))
    above = [s >= target_S for s in values]
    if all(above):
        raise UnbracketedError(
            f"S >= {target_S} over the whole grid; the threshold lies above the upper edge {g[-1]:g}", "upper")
    if not any(above):
        raise UnbracketedError(
            f"S < {target_S} over the whole grid; the threshold lies below the lower edge {g[0]:g}", "lower")
    k = next(i for i in range(len(g) - 1) if above[i] != above[i + 1])
    xa, sa = math.log10(g[k]), values[k]
    xb, sb = math.log10(g[k + 1]), values[k + 1]
    threshold = _refine(s_at, xa, sa, xb, sb, target_S, samples)
    ordered = tuple(sorted(samples.items()))
    return ThresholdResult(config.algorithm, n, family, ordered, threshold, target_S, shots, seed, scope)


def _refine(s_at, xa, sa, xb, sb, target, samples) -> float:
    """Illinois-style false position on log10(p); returns the threshold."""
    side = 0
    for _ in range(REFINE_STEPS):
        if not (math.isfinite(sa) and math.isfinite(sb)):
            x = 0.5 * (xa + xb)
        else:
            x = _crossing(xa, sa, xb, sb, target)
        p = 10 ** x
        s = s_at(p)
        samples[p] = s
        if abs(s - target) <= REFINE_TOL:
            return p
        if (s >= target) == (sa >= target):
            xa, sa = x, s
            if side == -1:
                sb = target + (sb - target) / 2
            side = -1
        else:
            xb, sb = x, s
            if side == 1:
                sa = target + (sa - target) / 2
            side = 1
    if not (math.isfinite(sa) and math.isfinite(sb)):
        return 10 ** (0.5 * (xa + xb))
    return 10 ** _crossing(xa, sa, xb, sb, target)


# ---------------------------------------------------------------------------
# relaxation scans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelaxationPoint:
    algorithm: str
    n: int
    T1: float
    T2: float
    S: float


def default_relaxation_grid(per_decade: int = 8, lo: float = 10.0, hi: float = 1e4) -> np.ndarray:
    decades = math.log10(hi / lo)
    return log_grid(lo, hi, int(round(decades * per_decade)) + 1)


def thermal_model(T1: float, T2: float) -> NoiseModel:
    return NoiseModel((NoiseRule.thermal(T1, T2),))


@dataclass
class _ScanCache:
    config: GroverConfig
    shots: int
    backend: str
    seed: int
    values: dict = field(default_factory=dict)

    def __call__(self, T1: float, T2: float) -> float:
        key = (T1, T2)
        if key not in self.values:
            dist = run_shots(self.config, thermal_model(T1, T2), self.shots, self.backend, self.seed)
            self.values[key] = selectivity(dist).S
        return self.values[key]


def relaxation_scan(config: GroverConfig, T1_grid: Iterable[float] | None = None,
                    T2_grid: Iterable[float] | None = None, shots: int = DEFAULT_SHOTS,
                    seed: int = 0, backend: str = "auto", band: tuple[float, float] = QUALIFY_BAND,
                    monotone: bool = True) -> list[RelaxationPoint]:
    """Grid points of the (T1, T2) plane whose selectivity falls in ``band``.

    Pairs with ``T2 > 2 T1`` are skipped. With ``monotone`` set, each T1 row
    is searched assuming S does not decrease with T2, which skips rows and
    cells that cannot qualify; otherwise every admissible cell is evaluated.
    """
    t1 = np.asarray(sorted(default_relaxation_grid() if T1_grid is None else T1_grid), dtype=float)
    t2 = np.asarray(sorted(default_relaxation_grid() if T2_grid is None else T2_grid), dtype=float)
    if t1.size == 0 or t2.size == 0 or t1[0] <= 0 or t2[0] <= 0:
        raise ValidationError("relaxation grids must be nonempty and positive")
    lo, hi = band
    s_at = _ScanCache(config, shots, backend, seed)
    rows = [(a, [b for b in t2.tolist() if b <= 2 * a]) for a in t1.tolist()]
    found: list[tuple[float, float, float]] = []
    if not monotone:
        cells = [(a, b) for a, cols in rows for b in cols]
        values = parallel_map(lambda ab: s_at(*ab), cells)
        found = [(a, b, s) for (a, b), s in zip(cells, values) if lo <= s <= hi]
    else:
        for a, cols in rows:
            if not cols or s_at(a, cols[-1]) < lo:
                continue
            # first column with S >= lo
            left, right = 0, len(cols) - 1
            while left < right:
                mid = (left + right) // 2
                if s_at(a, cols[mid]) >= lo:
                    right = mid
                else:
                    left = mid + 1
            for b in cols[left:]:
                s = s_at(a, b)
                if s > hi:
                    break
                if s >= lo:
                    found.append((a, b, s))
    algo = config.algorithm
    return [RelaxationPoint(algo, config.n_qubits, a, b, s) for a, b, s in sorted(found)]
