"""Grover circuit variants: standard, one-stage and two-stage depth-reduced.

Data qubits are ``0..n-1``; when ``mct_mode == "one_ancilla"`` qubit ``n`` is
the shared ancilla. Target bitstrings are written high qubit first, so bit
``target[n - 1 - q]`` belongs to qubit ``q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import Circuit, circuit_metrics, transpile_to_basis
from .errors import ValidationError

MCT_MODES = ("noancilla", "one_ancilla")
ALGORITHMS = ("sga", "sgaa", "m1ga", "m1gaa", "m2ga", "m2gaa")

# Depth-reduced schedules may spend at most this fraction of the SGA gate count.
COST_FRACTION = 0.75


@dataclass(frozen=True)
class Iteration:
    oracle_scope: str = "full"  # "full" | "block"
    diffusion_scope: str = "global"  # "global" | "local"

    def __post_init__(self):
        if self.oracle_scope not in ("full", "block"):
            raise ValidationError(f"bad oracle scope {self.oracle_scope!r}")
        if self.diffusion_scope not in ("global", "local"):
            raise ValidationError(f"bad diffusion scope {self.diffusion_scope!r}")


@dataclass(frozen=True)
class Stage:
    block: tuple[int, ...]
    iterations: tuple[Iteration, ...]
    measure_after: bool = False
    local_block: tuple[int, ...] | None = None

    @property
    def diffusion_block(self) -> tuple[int, ...]:
        return self.block if self.local_block is None else self.local_block

    def to_dict(self) -> dict:
        return {
            "block": list(self.block),
            "iterations": [[it.oracle_scope, it.diffusion_scope] for it in self.iterations],
            "measure_after": self.measure_after,
            "local_block": None if self.local_block is None else list(self.local_block),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stage":
        return cls(
            block=tuple(d["block"]),
            iterations=tuple(Iteration(*it) for it in d["iterations"]),
            measure_after=bool(d.get("measure_after", False)),
            local_block=None if d.get("local_block") is None else tuple(d["local_block"]),
        )


@dataclass(frozen=True)
class StageSchedule:
    stages: tuple[Stage, ...]
    note: str = ""

    def validate(self, n: int) -> None:
        seen: list[int] = []
        for st in self.stages:
            if not st.block:
                raise ValidationError("empty stage block")
            seen.extend(st.block)
            if st.local_block is not None and not (st.local_block and set(st.local_block) <= set(range(n))):
                raise ValidationError("local diffusion block must be a nonempty set of data qubits")
        if sorted(seen) != list(range(n)):
            raise ValidationError(f"stage blocks {[s.block for s in self.stages]} do not partition {n} qubits")
        if len(self.stages) > 1 and not self.stages[0].measure_after:
            raise ValidationError("multi-stage schedules measure after stage 1")

    def to_dict(self) -> dict:
        return {"stages": [s.to_dict() for s in self.stages], "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "StageSchedule":
        return cls(tuple(Stage.from_dict(s) for s in d["stages"]), d.get("note", ""))


@dataclass(frozen=True)
class GroverConfig:
    n_qubits: int
    target: str | None = None
    mct_mode: str = "noancilla"
    variant: str = "standard"
    schedule: StageSchedule | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError("n_qubits must be >= 1")
        target = "1" * self.n_qubits if self.target is None else self.target
        if len(target) != self.n_qubits or set(target) - {"0", "1"}:
            raise ValidationError(f"target {target!r} is not a {self.n_qubits}-bit string")
        object.__setattr__(self, "target", target)
        if self.mct_mode not in MCT_MODES:
            raise ValidationError(f"unknown mct_mode {self.mct_mode!r}")
        if self.variant not in ("standard", "modified"):
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.variant == "modified" and self.schedule is not None:
            self.schedule.validate(self.n_qubits)

    @property
    def uses_ancilla(self) -> bool:
        return self.mct_mode == "one_ancilla"

    @property
    def total_qubits(self) -> int:
        return self.n_qubits + (1 if self.uses_ancilla else 0)

    @property
    def algorithm(self) -> str:
        """Short label such as ``sga`` or ``m2gaa``."""
        suffix = "aa" if self.uses_ancilla else "a"
        if self.variant == "standard":
            return "sg" + suffix
        stages = 1 if self.schedule is None else len(self.schedule.stages)
        return ("m1g" if stages == 1 else "m2g") + suffix

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "target": self.target,
            "mct_mode": self.mct_mode,
            "variant": self.variant,
            "schedule": None if self.schedule is None else self.schedule.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroverConfig":
        """Accepts either explicit fields or ``{"algorithm": ..., "n_qubits": ...}``."""
        if "algorithm" in d:
            return config_for(d["algorithm"], int(d["n_qubits"]), d.get("target"))
        schedule = d.get("schedule")
        return cls(
            n_qubits=int(d["n_qubits"]),
            target=d.get("target"),
            mct_mode=d.get("mct_mode", "noancilla"),
            variant=d.get("variant", "standard"),
            schedule=None if schedule is None else StageSchedule.from_dict(schedule),
        )


def config_for(algorithm: str, n: int, target: str | None = None) -> GroverConfig:
    """Config for one of ``sga, sgaa, m1ga, m1gaa, m2ga, m2gaa``."""
    algo = algorithm.lower()
    if algo not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {algorithm!r}")
    mode = "one_ancilla" if algo.endswith("aa") else "noancilla"
    if algo.startswith("sg"):
        return GroverConfig(n, target, mode, "standard")
    schedule = default_m1_schedule(n, mode) if algo.startswith("m1") else default_m2_schedule(n, mode)
    return GroverConfig(n, target, mode, "modified", schedule)


def optimal_iterations(n: int) -> int:
    if n < 1:
        raise ValidationError("n must be >= 1")
    theta = math.asin(2 ** (-n / 2))
    return max(1, math.floor(math.pi / (4 * theta)))


def _bits_for(qubits: Sequence[int], target: str, n: int) -> list[int]:
    return [int(target[n - 1 - q]) for q in qubits]


def _mcz(circ: Circuit, qubits: Sequence[int], ancilla: int | None):
    *controls, last = qubits
    if not controls:
        circ.z(last)
        return
    circ.h(last)
    use_anc = ancilla if ancilla is not None and len(controls) >= 3 else None
    circ.mct(controls, last, use_anc)
    circ.h(last)


def _append_oracle(circ: Circuit, qubits: Sequence[int], bits: Sequence[int], ancilla):
    zeros = [q for q, b in zip(qubits, bits) if b == 0]
    for q in zeros:
        circ.x(q)
    _mcz(circ, sorted(qubits), ancilla)
    for q in zeros:
        circ.x(q)


def _append_diffusion(circ: Circuit, qubits: Sequence[int], ancilla):
    # H X (MCZ) X H == I - 2|s><s|, the reflection up to a global sign
    qubits = sorted(qubits)
    for q in qubits:
        circ.h(q)
    for q in qubits:
        circ.x(q)
    _mcz(circ, qubits, ancilla)
    for q in qubits:
        circ.x(q)
    for q in qubits:
        circ.h(q)


def _ancilla_index(n: int, mct_mode: str) -> int | None:
    return n if mct_mode == "one_ancilla" else None


def build_oracle(n: int, target: str | None = None, mct_mode: str = "noancilla") -> Circuit:
    """Phase oracle flipping the sign of ``|target>`` only."""
    target = "1" * n if target is None else target
    if not target:
        raise ValidationError("empty target")
    if len(target) != n:
        raise ValidationError("target length must equal n")
    anc = _ancilla_index(n, mct_mode)
    circ = Circuit(n + (anc is not None))
    qubits = list(range(n))
    _append_oracle(circ, qubits, _bits_for(qubits, target, n), anc)
    return circ


def build_diffusion(n: int, scope_qubits: Sequence[int] | None = None, mct_mode: str = "noancilla") -> Circuit:
    """Reflection about the uniform state of ``scope_qubits`` (identity elsewhere)."""
    scope = list(range(n)) if scope_qubits is None else sorted(set(scope_qubits))
    if not scope:
        raise ValidationError("empty diffusion scope")
    if scope[0] < 0 or scope[-1] >= n:
        raise ValidationError("diffusion scope outside register")
    anc = _ancilla_index(n, mct_mode)
    circ = Circuit(n + (anc is not None))
    _append_diffusion(circ, scope, anc)
    return circ


def build_standard_grover(config: GroverConfig, iterations: int | None = None,
                          measure: bool = True) -> Circuit:
    n = config.n_qubits
    anc = _ancilla_index(n, config.mct_mode)
    circ = Circuit(config.total_qubits, num_clbits=n)
    qubits = list(range(n))
    bits = _bits_for(qubits, config.target, n)
    for q in qubits:
        circ.h(q)
    for _ in range(optimal_iterations(n) if iterations is None else iterations):
        _append_oracle(circ, qubits, bits, anc)
        _append_diffusion(circ, qubits, anc)
    if measure:
        for q in qubits:
            circ.measure(q, q)
    return circ


def build_modified_grover(config: GroverConfig, measure: bool = True) -> Circuit:
    if config.schedule is None:
        raise ValidationError("modified variant needs a schedule")
    n = config.n_qubits
    schedule = config.schedule
    schedule.validate(n)
    anc = _ancilla_index(n, config.mct_mode)
    circ = Circuit(config.total_qubits, num_clbits=n)
    everything = list(range(n))
    full_bits = _bits_for(everything, config.target, n)
    measured: set[int] = set()
    for q in everything:
        circ.h(q)
    for k, stage in enumerate(schedule.stages):
        if k > 0 and measured:
            fresh = [q for q in everything if q not in measured]
            for q in fresh:
                circ.reset(q)
            for q in fresh:
                circ.h(q)
        block = sorted(stage.block)
        for it in stage.iterations:
            if it.oracle_scope == "full":
                _append_oracle(circ, everything, full_bits, anc)
            else:
                _append_oracle(circ, block, _bits_for(block, config.target, n), anc)
            scope = everything if it.diffusion_scope == "global" else stage.diffusion_block
            _append_diffusion(circ, scope, anc)
        if stage.measure_after and measure:
            for q in block:
                circ.measure(q, q)
                measured.add(q)
    if measure:
        for q in everything:
            if q not in measured:
                circ.measure(q, q)
    return circ


def build_circuit(config: GroverConfig, measure: bool = True) -> Circuit:
    if config.variant == "standard":
        return build_standard_grover(config, measure=measure)
    return build_modified_grover(config, measure=measure)


# ---------------------------------------------------------------------------
# default depth-reduced schedules
# ---------------------------------------------------------------------------

def _evolve(n: int, pattern: str, local_mask: int) -> np.ndarray:
    """Amplitudes after an all-ones-oracle iteration string.

    ``G`` is the global diffusion; ``L`` reflects about the mean over the
    qubits in ``local_mask`` separately for each value of the other qubits.
    """
    psi = np.full(2 ** n, 2 ** (-n / 2))
    t = 2 ** n - 1
    groups = np.arange(2 ** n) & ~local_mask
    size = 2 ** bin(local_mask).count("1")
    for d in pattern:
        psi[t] = -psi[t]
        if d == "G":
            psi = 2 * psi.mean() - psi
        else:
            means = np.bincount(groups, weights=psi, minlength=2 ** n) / size
            psi = 2 * means[groups] - psi
    return psi


def _mask(qubits) -> int:
    return sum(1 << q for q in qubits)


@lru_cache(maxsize=None)
def _component_gates(n: int, mct_mode: str, scope: tuple[int, ...]) -> int:
    anc = _ancilla_index(n, mct_mode)
    circ = Circuit(n + (anc is not None))
    _append_diffusion(circ, list(scope), anc)
    return circuit_metrics(transpile_to_basis(circ)).total_gates


def _search_pattern(n, mct_mode, local, measured, extra_cost, extra_success, outer):
    """Best ``X^a Y^b X^c`` iteration string within the gate budget.

    ``outer`` is ``"L"`` (local-global-local) or ``"G"`` (global-local-global).
    Success is the ideal probability that the ``measured`` qubits read the
    target bits, times ``extra_success``; cheaper strings win ties.
    """
    k = optimal_iterations(n)
    full = _component_gates(n, mct_mode, tuple(range(n)))
    loc = _component_gates(n, mct_mode, tuple(local))
    budget = COST_FRACTION * 2 * k * full
    lmask, mmask = _mask(local), _mask(measured)
    hit = (np.arange(2 ** n) & mmask) == mmask
    inner = "G" if outer == "L" else "L"
    best = None
    for a in range(2 * k + 1):
        for b in range(2 * k + 1 - a):
            for c in range(2 * k + 1 - a - b):
                pattern = outer * a + inner * b + outer * c
                n_glob, n_loc = pattern.count("G"), pattern.count("L")
                if n_loc == 0 or (outer == "L" and n_glob >= k):
                    continue
                # each iteration holds one full oracle plus its diffusion
                cost = (len(pattern) + n_glob) * full + n_loc * loc + extra_cost
                if cost > budget:
                    continue
                psi = _evolve(n, pattern, lmask)
                p = round(float(np.sum(psi[hit] ** 2)) * extra_success, 12)
                key = (p, -cost, -a)
                if best is None or key > best[0]:
                    best = (key, pattern)
    if best is None:
        raise ValidationError(f"no depth-reduced schedule fits the budget at n={n}")
    return best[1], best[0][0]


def _iterations(pattern: str) -> tuple[Iteration, ...]:
    return tuple(Iteration("full", "global" if d == "G" else "local") for d in pattern)


def _runs(pattern: str) -> str:
    out, prev, count = [], None, 0
    for d in pattern + " ":
        if d == prev:
            count += 1
            continue
        if prev is not None:
            out.append(f"{prev}^{count}")
        prev, count = d, 1
    return " ".join(out)


@lru_cache(maxsize=None)
def default_m1_schedule(n: int, mct_mode: str = "noancilla") -> StageSchedule:
    """One stage ``L^a G^b L^c``; local diffusions act on the low ceil(n/2) qubits.

    The grid covers ``a + b + c <= 2k`` with fewer global diffusions than the
    standard ``k``. Among strings within ``COST_FRACTION`` of the standard
    gate count, the highest ideal success wins.
    """
    if n < 2:
        raise ValidationError("depth-reduced search needs n >= 2")
    m = math.ceil(n / 2)
    local = tuple(range(m))
    pattern, p = _search_pattern(n, mct_mode, local, tuple(range(n)), 0, 1.0, "L")
    stage = Stage(tuple(range(n)), _iterations(pattern), local_block=local)
    return StageSchedule((stage,), note=f"{_runs(pattern)} local={m} ideal={p:.6f}")


@lru_cache(maxsize=None)
def default_m2_schedule(n: int, mct_mode: str = "noancilla") -> StageSchedule:
    """Two-stage partial search.

    Stage 1 amplifies the target prefix on the low ceil(n/2) qubits with a
    ``G^a L^b G^c`` string whose local diffusions act on the other block,
    then measures that block. Stage 2 re-prepares the remaining qubits and
    runs an ordinary Grover search over them with local diffusions.
    """
    if n < 2:
        raise ValidationError("two-stage search needs n >= 2")
    m = math.ceil(n / 2)
    first, second = tuple(range(m)), tuple(range(m, n))
    k2 = optimal_iterations(len(second))
    full = _component_gates(n, mct_mode, tuple(range(n)))
    stage2_cost = k2 * (full + _component_gates(n, mct_mode, second))
    p2 = closed_form_success(len(second), k2)
    pattern, p = _search_pattern(n, mct_mode, second, first, stage2_cost, p2, "G")
    stages = (
        Stage(first, _iterations(pattern), measure_after=True, local_block=second),
        Stage(second, tuple(Iteration("full", "local") for _ in range(k2))),
    )
    return StageSchedule(stages, note=f"stage1 {_runs(pattern)} | stage2 L^{k2} blocks {m}+{n - m} ideal={p:.6f}")


# ---------------------------------------------------------------------------
# ideal success
# ---------------------------------------------------------------------------

def closed_form_success(n: int, iterations: int | None = None) -> float:
    k = optimal_iterations(n) if iterations is None else iterations
    theta = math.asin(2 ** (-n / 2))
    return math.sin((2 * k + 1) * theta) ** 2


def ideal_distribution(config: GroverConfig) -> np.ndarray:
    """Noiseless outcome distribution over the n data bits."""
    from .qsim import run_pure
    from .noise import compile_program

    circ = transpile_to_basis(build_circuit(config))
    return run_pure(compile_program(circ), circ.n_qubits, circ.num_clbits)


def ideal_success_probability(config: GroverConfig, exact_circuit: bool = False) -> float:
    if config.variant == "standard" and not exact_circuit:
        return closed_form_success(config.n_qubits)
    probs = ideal_distribution(config)
    return float(probs[int(config.target, 2)])
