"""Gate set, circuit container, MCT decompositions, transpiler and metrics.

Qubit ordering is little-endian throughout: for an instruction acting on
``qubits = (q0, q1, ...)`` the local matrix index is ``b(q0) + 2*b(q1) + ...``
and a bitstring is written with the highest qubit first.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

BASIS_KINDS = frozenset({"u1", "u2", "u3", "cx", "measure", "reset"})
UNITARY_KINDS = frozenset({"u1", "u2", "u3", "cx", "h", "x", "z", "mct"})
ALL_KINDS = UNITARY_KINDS | {"measure", "reset"}

PARAM_COUNT = {"u1": 1, "u2": 2, "u3": 3}

# Nanoseconds. u1 is a frame change and takes no time.
GATE_TIMES_NS = {
    "u1": 0.0,
    "u2": 50.0,
    "u3": 100.0,
    "cx": 300.0,
    "reset": 1000.0,
    "measure": 1000.0,
    "h": 50.0,
    "x": 100.0,
    "z": 0.0,
}

MAX_UNITARY_QUBITS = 6

_ATOL = 1e-9


@dataclass(frozen=True)
class Instruction:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbits: tuple[int, ...] = ()
    ancilla: int | None = None

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValidationError(f"unknown instruction kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "clbits", tuple(int(c) for c in self.clbits))
        if len(self.params) != PARAM_COUNT.get(self.kind, 0):
            raise ValidationError(
                f"{self.kind} takes {PARAM_COUNT.get(self.kind, 0)} params, got {len(self.params)}"
            )
        touched = self.qubits + (() if self.ancilla is None else (self.ancilla,))
        if len(set(touched)) != len(touched):
            raise ValidationError(f"repeated qubit index in {self.kind} {touched}")
        if any(q < 0 for q in touched):
            raise ValidationError("negative qubit index")
        arity = {"cx": 2}.get(self.kind, 1)
        if self.kind == "mct":
            if len(self.qubits) < 2:
                raise ValidationError("mct needs at least one control and a target")
        elif len(self.qubits) != arity:
            raise ValidationError(f"{self.kind} acts on {arity} qubit(s), got {len(self.qubits)}")
        if self.ancilla is not None and self.kind != "mct":
            raise ValidationError("only mct instructions take an ancilla")
        if self.kind == "measure" and len(self.clbits) != 1:
            raise ValidationError("measure writes exactly one classical bit")

    @property
    def duration(self) -> float:
        return GATE_TIMES_NS.get(self.kind, 0.0)

    @property
    def all_qubits(self) -> tuple[int, ...]:
        """Qubits touched, including an MCT ancilla."""
        if self.ancilla is None:
            return self.qubits
        return self.qubits + (self.ancilla,)

    @property
    def is_unitary(self) -> bool:
        return self.kind in UNITARY_KINDS


class Circuit:
    """Ordered instruction list over ``n_qubits`` wires.

    Builders return finished circuits; callers treat them as read-only and use
    :meth:`copy` or :meth:`compose` to derive new ones.
    """

    def __init__(self, n_qubits: int, instructions: Iterable[Instruction] = (), num_clbits: int = 0):
        if n_qubits < 1:
            raise ValidationError("circuit needs at least one qubit")
        self.n_qubits = int(n_qubits)
        self.num_clbits = int(num_clbits)
        self._instructions: list[Instruction] = []
        self._written: set[int] = set()
        for inst in instructions:
            self.append(inst)

    @property
    def instructions(self) -> tuple[Instruction, ...]:
        return tuple(self._instructions)

    def __len__(self) -> int:
        return len(self._instructions)

    def __iter__(self) -> Iterator[Instruction]:
        return iter(self._instructions)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and self.num_clbits == other.num_clbits
            and self._instructions == other._instructions
        )

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, size={len(self)}, num_clbits={self.num_clbits})"

    def append(self, inst: Instruction) -> "Circuit":
        for q in inst.all_qubits:
            if q >= self.n_qubits:
                raise ValidationError(f"qubit {q} out of range for {self.n_qubits}-qubit circuit")
        if inst.kind == "measure":
            (c,) = inst.clbits
            if c >= self.num_clbits:
                raise ValidationError(f"classical bit {c} out of range ({self.num_clbits})")
            if c in self._written:
                raise ValidationError(f"classical bit {c} already written by a measurement")
            self._written.add(c)
        self._instructions.append(inst)
        return self

    def extend(self, insts: Iterable[Instruction]) -> "Circuit":
        for inst in insts:
            self.append(inst)
        return self

    def copy(self) -> "Circuit":
        return Circuit(self.n_qubits, self._instructions, self.num_clbits)

    def compose(self, other: "Circuit") -> "Circuit":
        out = Circuit(max(self.n_qubits, other.n_qubits), self._instructions,
                      max(self.num_clbits, other.num_clbits))
        return out.extend(other)

    # convenience builders
    def u1(self, lam, q):
        return self.append(Instruction("u1", (q,), (lam,)))

    def u2(self, phi, lam, q):
        return self.append(Instruction("u2", (q,), (phi, lam)))

    def u3(self, theta, phi, lam, q):
        return self.append(Instruction("u3", (q,), (theta, phi, lam)))

    def h(self, q):
        return self.append(Instruction("h", (q,)))

    def x(self, q):
        return self.append(Instruction("x", (q,)))

    def z(self, q):
        return self.append(Instruction("z", (q,)))

    def cx(self, c, t):
        return self.append(Instruction("cx", (c, t)))

    def mct(self, controls: Sequence[int], target: int, ancilla: int | None = None):
        return self.append(Instruction("mct", (*controls, target), ancilla=ancilla))

    def measure(self, q, c):
        return self.append(Instruction("measure", (q,), clbits=(c,)))

    def reset(self, q):
        return self.append(Instruction("reset", (q,)))


@dataclass(frozen=True)
class CircuitMetrics:
    total_gates: int
    depth: int
    count_1q: int
    count_2q: int
    count_measure: int = 0
    count_reset: int = 0
    counts_by_kind: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# gate matrices
# ---------------------------------------------------------------------------

def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_CX = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)


def mct_matrix(n_controls: int) -> np.ndarray:
    """Multi-controlled X on ``n_controls + 1`` qubits, target last."""
    dim = 2 ** (n_controls + 1)
    ones = (1 << n_controls) - 1
    perm = np.arange(dim)
    perm[ones], perm[ones | (1 << n_controls)] = ones | (1 << n_controls), ones
    m = np.zeros((dim, dim), dtype=complex)
    m[perm, np.arange(dim)] = 1
    return m


def gate_matrix(kind: str, params: Sequence[float] = (), num_qubits: int | None = None) -> np.ndarray:
    """Unitary matrix of a gate kind. ``num_qubits`` is only used by ``mct``."""
    params = tuple(params)
    if kind in PARAM_COUNT and len(params) != PARAM_COUNT[kind]:
        raise ValidationError(f"{kind} takes {PARAM_COUNT[kind]} params, got {len(params)}")
    if kind not in PARAM_COUNT and params:
        raise ValidationError(f"{kind} takes no params")
    if kind == "u3":
        return u3_matrix(*params)
    if kind == "u2":
        return u3_matrix(math.pi / 2, *params)
    if kind == "u1":
        return np.diag([1, np.exp(1j * params[0])]).astype(complex)
    if kind == "h":
        return _H.copy()
    if kind == "x":
        return _X.copy()
    if kind == "z":
        return _Z.copy()
    if kind == "cx":
        return _CX.copy()
    if kind == "mct":
        if num_qubits is None or num_qubits < 2:
            raise ValidationError("mct matrix needs num_qubits >= 2")
        return mct_matrix(num_qubits - 1)
    raise ValidationError(f"{kind} has no unitary matrix")


def u3_params(u: np.ndarray) -> tuple[float, float, float]:
    """Euler angles (theta, phi, lam) with ``u == e^{ia} U3(theta, phi, lam)``."""
    a00, a01, a10, a11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    theta = 2 * math.atan2(abs(a10), abs(a00))
    # phases come from the larger entries so rounding noise in tiny ones
    # only costs an error of their own size
    if abs(a00) > 0:
        alpha = np.angle(a00)
        phi = np.angle(a10) - alpha if abs(a10) > 0 else 0.0
        if abs(a00) >= abs(a10):
            lam = np.angle(a11) - alpha - phi
        else:
            lam = np.angle(-a01) - alpha
    else:
        alpha = np.angle(a10)
        phi = 0.0
        lam = np.angle(-a01) - alpha
    return float(theta), _wrap(phi), _wrap(lam)


def _wrap(angle: float) -> float:
    w = (float(angle) + math.pi) % (2 * math.pi) - math.pi
    if abs(w + math.pi) < 1e-12:
        return math.pi
    return w


def _near(a: float, b: float) -> bool:
    return abs(_wrap(a - b)) < _ATOL


def _single_qubit_instruction(u: np.ndarray, q: int) -> Instruction | None:
    """Cheapest basis gate for a 2x2 unitary; ``None`` for the identity."""
    theta, phi, lam = u3_params(u)
    if abs(theta) < _ATOL:
        total = _wrap(phi + lam)
        if abs(total) < _ATOL:
            return None
        return Instruction("u1", (q,), (total,))
    if abs(theta - math.pi / 2) < _ATOL:
        return Instruction("u2", (q,), (phi, lam))
    return Instruction("u3", (q,), (theta, phi, lam))


# ---------------------------------------------------------------------------
# MCT decompositions (emit basis instructions into a list)
# ---------------------------------------------------------------------------

def _h(out, q):
    out.append(Instruction("u2", (q,), (0.0, math.pi)))


def _u1(out, lam, q):
    out.append(Instruction("u1", (q,), (lam,)))


def _cx(out, c, t):
    out.append(Instruction("cx", (c, t)))


def _cu1(out, lam, c, t):
    _u1(out, lam / 2, c)
    _cx(out, c, t)
    _u1(out, -lam / 2, t)
    _cx(out, c, t)
    _u1(out, lam / 2, t)


def _ccx(out, a, b, t):
    q4 = math.pi / 4
    _h(out, t)
    _cx(out, b, t)
    _u1(out, -q4, t)
    _cx(out, a, t)
    _u1(out, q4, t)
    _cx(out, b, t)
    _u1(out, -q4, t)
    _cx(out, a, t)
    _u1(out, q4, b)
    _u1(out, q4, t)
    _h(out, t)
    _cx(out, a, b)
    _u1(out, q4, a)
    _u1(out, -q4, b)
    _cx(out, a, b)


def _rccx(out, a, b, t):
    # Toffoli up to a diagonal phase on the controls; self-inverse.
    q4 = math.pi / 4
    _h(out, t)
    _u1(out, q4, t)
    _cx(out, b, t)
    _u1(out, -q4, t)
    _cx(out, a, t)
    _u1(out, q4, t)
    _cx(out, b, t)
    _u1(out, -q4, t)
    _h(out, t)


def gray_code(n: int) -> list[str]:
    return [format(i ^ (i >> 1), f"0{n}b") for i in range(2 ** n)]


def _mcu1_gray(out, lam, controls, t):
    k = len(controls)
    step = lam / 2 ** (k - 1)
    last = None
    for pattern in gray_code(k):
        if "1" not in pattern:
            continue
        if last is None:
            last = pattern
        lm_pos = pattern.index("1")
        diff = [i for i, (x, y) in enumerate(zip(pattern, last)) if x != y]
        if diff:
            pos = diff[0]
            if pos != lm_pos:
                _cx(out, controls[pos], controls[lm_pos])
            else:
                ones = [i for i, x in enumerate(pattern) if x == "1"]
                for idx in ones[1:]:
                    _cx(out, controls[idx], controls[lm_pos])
        sign = -1 if pattern.count("1") % 2 == 0 else 1
        _cu1(out, sign * step, controls[lm_pos], t)
        last = pattern


def _mcx_noancilla(out, controls, t):
    k = len(controls)
    if k == 1:
        _cx(out, controls[0], t)
    elif k == 2:
        _ccx(out, controls[0], controls[1], t)
    else:
        _h(out, t)
        _mcu1_gray(out, math.pi, controls, t)
        _h(out, t)


# Sub-MCX with up to this many controls use the gray-code ladder; larger
# ones recurse. 5 keeps the ancilla circuits close to a clean power law.
_GRAY_BASE = 5


def _mcx_dirty(out, controls, t, helpers):
    """Exact MCX; for large control counts borrows one helper in any state."""
    k = len(controls)
    if k <= _GRAY_BASE or not helpers:
        _mcx_noancilla(out, controls, t)
        return
    d = helpers[0]
    mid = math.ceil(k / 2)
    first, second = list(controls[:mid]), list(controls[mid:])
    for _ in range(2):
        _mcx_dirty(out, first, d, second + [t] + list(helpers[1:]))
        _mcx_dirty(out, second + [d], t, first + list(helpers[1:]))


def _mcx_clean(out, controls, t, anc, helpers=()):
    """MCX using ``anc`` prepared in |0>; leaves ``anc`` in |0>."""
    k = len(controls)
    if k < 3:
        _mcx_noancilla(out, controls, t)
        return
    mid = math.ceil(k / 2)
    first, second = list(controls[:mid]), list(controls[mid:])

    def compute():
        if len(first) == 2:
            _rccx(out, first[0], first[1], anc)
        else:
            _mcx_dirty(out, first, anc, second + [t] + list(helpers))

    compute()
    _mcx_dirty(out, second + [anc], t, first + list(helpers))
    compute()


def decompose_mct_noancilla(n_controls: int) -> Circuit:
    """Gray-code MCX: controls ``0..n-1``, target ``n``."""
    if n_controls < 1:
        raise ValidationError("n_controls must be >= 1")
    if n_controls > 13:
        raise CapacityError("n_controls above 13 not supported")
    out: list[Instruction] = []
    _mcx_noancilla(out, list(range(n_controls)), n_controls)
    return Circuit(n_controls + 1, out)


def decompose_mct_one_ancilla(n_controls: int) -> Circuit:
    """Recursive-split MCX: controls ``0..n-1``, target ``n``, clean ancilla ``n+1``."""
    if n_controls < 3:
        raise ValidationError("one-ancilla decomposition needs n_controls >= 3")
    if n_controls > 13:
        raise CapacityError("n_controls above 13 not supported")
    out: list[Instruction] = []
    _mcx_clean(out, list(range(n_controls)), n_controls, n_controls + 1)
    return Circuit(n_controls + 2, out)


# ---------------------------------------------------------------------------
# transpiler
# ---------------------------------------------------------------------------

def _expand(inst: Instruction, n_qubits: int) -> list[Instruction]:
    kind = inst.kind
    if kind in BASIS_KINDS:
        return [inst]
    q = inst.qubits[0]
    if kind == "h":
        return [Instruction("u2", (q,), (0.0, math.pi))]
    if kind == "x":
        return [Instruction("u3", (q,), (math.pi, 0.0, math.pi))]
    if kind == "z":
        return [Instruction("u1", (q,), (math.pi,))]
    out: list[Instruction] = []
    *controls, t = inst.qubits
    if inst.ancilla is None:
        _mcx_noancilla(out, controls, t)
    else:
        busy = set(inst.all_qubits)
        helpers = [w for w in range(n_qubits) if w not in busy]
        _mcx_clean(out, controls, t, inst.ancilla, helpers)
    return out


def transpile_to_basis(circuit: Circuit) -> Circuit:
    """Rewrite into {u1, u2, u3, cx, measure, reset}, fusing 1-qubit runs."""
    out = Circuit(circuit.n_qubits, num_clbits=circuit.num_clbits)
    pending: dict[int, np.ndarray] = {}

    def flush(q):
        u = pending.pop(q, None)
        if u is not None:
            inst = _single_qubit_instruction(u, q)
            if inst is not None:
                out.append(inst)

    for inst in circuit:
        for b in _expand(inst, circuit.n_qubits):
            if b.kind in ("u1", "u2", "u3"):
                (q,) = b.qubits
                m = gate_matrix(b.kind, b.params)
                pending[q] = m @ pending[q] if q in pending else m
            else:
                for q in b.qubits:
                    flush(q)
                out.append(b)
    for q in sorted(pending):
        flush(q)
    return out


def is_basis(circuit: Circuit) -> bool:
    return all(inst.kind in BASIS_KINDS for inst in circuit)


def circuit_metrics(circuit: Circuit) -> CircuitMetrics:
    frontier = [0] * circuit.n_qubits
    counts: dict[str, int] = {}
    for inst in circuit:
        if inst.kind not in BASIS_KINDS:
            raise ValidationError(f"circuit_metrics needs a basis circuit, found {inst.kind}")
        counts[inst.kind] = counts.get(inst.kind, 0) + 1
        level = max(frontier[q] for q in inst.qubits) + 1
        for q in inst.qubits:
            frontier[q] = level
    c1 = counts.get("u1", 0) + counts.get("u2", 0) + counts.get("u3", 0)
    c2 = counts.get("cx", 0)
    return CircuitMetrics(
        total_gates=c1 + c2,
        depth=max(frontier, default=0),
        count_1q=c1,
        count_2q=c2,
        count_measure=counts.get("measure", 0),
        count_reset=counts.get("reset", 0),
        counts_by_kind=counts,
    )


def instruction_matrix(inst: Instruction) -> np.ndarray:
    return gate_matrix(inst.kind, inst.params, num_qubits=len(inst.qubits))


def apply_circuit(circuit: Circuit, states: np.ndarray) -> np.ndarray:
    """Evolve a batch of state vectors (rows) through a measurement-free circuit.

    An MCT's ancilla is treated as an idle wire here.
    """
    from .qsim import MAX_VECTOR_QUBITS, apply_matrix_tensor

    n = circuit.n_qubits
    if n > MAX_VECTOR_QUBITS:
        raise CapacityError(f"apply_circuit supports at most {MAX_VECTOR_QUBITS} qubits, got {n}")
    states = np.array(states, dtype=complex, ndmin=2)
    if states.shape[1] != 2 ** n:
        raise ValidationError(f"states must have {2 ** n} amplitudes")
    for inst in circuit:
        if not inst.is_unitary:
            raise ValidationError(f"cannot apply {inst.kind} as a unitary")
        states = apply_matrix_tensor(states, instruction_matrix(inst), inst.qubits, n)
    return states


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary (little-endian) of a measurement-free circuit on <= 6 qubits."""
    n = circuit.n_qubits
    if n > MAX_UNITARY_QUBITS:
        raise CapacityError(f"circuit_unitary supports at most {MAX_UNITARY_QUBITS} qubits, got {n}")
    # columns of the identity evolve as a batch of state vectors
    return apply_circuit(circuit, np.eye(2 ** n, dtype=complex)).T.copy()


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius distance between ``a`` and ``b`` after optimal global phase."""
    inner = np.vdot(b, a)
    phase = inner / abs(inner) if abs(inner) > 1e-15 else 1.0
    return float(np.linalg.norm(a - phase * b))


# ---------------------------------------------------------------------------
# OpenQASM 2.0 subset
# ---------------------------------------------------------------------------

_QASM_NAMES = {"u1", "u2", "u3", "cx", "h", "x", "z"}


def to_qasm(circuit: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    if circuit.num_clbits:
        lines.append(f"creg c[{circuit.num_clbits}];")
    for inst in circuit:
        if inst.kind == "measure":
            lines.append(f"measure q[{inst.qubits[0]}] -> c[{inst.clbits[0]}];")
        elif inst.kind == "reset":
            lines.append(f"reset q[{inst.qubits[0]}];")
        elif inst.kind in _QASM_NAMES:
            head = inst.kind
            if inst.params:
                head += "(" + ",".join(f"{p:.6f}" for p in inst.params) + ")"
            lines.append(head + " " + ",".join(f"q[{q}]" for q in inst.qubits) + ";")
        else:
            raise ValidationError(f"{inst.kind} has no QASM form; transpile first")
    return "\n".join(lines) + "\n"


_REG_RE = re.compile(r"^(qreg|creg)\s+(\w+)\[(\d+)\];$")
_MEAS_RE = re.compile(r"^measure\s+\w+\[(\d+)\]\s*->\s*\w+\[(\d+)\];$")
_GATE_RE = re.compile(r"^(\w+)(?:\(([^)]*)\))?\s+(.+);$")


def from_qasm(text: str) -> Circuit:
    n_qubits = n_clbits = None
    insts: list[Instruction] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0].strip()
        if not line or line.startswith(("OPENQASM", "include", "barrier")):
            continue
        if m := _REG_RE.match(line):
            if m.group(1) == "qreg":
                n_qubits = int(m.group(3))
            else:
                n_clbits = int(m.group(3))
            continue
        if m := _MEAS_RE.match(line):
            insts.append(Instruction("measure", (int(m.group(1)),), clbits=(int(m.group(2)),)))
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise ValidationError(f"line {lineno}: cannot parse {raw!r}")
        name, params, args = m.groups()
        qubits = tuple(int(a) for a in re.findall(r"\[(\d+)\]", args))
        if name == "reset":
            insts.append(Instruction("reset", qubits))
        elif name in _QASM_NAMES:
            vals = tuple(float(p) for p in params.split(",")) if params else ()
            insts.append(Instruction(name, qubits, vals))
        else:
            raise ValidationError(f"line {lineno}: unsupported gate {name!r}")
    if n_qubits is None:
        raise ValidationError("missing qreg declaration")
    return Circuit(n_qubits, insts, n_clbits or 0)
