"""State-vector and density-matrix simulation.

Two representations share one little-endian convention (qubit 0 is the least
significant bit of a basis index). The public functions below are functional:
they return a new :class:`QuantumState`. The program runners at the bottom
mutate private buffers in place and are what the experiment harness uses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .errors import CapacityError, ValidationError

MAX_VECTOR_QUBITS = 14
MAX_DENSITY_QUBITS = 10

CHANNEL_ATOL = 1e-12
STATE_ATOL = 1e-10
DIST_ATOL = 1e-9


class RandomStream:
    """Reproducible random source keyed by ``(seed, stream_index)``."""

    def __init__(self, seed: int, stream_index: int = 0):
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_index])
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def random(self, size=None):
        return self.generator.random(size)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_index={self.stream_index})"


@dataclass
class QuantumState:
    n_qubits: int
    data: np.ndarray
    kind: str  # "vector" or "density"

    @property
    def is_density(self) -> bool:
        return self.kind == "density"

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.data.copy(), self.kind)

    def check(self, atol: float = STATE_ATOL) -> None:
        """Raise if the normalization/Hermiticity/positivity invariants fail."""
        if self.kind == "vector":
            norm = np.linalg.norm(self.data)
            if abs(norm - 1) > atol:
                raise ValidationError(f"state vector norm {norm} != 1")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > atol:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1) > atol:
            raise ValidationError(f"density matrix trace {tr} != 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValidationError("density matrix is not positive semidefinite")


@dataclass(frozen=True)
class MeasurementRecord:
    qubit_indices: tuple[int, ...]
    outcome_bits: tuple[int, ...]
    probability: float

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for b in self.outcome_bits)


def init_state(n: int, backend: str = "density") -> QuantumState:
    if backend not in ("vector", "density"):
        raise ValidationError(f"unknown backend {backend!r}")
    limit = MAX_DENSITY_QUBITS if backend == "density" else MAX_VECTOR_QUBITS
    if not 1 <= n <= limit:
        raise CapacityError(f"{backend} backend supports 1..{limit} qubits, got {n}")
    dim = 2 ** n
    if backend == "vector":
        data = np.zeros(dim, dtype=complex)
        data[0] = 1
    else:
        data = np.zeros((dim, dim), dtype=complex)
        data[0, 0] = 1
    return QuantumState(n, data, backend)


# ---------------------------------------------------------------------------
# tensor helpers
# ---------------------------------------------------------------------------

def _check_qubits(qubits: Sequence[int], n: int) -> tuple[int, ...]:
    qubits = tuple(int(q) for q in qubits)
    if len(set(qubits)) != len(qubits):
        raise ValidationError(f"repeated qubit index in {qubits}")
    for q in qubits:
        if not 0 <= q < n:
            raise ValidationError(f"qubit {q} out of range for {n} qubits")
    return qubits


def apply_matrix_tensor(states: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a ``k``-qubit matrix to state vectors of shape ``(..., 2**n)``."""
    k = len(qubits)
    lead = states.shape[:-1]
    psi = states.reshape((-1,) + (2,) * n)
    # tensor axis of qubit q is 1 + (n - 1 - q); matrix axes run high qubit first
    targets = [1 + n - 1 - q for q in reversed(qubits)]
    u = np.asarray(matrix).reshape((2,) * (2 * k))
    out = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), targets))
    out = np.moveaxis(out, list(range(k)), targets)
    return out.reshape(lead + (2 ** n,))


def _left_multiply(rho: np.ndarray, matrix: np.ndarray, qubits, n: int) -> np.ndarray:
    # columns of rho are vectors; M rho == (M applied to each column)
    return apply_matrix_tensor(rho.T, matrix, qubits, n).T


def _sandwich(rho: np.ndarray, matrix: np.ndarray, qubits, n: int) -> np.ndarray:
    left = _left_multiply(rho, matrix, qubits, n)
    return _left_multiply(left.conj().T, matrix, qubits, n).conj().T


def is_unitary(matrix: np.ndarray, atol: float = STATE_ATOL) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol, rtol=0)


def kraus_completeness_error(operators: Sequence[np.ndarray]) -> float:
    dim = operators[0].shape[0]
    total = sum(e.conj().T @ e for e in operators)
    return float(np.max(np.abs(total - np.eye(dim))))


# ---------------------------------------------------------------------------
# public state operations
# ---------------------------------------------------------------------------

def apply_unitary(state: QuantumState, matrix: np.ndarray, qubits: Sequence[int]) -> QuantumState:
    qubits = _check_qubits(qubits, state.n_qubits)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (2 ** len(qubits),) * 2:
        raise ValidationError(f"matrix shape {matrix.shape} does not fit {len(qubits)} qubits")
    if not is_unitary(matrix):
        raise ValidationError("matrix is not unitary")
    n = state.n_qubits
    if state.is_density:
        return QuantumState(n, _sandwich(state.data, matrix, qubits, n), "density")
    return QuantumState(n, apply_matrix_tensor(state.data, matrix, qubits, n), "vector")


def _operators_of(channel) -> list[np.ndarray]:
    ops = getattr(channel, "operators", channel)
    return [np.asarray(e, dtype=complex) for e in ops]


def apply_kraus(state: QuantumState, channel, qubits: Sequence[int],
                rng: RandomStream | None = None) -> QuantumState:
    """Apply a Kraus channel; on the vector backend one branch is sampled."""
    qubits = _check_qubits(qubits, state.n_qubits)
    ops = _operators_of(channel)
    if ops[0].shape != (2 ** len(qubits),) * 2:
        raise ValidationError("channel arity does not match qubit count")
    err = kraus_completeness_error(ops)
    if err > STATE_ATOL:
        raise ValidationError(f"Kraus completeness violated by {err:.3g}")
    n = state.n_qubits
    if state.is_density:
        rho = sum(_sandwich(state.data, e, qubits, n) for e in ops)
        return QuantumState(n, rho, "density")
    if rng is None:
        raise ValidationError("vector backend needs a RandomStream to sample a Kraus branch")
    branches = [apply_matrix_tensor(state.data, e, qubits, n) for e in ops]
    weights = np.array([np.vdot(b, b).real for b in branches])
    i = _pick(np.cumsum(weights), rng.random())
    return QuantumState(n, branches[i] / np.sqrt(weights[i]), "vector")


def _pick(cumulative: np.ndarray, u: float) -> int:
    """Cumulative inversion; the lowest index wins ties."""
    i = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    i = min(i, len(cumulative) - 1)
    # skip zero-weight branches that share the same cumulative value
    while i > 0 and cumulative[i - 1] >= cumulative[i]:
        i -= 1
    return i


def probabilities(state: QuantumState) -> np.ndarray:
    if state.is_density:
        p = np.real(np.diag(state.data)).copy()
    else:
        p = np.abs(state.data) ** 2
    p[p < 0] = 0.0
    return p


def _marginal(p: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    idx = np.arange(p.size)
    key = np.zeros(p.size, dtype=np.int64)
    for pos, q in enumerate(qubits):
        key |= ((idx >> q) & 1) << pos
    return np.bincount(key, weights=p, minlength=2 ** len(qubits))


def _projector_mask(dim: int, qubits, bits) -> np.ndarray:
    idx = np.arange(dim)
    mask = np.ones(dim, dtype=bool)
    for q, b in zip(qubits, bits):
        mask &= ((idx >> q) & 1) == b
    return mask


def measure(state: QuantumState, qubits: Sequence[int], rng: RandomStream):
    """Projective Z measurement. Returns ``(record, post_measurement_state)``."""
    qubits = _check_qubits(qubits, state.n_qubits)
    marg = _marginal(probabilities(state), qubits)
    k = _pick(np.cumsum(marg), rng.random())
    bits = tuple((k >> pos) & 1 for pos in range(len(qubits)))
    prob = float(marg[k])
    mask = _projector_mask(2 ** state.n_qubits, qubits, bits)
    if state.is_density:
        rho = state.data * np.outer(mask, mask)
        data = rho / np.trace(rho).real
    else:
        psi = np.where(mask, state.data, 0)
        data = psi / np.linalg.norm(psi)
    return MeasurementRecord(qubits, bits, prob), QuantumState(state.n_qubits, data, state.kind)


RESET_KRAUS = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 1], [0, 0]], dtype=complex),
)

_X = np.array([[0, 1], [1, 0]], dtype=complex)


def reset_qubits(state: QuantumState, qubits: Sequence[int], rng: RandomStream | None = None) -> QuantumState:
    qubits = _check_qubits(qubits, state.n_qubits)
    if state.is_density:
        for q in qubits:
            state = apply_kraus(state, RESET_KRAUS, (q,))
        return state
    if rng is None:
        raise ValidationError("vector backend reset needs a RandomStream")
    for q in qubits:
        record, state = measure(state, (q,), rng)
        if record.outcome_bits[0]:
            state = apply_unitary(state, _X, (q,))
    return state


def partial_trace(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced density matrix on ``keep`` (little-endian within ``keep``)."""
    keep = list(keep)
    t = rho.reshape((2,) * (2 * n))
    drop = [q for q in range(n) if q not in keep]
    row = lambda q: n - 1 - q  # noqa: E731
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = [letters[i] for i in range(n)]
    cols = [letters[n + i] for i in range(n)]
    for q in drop:
        cols[row(q)] = rows[row(q)]
    kept = sorted(keep, reverse=True)
    out = "".join(rows[row(q)] for q in kept) + "".join(cols[row(q)] for q in kept)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = 2 ** len(keep)
    return red.reshape(d, d)


# ---------------------------------------------------------------------------
# compiled programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Op:
    """One step of a compiled program.

    ``kind`` is ``unitary`` (``matrices == (U,)``), ``kraus`` (the operator
    list), ``measure`` (writes ``clbit``) or ``reset``.
    """

    kind: str
    qubits: tuple[int, ...]
    matrices: tuple = ()
    clbit: int | None = None


def superop(operators: Sequence[np.ndarray]) -> np.ndarray:
    """Row-major superoperator: vec index ``2*r + c`` for a 1-qubit entry."""
    return sum(np.kron(e, e.conj()) for e in operators)


_CX_MATRIX = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
_RESET_SUPEROP = np.ascontiguousarray(superop(RESET_KRAUS))


@njit(cache=True, nogil=True, fastmath=True)
def _dm_superop_1q(rho, s, q):
    dim = rho.shape[0]
    m = 1 << q
    s00, s01, s02, s03 = s[0, 0], s[0, 1], s[0, 2], s[0, 3]
    s10, s11, s12, s13 = s[1, 0], s[1, 1], s[1, 2], s[1, 3]
    s20, s21, s22, s23 = s[2, 0], s[2, 1], s[2, 2], s[2, 3]
    s30, s31, s32, s33 = s[3, 0], s[3, 1], s[3, 2], s[3, 3]
    # contiguous inner ranges let the compiler vectorize
    for ib in range(0, dim, 2 * m):
        for i in range(ib, ib + m):
            r0 = rho[i]
            r1 = rho[i + m]
            for jb in range(0, dim, 2 * m):
                for j in range(jb, jb + m):
                    x0 = r0[j]
                    x1 = r0[j + m]
                    x2 = r1[j]
                    x3 = r1[j + m]
                    r0[j] = s00 * x0 + s01 * x1 + s02 * x2 + s03 * x3
                    r0[j + m] = s10 * x0 + s11 * x1 + s12 * x2 + s13 * x3
                    r1[j] = s20 * x0 + s21 * x1 + s22 * x2 + s23 * x3
                    r1[j + m] = s30 * x0 + s31 * x1 + s32 * x2 + s33 * x3


@njit(cache=True, nogil=True)
def _dm_cx(rho, c, t):
    dim = rho.shape[0]
    cm = 1 << c
    tm = 1 << t
    for i in range(dim):
        if (i & cm) and not (i & tm):
            i1 = i | tm
            for j in range(dim):
                tmp = rho[i, j]
                rho[i, j] = rho[i1, j]
                rho[i1, j] = tmp
    for i in range(dim):
        row = rho[i]
        for j in range(dim):
            if (j & cm) and not (j & tm):
                j1 = j | tm
                tmp = row[j]
                row[j] = row[j1]
                row[j1] = tmp


def _touch_map(ops: Sequence[Op]) -> list[bool]:
    """For each op, True when it is a measurement no later op disturbs."""
    seen: set[int] = set()
    terminal = [False] * len(ops)
    for k in range(len(ops) - 1, -1, -1):
        op = ops[k]
        if op.kind == "measure" and op.qubits[0] not in seen:
            terminal[k] = True
        seen.update(op.qubits)
    return terminal


def _clbits_to_index(assign: dict[int, int]) -> int:
    return sum(bit << c for c, bit in assign.items())


_SUPEROP_CACHE: dict[bytes, np.ndarray] = {}
_SUPEROP_CACHE_LIMIT = 65536
_NO_MATRIX = np.zeros((4, 4), dtype=complex)


def _cached_superop(matrices: Sequence[np.ndarray]) -> np.ndarray:
    key = b"".join(np.ascontiguousarray(m).tobytes() for m in matrices)
    s = _SUPEROP_CACHE.get(key)
    if s is None:
        s = np.ascontiguousarray(superop(matrices), dtype=complex)
        if len(_SUPEROP_CACHE) < _SUPEROP_CACHE_LIMIT:
            _SUPEROP_CACHE[key] = s
    return s


@njit(cache=True, nogil=True)
def _flush_wire(rho, pending, has, w):
    if has[w]:
        _dm_superop_1q(rho, pending[w], w)
        has[w] = False


@njit(cache=True, nogil=True)
def _run_tape(rho, codes, qa, qb, mats, n):
    """Apply a tape of fused 1-qubit superoperators (code 0) and CX (code 1)."""
    pending = np.zeros((n, 4, 4), dtype=np.complex128)
    has = np.zeros(n, dtype=np.bool_)
    tmp = np.zeros((4, 4), dtype=np.complex128)
    for k in range(codes.shape[0]):
        q = qa[k]
        if codes[k] == 0:
            if has[q]:
                for r in range(4):
                    for c in range(4):
                        acc = 0j
                        for m in range(4):
                            acc += mats[k, r, m] * pending[q, m, c]
                        tmp[r, c] = acc
                pending[q] = tmp
            else:
                pending[q] = mats[k]
                has[q] = True
        else:
            t = qb[k]
            _flush_wire(rho, pending, has, q)
            _flush_wire(rho, pending, has, t)
            _dm_cx(rho, q, t)
    for w in range(n):
        _flush_wire(rho, pending, has, w)


def _tape_entry(op: Op):
    """``(code, qa, qb, superop)`` for tape-able ops, else None."""
    if op.kind == "reset":
        return 0, op.qubits[0], 0, _RESET_SUPEROP
    if op.kind == "kraus" and len(op.qubits) == 1:
        return 0, op.qubits[0], 0, _cached_superop(op.matrices)
    if op.kind == "unitary":
        if len(op.qubits) == 1:
            return 0, op.qubits[0], 0, _cached_superop(op.matrices)
        if len(op.qubits) == 2 and np.array_equal(op.matrices[0], _CX_MATRIX):
            return 1, op.qubits[0], op.qubits[1], _NO_MATRIX
    return None


def run_density(ops: Sequence[Op], n_qubits: int, num_clbits: int) -> np.ndarray:
    """Exact outcome distribution over the classical register.

    Runs of 1-qubit ops and CX gates execute as one compiled tape, with
    consecutive 1-qubit ops on a wire fused into one superoperator.
    Mid-circuit measurements split the state into classical branches;
    measurements nothing touches afterwards are read off the final diagonal.
    """
    if n_qubits > MAX_DENSITY_QUBITS:
        raise CapacityError(f"density backend supports at most {MAX_DENSITY_QUBITS} qubits")
    dim = 2 ** n_qubits
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1
    branches: list[tuple[dict[int, int], np.ndarray]] = [({}, rho0)]
    deferred: dict[int, int] = {}
    terminal = _touch_map(ops)
    tape: list[tuple] = []

    def run_tape():
        if not tape:
            return
        codes = np.array([t[0] for t in tape], dtype=np.int8)
        qa = np.array([t[1] for t in tape], dtype=np.int64)
        qb = np.array([t[2] for t in tape], dtype=np.int64)
        mats = np.array([t[3] for t in tape], dtype=complex)
        for _, rho in branches:
            _run_tape(rho, codes, qa, qb, mats, n_qubits)
        tape.clear()

    idx = np.arange(dim)
    for k, op in enumerate(ops):
        if op.kind == "measure" and terminal[k]:
            deferred[op.qubits[0]] = op.clbit
            continue
        entry = _tape_entry(op)
        if entry is not None:
            tape.append(entry)
            continue
        run_tape()
        if op.kind == "unitary":
            branches = [(cl, _sandwich(rho, op.matrices[0], op.qubits, n_qubits)) for cl, rho in branches]
        elif op.kind == "kraus":
            branches = [(cl, sum(_sandwich(rho, e, op.qubits, n_qubits) for e in op.matrices))
                        for cl, rho in branches]
        elif op.kind == "measure":
            (q,) = op.qubits
            split = []
            for cl, rho in branches:
                for bit in (0, 1):
                    mask = ((idx >> q) & 1) == bit
                    part = rho * np.outer(mask, mask)
                    if np.trace(part).real > 1e-15:
                        split.append(({**cl, op.clbit: bit}, part))
            branches = split
        else:
            raise ValidationError(f"unsupported op {op.kind}")
    run_tape()

    out = np.zeros(2 ** num_clbits)
    key = np.zeros(dim, dtype=np.int64)
    for q, c in deferred.items():
        key |= ((idx >> q) & 1) << c
    for cl, rho in branches:
        diag = np.clip(np.real(np.diag(rho)), 0, None)
        out += np.bincount(key + _clbits_to_index(cl), weights=diag, minlength=out.size)
    return out / out.sum()


def trajectory_chunk_size(n_qubits: int, shots: int) -> int:
    return int(max(16, min(shots, 2 ** 21 // 2 ** n_qubits, 4096)))


def run_trajectories(ops: Sequence[Op], n_qubits: int, num_clbits: int, shots: int,
                     seed: int) -> np.ndarray:
    """Monte Carlo counts over the classical register.

    Trajectories are processed in fixed-size chunks; chunk ``i`` draws from
    ``RandomStream(seed, i)`` so results do not depend on scheduling.
    """
    if n_qubits > MAX_VECTOR_QUBITS:
        raise CapacityError(f"vector backend supports at most {MAX_VECTOR_QUBITS} qubits")
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    chunk = trajectory_chunk_size(n_qubits, shots)
    counts = np.zeros(2 ** num_clbits, dtype=np.int64)
    for index, start in enumerate(range(0, shots, chunk)):
        size = min(chunk, shots - start)
        keys = _run_chunk(ops, n_qubits, size, RandomStream(seed, index))
        counts += np.bincount(keys, minlength=counts.size)
    return counts


def _run_chunk(ops, n, batch, rng: RandomStream) -> np.ndarray:
    dim = 2 ** n
    psi = np.zeros((batch, dim), dtype=complex)
    psi[:, 0] = 1
    clbits = np.zeros(batch, dtype=np.int64)
    idx = np.arange(dim)
    rows = np.arange(batch)
    for op in ops:
        if op.kind == "unitary":
            psi = apply_matrix_tensor(psi, op.matrices[0], op.qubits, n)
        elif op.kind == "kraus":
            psi = _sample_kraus(psi, op.matrices, op.qubits, n, rng, rows)
        elif op.kind in ("measure", "reset"):
            (q,) = op.qubits
            ones = ((idx >> q) & 1).astype(bool)
            p1 = np.sum(np.abs(psi[:, ones]) ** 2, axis=1)
            norm = np.sum(np.abs(psi) ** 2, axis=1)
            outcome = rng.random(batch) * norm < p1
            keep = np.where(outcome[:, None], ones[None, :], ~ones[None, :])
            psi = np.where(keep, psi, 0)
            psi /= np.linalg.norm(psi, axis=1, keepdims=True)
            if op.kind == "measure":
                clbits |= outcome.astype(np.int64) << op.clbit
            else:
                flipped = apply_matrix_tensor(psi, _X, (q,), n)
                psi = np.where(outcome[:, None], flipped, psi)
        else:
            raise ValidationError(f"unsupported op {op.kind}")
    return clbits


def _sample_kraus(psi, operators, qubits, n, rng: RandomStream, rows):
    branches = [apply_matrix_tensor(psi, e, qubits, n) for e in operators]
    weights = np.stack([np.sum(np.abs(b) ** 2, axis=1) for b in branches], axis=1)
    cum = np.cumsum(weights, axis=1)
    u = rng.random(psi.shape[0]) * cum[:, -1]
    choice = np.sum(cum <= u[:, None], axis=1)
    choice = np.minimum(choice, len(operators) - 1)
    stacked = np.stack(branches, axis=1)
    chosen = stacked[rows, choice]
    return chosen / np.sqrt(weights[rows, choice])[:, None]


def run_pure(ops: Sequence[Op], n_qubits: int, num_clbits: int) -> np.ndarray:
    """Exact distribution of a program without Kraus ops, by branching pure states."""
    if n_qubits > MAX_VECTOR_QUBITS:
        raise CapacityError(f"vector backend supports at most {MAX_VECTOR_QUBITS} qubits")
    dim = 2 ** n_qubits
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1
    # each branch is an unnormalized pure component of the mixture
    branches: list[tuple[dict[int, int], np.ndarray]] = [({}, psi0)]
    deferred: dict[int, int] = {}
    terminal = _touch_map(ops)
    idx = np.arange(dim)
    for k, op in enumerate(ops):
        if op.kind == "unitary":
            branches = [(cl, apply_matrix_tensor(v, op.matrices[0], op.qubits, n_qubits)) for cl, v in branches]
        elif op.kind == "measure" and terminal[k]:
            deferred[op.qubits[0]] = op.clbit
        elif op.kind in ("measure", "reset"):
            (q,) = op.qubits
            ones = ((idx >> q) & 1).astype(bool)
            split = []
            for cl, v in branches:
                for bit in (0, 1):
                    part = np.where(ones == bool(bit), v, 0)
                    if np.vdot(part, part).real <= 1e-15:
                        continue
                    if op.kind == "measure":
                        split.append(({**cl, op.clbit: bit}, part))
                    else:
                        split.append((cl, apply_matrix_tensor(part, _X, (q,), n_qubits) if bit else part))
            branches = split
        else:
            raise ValidationError(f"run_pure cannot handle {op.kind}")
    out = np.zeros(2 ** num_clbits)
    key = np.zeros(dim, dtype=np.int64)
    for q, c in deferred.items():
        key |= ((idx >> q) & 1) << c
    for cl, v in branches:
        out += np.bincount(key + _clbits_to_index(cl), weights=np.abs(v) ** 2, minlength=out.size)
    return out / out.sum()
