"""Kraus channels and instruction-scoped noise models."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import BASIS_KINDS, Circuit, Instruction, instruction_matrix
from .errors import ValidationError
from .qsim import CHANNEL_ATOL, Op, kraus_completeness_error

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}

FAMILIES = (
    "bit_flip",
    "phase_flip",
    "bitphase_flip",
    "depolarizing",
    "amplitude_damping",
    "phase_damping",
    "thermal_relaxation",
)
SHORT_NAMES = {
    "bf": "bit_flip",
    "pf": "phase_flip",
    "bpf": "bitphase_flip",
    "dep": "depolarizing",
    "ad": "amplitude_damping",
    "pd": "phase_damping",
    "thermal": "thermal_relaxation",
}
GATE_ERROR_FAMILIES = FAMILIES[:-1]
GATE_SCOPES = frozenset({"1q", "2q", "measure", "reset"})


@dataclass(frozen=True)
class KrausChannel:
    label: str
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=complex) for e in self.operators)
        object.__setattr__(self, "operators", ops)
        if not ops:
            raise ValidationError("channel needs at least one operator")
        dim = ops[0].shape[0]
        if dim not in (2, 4) or any(e.shape != (dim, dim) for e in ops):
            raise ValidationError("operators must all be 2x2 or all 4x4")
        err = kraus_completeness_error(ops)
        if err > 1e-10:
            raise ValidationError(f"Kraus completeness violated by {err:.3g}")

    @property
    def arity(self) -> int:
        return 1 if self.operators[0].shape[0] == 2 else 2

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Channel output for a density matrix on exactly ``arity`` qubits."""
        return sum(e @ rho @ e.conj().T for e in self.operators)

    def completeness_error(self) -> float:
        return kraus_completeness_error(self.operators)

    def is_identity(self) -> bool:
        s = sum(np.kron(e, e.conj()) for e in self.operators)
        return bool(np.allclose(s, np.eye(s.shape[0]), atol=CHANNEL_ATOL, rtol=0))


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValidationError(f"probability {p} outside [0, 1]")
    return p


def pauli_flip_channel(sigma: str, p: float) -> KrausChannel:
    p = _check_probability(p)
    sigma = sigma.upper()
    label = {"X": "bit_flip", "Z": "phase_flip", "Y": "bitphase_flip"}.get(sigma)
    if label is None:
        raise ValidationError(f"sigma must be X, Y or Z, got {sigma!r}")
    return KrausChannel(label, (math.sqrt(1 - p) * _I, math.sqrt(p) * PAULIS[sigma]))


def depolarizing_channel(p: float, n: int = 1) -> KrausChannel:
    """``rho -> (1-p) rho + p I/2^n`` as a weighted Pauli mixture."""
    p = _check_probability(p)
    if n not in (1, 2):
        raise ValidationError("depolarizing channel supports n = 1 or 2")
    d2 = 4 ** n
    ops = []
    for labels in itertools.product("IXYZ", repeat=n):
        mat = np.array([[1.0 + 0j]])
        for lab in labels:
            mat = np.kron(mat, PAULIS[lab])
        weight = 1 - p + p / d2 if set(labels) == {"I"} else p / d2
        ops.append(math.sqrt(weight) * mat)
    return KrausChannel("depolarizing", tuple(ops))


def amplitude_damping_channel(p: float) -> KrausChannel:
    p = _check_probability(p)
    e0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    e1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel("amplitude_damping", (e0, e1))


def phase_damping_channel(p: float) -> KrausChannel:
    p = _check_probability(p)
    e0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    e1 = np.array([[0, 0], [0, math.sqrt(p)]], dtype=complex)
    return KrausChannel("phase_damping", (e0, e1))


@dataclass(frozen=True)
class ThermalParams:
    T1: float  # microseconds
    T2: float  # microseconds
    gate_time: float  # nanoseconds

    def __post_init__(self):
        if not self.T1 > 0 or not self.T2 > 0:
            raise ValidationError("T1 and T2 must be positive")
        if self.T2 > 2 * self.T1 * (1 + 1e-12):
            raise ValidationError(f"T2={self.T2} exceeds 2*T1={2 * self.T1}")
        if self.gate_time < 0:
            raise ValidationError("gate time must be non-negative")

    @property
    def eps_t1(self) -> float:
        return math.exp(-self.gate_time * 1e-3 / self.T1)

    @property
    def eps_t2(self) -> float:
        return math.exp(-self.gate_time * 1e-3 / self.T2)


def thermal_relaxation_channel(params: ThermalParams) -> KrausChannel:
    """Amplitude damping with ``1 - e^{-tg/T1}`` followed by pure dephasing.

    Populations decay as ``e^{-tg/T1}`` and coherences as ``e^{-tg/T2}``.
    """
    tg = params.gate_time * 1e-3
    gamma = 1.0 - params.eps_t1
    inv_tphi = 1.0 / params.T2 - 1.0 / (2.0 * params.T1)
    inv_tphi = max(inv_tphi, 0.0)
    p_phi = (1.0 - math.exp(-tg * inv_tphi)) / 2.0
    ad = amplitude_damping_channel(gamma).operators
    ops = [math.sqrt(1 - p_phi) * e for e in ad]
    if p_phi > 0:
        ops += [math.sqrt(p_phi) * (_Z @ e) for e in ad]
    return KrausChannel("thermal_relaxation", tuple(ops))


def channel_for(family: str, p: float) -> KrausChannel:
    """Single-qubit channel of a gate-error family at parameter ``p``."""
    family = SHORT_NAMES.get(family, family)
    if family == "bit_flip":
        return pauli_flip_channel("X", p)
    if family == "phase_flip":
        return pauli_flip_channel("Z", p)
    if family == "bitphase_flip":
        return pauli_flip_channel("Y", p)
    if family == "depolarizing":
        return depolarizing_channel(p, 1)
    if family == "amplitude_damping":
        return amplitude_damping_channel(p)
    if family == "phase_damping":
        return phase_damping_channel(p)
    raise ValidationError(f"{family!r} is not a gate-error family")


@dataclass(frozen=True)
class NoiseRule:
    family: str
    param: float | None = None
    T1: float | None = None
    T2: float | None = None
    gate_scope: frozenset = frozenset({"1q", "2q"})
    qubit_scope: frozenset | None = None  # None means every qubit

    def __post_init__(self):
        family = SHORT_NAMES.get(self.family, self.family)
        if family not in FAMILIES:
            raise ValidationError(f"unknown noise family {self.family!r}")
        object.__setattr__(self, "family", family)
        scope = frozenset(self.gate_scope)
        if not scope or not scope <= GATE_SCOPES:
            raise ValidationError(f"gate_scope must be a nonempty subset of {sorted(GATE_SCOPES)}")
        object.__setattr__(self, "gate_scope", scope)
        if self.qubit_scope is not None:
            qs = frozenset(int(q) for q in self.qubit_scope)
            if not qs:
                raise ValidationError("qubit_scope must be nonempty")
            object.__setattr__(self, "qubit_scope", qs)
        if family == "thermal_relaxation":
            if self.T1 is None or self.T2 is None:
                raise ValidationError("thermal rule needs T1 and T2")
            ThermalParams(self.T1, self.T2, 0.0)
        else:
            if self.param is None:
                raise ValidationError(f"{family} rule needs a probability")
            _check_probability(self.param)
            if scope & {"measure", "reset"}:
                raise ValidationError("gate-error rules apply to unitary gates only")

    @classmethod
    def thermal(cls, T1: float, T2: float, qubit_scope=None) -> "NoiseRule":
        return cls("thermal_relaxation", T1=T1, T2=T2, gate_scope=GATE_SCOPES, qubit_scope=qubit_scope)

    @property
    def is_thermal(self) -> bool:
        return self.family == "thermal_relaxation"

    def matches(self, inst: Instruction) -> bool:
        if inst.kind in ("measure", "reset"):
            return inst.kind in self.gate_scope
        return ("2q" if len(inst.qubits) == 2 else "1q") in self.gate_scope

    def in_scope(self, q: int) -> bool:
        return self.qubit_scope is None or q in self.qubit_scope

    def channel(self, inst: Instruction) -> KrausChannel | None:
        if self.is_thermal:
            if inst.duration <= 0:
                return None
            return _thermal_cached(self.T1, self.T2, inst.duration)
        return _gate_channel_cached(self.family, self.param)

    def to_dict(self) -> dict:
        d = {"family": self.family, "gate_scope": sorted(self.gate_scope)}
        if self.is_thermal:
            d.update(T1=self.T1, T2=self.T2)
        else:
            d["param"] = self.param
        d["qubit_scope"] = None if self.qubit_scope is None else sorted(self.qubit_scope)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseRule":
        family = SHORT_NAMES.get(d["family"], d["family"])
        default = GATE_SCOPES if family == "thermal_relaxation" else {"1q", "2q"}
        return cls(
            family,
            param=d.get("param"),
            T1=d.get("T1"),
            T2=d.get("T2"),
            gate_scope=frozenset(d.get("gate_scope", default)),
            qubit_scope=None if d.get("qubit_scope") is None else frozenset(d["qubit_scope"]),
        )


@lru_cache(maxsize=4096)
def _thermal_cached(T1, T2, duration) -> KrausChannel:
    return thermal_relaxation_channel(ThermalParams(T1, T2, duration))


@lru_cache(maxsize=4096)
def _gate_channel_cached(family, p) -> KrausChannel:
    return channel_for(family, p)


@dataclass(frozen=True)
class NoiseModel:
    rules: tuple[NoiseRule, ...] = ()

    def __post_init__(self):
        rules = tuple(self.rules)
        object.__setattr__(self, "rules", rules)
        if sum(r.is_thermal for r in rules) > 1:
            raise ValidationError("at most one thermal rule per model")

    @classmethod
    def single(cls, family: str, param: float | None = None, *, gate_scope=None,
               qubit_scope=None, T1=None, T2=None) -> "NoiseModel":
        family = SHORT_NAMES.get(family, family)
        if family == "thermal_relaxation":
            scope = GATE_SCOPES if gate_scope is None else gate_scope
            return cls((NoiseRule(family, T1=T1, T2=T2, gate_scope=scope, qubit_scope=qubit_scope),))
        scope = {"1q", "2q"} if gate_scope is None else gate_scope
        return cls((NoiseRule(family, param, gate_scope=frozenset(scope), qubit_scope=qubit_scope),))

    def to_dict(self) -> dict:
        return {"rules": [r.to_dict() for r in self.rules]}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        return cls(tuple(NoiseRule.from_dict(r) for r in d.get("rules", [])))


@dataclass(frozen=True)
class ChannelInsertion:
    channel: KrausChannel
    qubit: int
    rule_index: int


@dataclass(frozen=True)
class NoisyProgram:
    n_qubits: int
    num_clbits: int
    items: tuple  # Instruction | ChannelInsertion, in execution order

    @property
    def insertions(self) -> list[ChannelInsertion]:
        return [it for it in self.items if isinstance(it, ChannelInsertion)]

    def ops(self) -> list[Op]:
        out = []
        for it in self.items:
            if isinstance(it, ChannelInsertion):
                out.append(Op("kraus", (it.qubit,), it.channel.operators))
            else:
                out.append(_instruction_op(it))
        return out


def _instruction_op(inst: Instruction) -> Op:
    if inst.kind == "measure":
        return Op("measure", inst.qubits, clbit=inst.clbits[0])
    if inst.kind == "reset":
        return Op("reset", inst.qubits)
    return Op("unitary", inst.qubits, (instruction_matrix(inst),))


def attach_noise(circuit: Circuit, model: NoiseModel | None) -> NoisyProgram:
    """Insert each matching rule's 1-qubit channel on every in-scope qubit.

    Channels follow their instruction, except on measurements where they
    precede it so the decoherence during readout reaches the recorded bit.
    """
    items: list = []
    rules = () if model is None else model.rules
    for inst in circuit:
        if inst.kind not in BASIS_KINDS:
            raise ValidationError(f"attach_noise needs a basis circuit, found {inst.kind}")
        inserts = []
        for k, rule in enumerate(rules):
            if not rule.matches(inst):
                continue
            channel = rule.channel(inst)
            if channel is None:
                continue
            inserts.extend(ChannelInsertion(channel, q, k) for q in inst.qubits if rule.in_scope(q))
        if inst.kind == "measure":
            items.extend(inserts)
            items.append(inst)
        else:
            items.append(inst)
            items.extend(inserts)
    return NoisyProgram(circuit.n_qubits, circuit.num_clbits, tuple(items))


def compile_program(circuit: Circuit, model: NoiseModel | None = None) -> list[Op]:
    return attach_noise(circuit, model).ops()


def scoped_models(family: str, param: float, scope: str, n_qubits: int,
                  noisy_qubit: int = 0) -> NoiseModel:
    """Models used by scoping studies: ``all``, ``1q``, ``2q`` or ``single``."""
    if scope == "all":
        return NoiseModel.single(family, param)
    if scope in ("1q", "2q"):
        return NoiseModel.single(family, param, gate_scope={scope})
    if scope == "single":
        return NoiseModel.single(family, param, qubit_scope={noisy_qubit})
    raise ValidationError(f"unknown noise scope {scope!r}")
