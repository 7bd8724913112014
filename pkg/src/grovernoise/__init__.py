"""Noisy Grover search: circuits, simulators, noise models and the lab harness."""
from .circuit import Circuit, Instruction, circuit_metrics, transpile_to_basis
from .errors import (
    CapacityError,
    FitError,
    GroverNoiseError,
    UnbracketedError,
    ValidationError,
)
from .grover import GroverConfig, build_circuit, config_for
from .noise import NoiseModel, NoiseRule

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "Circuit",
    "FitError",
    "GroverConfig",
    "GroverNoiseError",
    "Instruction",
    "NoiseModel",
    "NoiseRule",
    "UnbracketedError",
    "ValidationError",
    "build_circuit",
    "circuit_metrics",
    "config_for",
    "transpile_to_basis",
]
