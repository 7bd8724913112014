"""Lab config files (JSON or YAML) mirroring GroverConfig and NoiseModel.

Example::

    grover: {algorithm: sga, n_qubits: 4}      # or explicit GroverConfig fields
    noise:
      rules:
        - {family: dep, param: 0.01}
    run: {shots: 20000, seed: 7, backend: auto}
    thresholds:
      - {algo: sga, qubits: [4, 6], errors: [dep, ad], grid: "1e-4:1e-1:7"}
    relaxation:
      - {algo: sga, qubits: 4, t1_grid: "10:1000:9", t2_grid: "10:1000:9"}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ValidationError
from ..grover import GroverConfig
from ..noise import NoiseModel
from .experiment import BACKENDS, DEFAULT_SHOTS


@dataclass(frozen=True)
class RunSettings:
    shots: int = DEFAULT_SHOTS
    seed: int = 0
    backend: str = "auto"

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError("shots must be >= 1")
        if self.backend not in BACKENDS:
            raise ValidationError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class LabConfig:
    grover: GroverConfig | None = None
    noise: NoiseModel | None = None
    run: RunSettings = RunSettings()
    thresholds: tuple[dict, ...] = ()
    relaxation: tuple[dict, ...] = ()
    raw: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        d: dict = {}
        if self.grover is not None:
            d["grover"] = self.grover.to_dict()
        if self.noise is not None:
            d["noise"] = self.noise.to_dict()
        d["run"] = {"shots": self.run.shots, "seed": self.run.seed, "backend": self.run.backend}
        if self.thresholds:
            d["thresholds"] = [dict(t) for t in self.thresholds]
        if self.relaxation:
            d["relaxation"] = [dict(r) for r in self.relaxation]
        return d


def parse_config(data: dict) -> LabConfig:
    if not isinstance(data, dict):
        raise ValidationError("config root must be a mapping")
    unknown = set(data) - {"grover", "noise", "run", "thresholds", "relaxation"}
    if unknown:
        raise ValidationError(f"unknown config sections {sorted(unknown)}")
    grover = None if data.get("grover") is None else GroverConfig.from_dict(data["grover"])
    noise = None if data.get("noise") is None else NoiseModel.from_dict(data["noise"])
    run = RunSettings(**(data.get("run") or {}))
    return LabConfig(grover, noise, run, tuple(data.get("thresholds") or ()),
                     tuple(data.get("relaxation") or ()), data)


def load_config(path: str | Path) -> LabConfig:
    """Read a ``.json``, ``.yaml`` or ``.yml`` lab config."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc
    return parse_config(data or {})


def dump_config(config: LabConfig, path: str | Path) -> None:
    path = Path(path)
    d = config.to_dict()
    text = json.dumps(d, indent=2) if path.suffix == ".json" else yaml.safe_dump(d, sort_keys=False)
    path.write_text(text)
