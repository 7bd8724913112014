"""Log-space scaling fits: ``a e^(b n)`` and ``a n^b e^(c n)``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..errors import FitError, ValidationError

MODELS = ("exponential", "power_exponential")
_MIN_POINTS = {"exponential": 3, "power_exponential": 4}


@dataclass(frozen=True)
class FitResult:
    model: str
    a: float
    b: float
    c: float | None = None
    r_squared: float = 1.0
    n_points: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"unknown fit model {self.model!r}")
        coeffs = [self.a, self.b] + ([] if self.c is None else [self.c])
        if not all(math.isfinite(x) for x in coeffs):
            raise FitError("fit coefficients are not finite")
        if (self.model == "power_exponential") != (self.c is not None):
            raise ValidationError("c is required by, and only by, the power_exponential model")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValidationError(f"r_squared {self.r_squared} outside [0, 1]")

    def __call__(self, n: float) -> float:
        return extrapolate(self, n)

    def to_json(self) -> dict:
        d = {"model": self.model, "a": self.a, "b": self.b}
        if self.c is not None:
            d["c"] = self.c
        d["r2"] = self.r_squared
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "FitResult":
        c = d.get("c")
        return cls(d["model"], float(d["a"]), float(d["b"]), None if c is None else float(c),
                   float(d.get("r2", 1.0)))


def fit_scaling(points: Iterable[tuple[float, float]], model: str = "exponential") -> FitResult:
    """Ordinary least squares on ``ln y``.

    ``exponential``: ln y = ln a + b n.
    ``power_exponential``: ln y = ln a + b ln n + c n.
    R² is reported in log space.
    """
    if model not in MODELS:
        raise ValidationError(f"unknown fit model {model!r}")
    pts = [(float(n), float(y)) for n, y in points]
    if len(pts) < _MIN_POINTS[model]:
        raise ValidationError(f"{model} fit needs at least {_MIN_POINTS[model]} points, got {len(pts)}")
    n = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValidationError("fit values must be positive and finite")
    if model == "power_exponential" and np.any(n <= 0):
        raise ValidationError("power_exponential fit needs n > 0")
    cols = [np.ones_like(n), n] if model == "exponential" else [np.ones_like(n), np.log(n), n]
    design = np.column_stack(cols)
    target = np.log(y)
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise FitError(f"degenerate design matrix for {model} fit (rank {rank} < {design.shape[1]})")
    resid = target - design @ coef
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    a = float(math.exp(coef[0]))
    if model == "exponential":
        return FitResult(model, a, float(coef[1]), None, r2, len(pts))
    return FitResult(model, a, float(coef[1]), float(coef[2]), r2, len(pts))


def extrapolate(fit: FitResult, n: float) -> float:
    """Evaluate the fitted model at ``n``."""
    if fit.model == "exponential":
        return fit.a * math.exp(fit.b * n)
    if n <= 0:
        raise ValidationError("power_exponential model needs n > 0")
    return fit.a * n ** fit.b * math.exp(fit.c * n)
