"""Two-dimensional stochastic fluid model and its lattice discretization.

Each phase ``i`` drives the position at velocity ``(c1[i], c2[i])``. The
discretized walk keeps the phase process unchanged and jumps one grid cell
in the direction ``(sign c1[i], sign c2[i])`` at rate ``speed_i / dz`` where
``speed_i = hypot(c1[i], c2[i])``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import KEY_OF_STEP, SCHEMA_VERSION, ModelError, ModelSpec, uniform_model


class AbsorbingPhaseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FluidSpec:
    T: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        c1 = np.asarray(self.c1, dtype=float).reshape(-1)
        c2 = np.asarray(self.c2, dtype=float).reshape(-1)
        k = T.shape[0]
        if T.shape != (k, k) or c1.shape != (k,) or c2.shape != (k,):
            raise ModelError("T must be k x k and c1, c2 of length k")
        off = T - np.diag(np.diag(T))
        if off.min() < 0:
            raise ModelError("T has negative off-diagonal entries")
        if np.abs(T.sum(axis=1)).max() > 1e-10:
            raise ModelError("rows of T must sum to zero")
        if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
            raise ModelError("rate vectors must be finite")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    @property
    def k(self) -> int:
        return self.T.shape[0]

    def speeds(self) -> np.ndarray:
        return np.hypot(self.c1, self.c2)


@dataclass(frozen=True)
class DiscretizationConfig:
    k_res: int
    dx: float
    dy: float

    def __post_init__(self):
        if self.k_res < 1:
            raise ValueError("k_res must be a positive integer")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("dx and dy must be positive")
        if abs(math.hypot(self.dx, self.dy) - self.dz) > 1e-12:
            raise ValueError("hypot(dx, dy) must equal 1/k_res")

    @property
    def dz(self) -> float:
        return 1.0 / self.k_res

    @classmethod
    def square(cls, k_res: int) -> "DiscretizationConfig":
        step = (1.0 / k_res) / math.sqrt(2.0)
        return cls(k_res, step, step)

    @classmethod
    def with_aspect(cls, k_res: int, ratio: float) -> "DiscretizationConfig":
        """Grid with ``dx / dy == ratio``."""
        dz = 1.0 / k_res
        dy = dz / math.hypot(ratio, 1.0)
        return cls(k_res, ratio * dy, dy)


def partition_phases(f: FluidSpec) -> dict:
    """Sign class ``(a, b)`` in ``{-1, 0, 1}**2`` of every phase (1-based)."""
    return {
        i + 1: (int(np.sign(a)), int(np.sign(b)))
        for i, (a, b) in enumerate(zip(f.c1, f.c2))
    }


def discretize(f: FluidSpec, d: DiscretizationConfig) -> ModelSpec:
    """Level-independent lattice walk approximating ``f`` at resolution ``d``."""
    k = f.k
    classes = partition_phases(f)
    jump = f.speeds() / d.dz
    for i, cls in classes.items():
        if cls == (0, 0):
            jump[i - 1] = 0.0
    phase_rates = -np.diag(f.T)
    hold = phase_rates + jump
    P = {}
    for i in range(k):
        if hold[i] <= 0:
            warnings.warn(f"phase {i + 1} has no transitions and is absorbing", AbsorbingPhaseWarning)
            continue
        row = f.T[i] / hold[i]
        row[i] = 0.0
        P.setdefault("00", np.zeros((k, k)))[i] = row
        if jump[i] > 0:
            key = KEY_OF_STEP[classes[i + 1]]
            P.setdefault(key, np.zeros((k, k)))[i, i] = jump[i] / hold[i]
    return uniform_model(k, hold, P)


def displacement_moments(c1: float, c2: float, dz: float, t: float) -> tuple:
    """Mean and variance of ``dz * Poisson(hypot(c1, c2) * t / dz)``."""
    if dz <= 0 or t < 0:
        raise ValueError("dz must be positive and t nonnegative")
    speed = math.hypot(c1, c2)
    return speed * t, speed * t * dz


def fluid_to_dict(f: FluidSpec) -> dict:
    return {"schema_version": SCHEMA_VERSION, "T": f.T.tolist(), "c1": f.c1.tolist(), "c2": f.c2.tolist()}


def fluid_from_dict(doc: dict) -> FluidSpec:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {doc.get('schema_version')!r}")
    return FluidSpec(doc["T"], doc["c1"], doc["c2"])


def load_fluid(path) -> FluidSpec:
    with open(path) as fh:
        return fluid_from_dict(json.load(fh))
