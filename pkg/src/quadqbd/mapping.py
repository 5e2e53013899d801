"""Correspondence between planar states and level/phase states.

A planar state ``(n, m, i)`` maps to level ``z = max(n, m)`` and phase
``(eps1, eps2, i)`` where ``eps1`` is 0 on the diagonal, 1 below it and 2
above it, and ``eps2 = min(n, m)``.

Inside a level the phases are laid out as the diagonal cell first, then the
``eps1 = 1`` cells by ascending ``eps2``, then the ``eps1 = 2`` cells by
ascending ``eps2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .model import ModelSpec, State2D


class State1D(NamedTuple):
    z: int
    eps1: int
    eps2: int
    i: int


class Cell(NamedTuple):
    eps1: int
    eps2: int
    size: int
    offset: int


def to_level_phase(s: State2D) -> State1D:
    n, m, i = s
    if n == m:
        return State1D(n, 0, n, i)
    if n > m:
        return State1D(n, 1, m, i)
    return State1D(m, 2, n, i)


def to_planar(u: State1D) -> State2D:
    z, eps1, eps2, i = u
    if eps1 == 0:
        if eps2 != z:
            raise ValueError(f"eps1=0 requires eps2=z, got {u}")
        return State2D(z, z, i)
    if eps1 not in (1, 2):
        raise ValueError(f"eps1 must be 0, 1 or 2, got {u}")
    if not 0 <= eps2 < z:
        raise ValueError(f"eps2 out of range for level {z}: {u}")
    return State2D(z, eps2, i) if eps1 == 1 else State2D(eps2, z, i)


def cell_position(z: int, eps1: int, eps2: int) -> tuple[int, int]:
    n, m, _ = to_planar(State1D(z, eps1, eps2, 1))
    return n, m


@dataclass(frozen=True)
class LevelLayout:
    z: int
    cells: tuple
    total_size: int

    def cell(self, eps1: int, eps2: int) -> Cell:
        if eps1 == 0:
            idx = 0
        else:
            idx = 1 + (eps1 - 1) * self.z + eps2
        if (eps1 == 0 and eps2 != self.z) or not 0 <= idx < len(self.cells):
            raise KeyError((eps1, eps2))
        c = self.cells[idx]
        if (c.eps1, c.eps2) != (eps1, eps2):
            raise KeyError((eps1, eps2))
        return c

    def slice(self, eps1: int, eps2: int) -> slice:
        c = self.cell(eps1, eps2)
        return slice(c.offset, c.offset + c.size)

    def group(self, eps1: int) -> slice:
        """Index range covering every cell with the given ``eps1``."""
        cells = [c for c in self.cells if c.eps1 == eps1]
        if not cells:
            return slice(0, 0)
        return slice(cells[0].offset, cells[-1].offset + cells[-1].size)

    def states(self) -> list:
        return [
            State1D(self.z, c.eps1, c.eps2, i)
            for c in self.cells
            for i in range(1, c.size + 1)
        ]

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "total_size": self.total_size,
            "cells": [c._asdict() for c in self.cells],
        }


def level_layout(spec: ModelSpec, z: int) -> LevelLayout:
    order = [(0, z)]
    order += [(1, e) for e in range(z)]
    order += [(2, e) for e in range(z)]
    cells = []
    offset = 0
    for eps1, eps2 in order:
        size = spec.k(*cell_position(z, eps1, eps2))
        cells.append(Cell(eps1, eps2, size, offset))
        offset += size
    return LevelLayout(z, tuple(cells), offset)


def state_index(layout: LevelLayout, u: State1D) -> int:
    if u.z != layout.z:
        raise KeyError(f"state {u} is not in level {layout.z}")
    c = layout.cell(u.eps1, u.eps2)
    if not 1 <= u.i <= c.size:
        raise KeyError(f"phase {u.i} out of range for cell ({u.eps1},{u.eps2})")
    return c.offset + u.i - 1
