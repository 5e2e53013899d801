"""Block-tridiagonal generator of the level/phase process.

Two independent constructions are provided. :func:`build_block` re-indexes
the planar transition rates through the state bijection and is the one the
solvers use. :func:`build_block_formula` assembles the same blocks from
closed-form sub-block placements and exists to cross-check the first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mapping import LevelLayout, level_layout, state_index, to_level_phase, to_planar
from .model import DIRECTIONS, STEPS, ModelSpec, clamp, resolve, state_transitions


def _check_pair(n: int, n2: int) -> None:
    if n < 0 or n2 < 0 or abs(n - n2) > 1:
        raise ValueError(f"invalid level pair ({n},{n2})")


def _level_row_blocks(spec: ModelSpec, n: int, layouts: dict) -> dict:
    """Rates out of every state of level ``n``, split by destination level."""
    lay = layouts[n]
    out = {}
    for n2 in (n - 1, n, n + 1):
        if n2 >= 0:
            out[n2] = np.zeros((lay.total_size, layouts[n2].total_size))
    for u in lay.states():
        r = state_index(lay, u)
        exit_rate = 0.0
        for dest, rate in state_transitions(spec, *to_planar(u)):
            exit_rate += rate
            v = to_level_phase(dest)
            out[v.z][r, state_index(layouts[v.z], v)] += rate
        out[n][r, r] -= exit_rate
    return out


def _layouts(spec: ModelSpec, levels) -> dict:
    return {z: level_layout(spec, z) for z in levels if z >= 0}


def build_block(spec: ModelSpec, n: int, n2: int) -> np.ndarray:
    """Block ``Q[n, n2]`` obtained by re-indexing the planar generator."""
    _check_pair(n, n2)
    layouts = _layouts(spec, (n - 1, n, n + 1))
    return _level_row_blocks(spec, n, layouts)[n2]


# ----------------------------------------------------------------------------
# Closed-form sub-block assembly


def _rate(spec: ModelSpec, n: int, m: int, key: str) -> np.ndarray:
    """Hold-rate-scaled jump matrix from ``(n, m)`` in direction ``key``.

    At the axes several directions clamp onto one destination; their
    matrices are summed.
    """
    res = resolve(spec, n, m)
    dest = clamp(n, m, *STEPS[key])
    E = sum(res.P[k2] for k2 in DIRECTIONS if clamp(n, m, *STEPS[k2]) == dest)
    return res.hold_rates[:, None] * E


def _self(spec: ModelSpec, n: int, m: int) -> np.ndarray:
    res = resolve(spec, n, m)
    return -np.diag(res.hold_rates) + _rate(spec, n, m, "00")


def _put(Q, rows: LevelLayout, cols: LevelLayout, src, dst, mat) -> None:
    Q[rows.slice(*src), cols.slice(*dst)] = mat


def build_block_formula(spec: ModelSpec, n: int, n2: int) -> np.ndarray:
    """Block ``Q[n, n2]`` assembled from per-cell sub-block placements.

    Cells are addressed as ``(eps1, eps2)``. Besides the nearest-neighbour
    placements, the anti-diagonal moves between ``(n, n-1)`` and
    ``(n-1, n)`` and the moves ``(+,-)``, ``(-,+)`` out of the diagonal
    cell are included.
    """
    _check_pair(n, n2)
    L = level_layout(spec, n)
    C = level_layout(spec, n2)
    Q = np.zeros((L.total_size, C.total_size))
    put = lambda src, dst, mat: _put(Q, L, C, src, dst, mat)  # noqa: E731

    if n == 0 and n2 == 0:
        put((0, 0), (0, 0), _self(spec, 0, 0))
    elif n == 0:
        put((0, 0), (0, 1), _rate(spec, 0, 0, "pp"))
        put((0, 0), (1, 0), _rate(spec, 0, 0, "p0"))
        put((0, 0), (2, 0), _rate(spec, 0, 0, "0p"))
    elif n2 == n:
        put((0, n), (0, n), _self(spec, n, n))
        put((0, n), (1, n - 1), _rate(spec, n, n, "0m"))
        put((0, n), (2, n - 1), _rate(spec, n, n, "m0"))
        put((1, n - 1), (0, n), _rate(spec, n, n - 1, "0p"))
        put((2, n - 1), (0, n), _rate(spec, n - 1, n, "p0"))
        for m in range(n):
            put((1, m), (1, m), _self(spec, n, m))
            put((2, m), (2, m), _self(spec, m, n))
            if m >= 1:
                put((1, m), (1, m - 1), _rate(spec, n, m, "0m"))
                put((2, m), (2, m - 1), _rate(spec, m, n, "m0"))
            if m + 1 <= n - 1:
                put((1, m), (1, m + 1), _rate(spec, n, m, "0p"))
                put((2, m), (2, m + 1), _rate(spec, m, n, "p0"))
        # crossing the diagonal in one anti-diagonal step
        put((1, n - 1), (2, n - 1), _rate(spec, n, n - 1, "mp"))
        put((2, n - 1), (1, n - 1), _rate(spec, n - 1, n, "pm"))
    elif n2 == n + 1:
        put((0, n), (0, n + 1), _rate(spec, n, n, "pp"))
        put((0, n), (1, n), _rate(spec, n, n, "p0"))
        put((0, n), (1, n - 1), _rate(spec, n, n, "pm"))
        put((0, n), (2, n), _rate(spec, n, n, "0p"))
        put((0, n), (2, n - 1), _rate(spec, n, n, "mp"))
        for m in range(n):
            put((1, m), (1, m), _rate(spec, n, m, "p0"))
            put((1, m), (1, m + 1), _rate(spec, n, m, "pp"))
            put((2, m), (2, m), _rate(spec, m, n, "0p"))
            put((2, m), (2, m + 1), _rate(spec, m, n, "pp"))
            if m >= 1:
                put((1, m), (1, m - 1), _rate(spec, n, m, "pm"))
                put((2, m), (2, m - 1), _rate(spec, m, n, "mp"))
    else:  # n2 == n - 1
        put((0, n), (0, n - 1), _rate(spec, n, n, "mm"))
        put((1, n - 1), (0, n - 1), _rate(spec, n, n - 1, "m0"))
        put((2, n - 1), (0, n - 1), _rate(spec, n - 1, n, "0m"))
        if n >= 2:
            put((1, n - 2), (0, n - 1), _rate(spec, n, n - 2, "mp"))
            put((2, n - 2), (0, n - 1), _rate(spec, n - 2, n, "pm"))
        for m in range(n):
            if m >= 1:
                put((1, m), (1, m - 1), _rate(spec, n, m, "mm"))
                put((2, m), (2, m - 1), _rate(spec, m, n, "mm"))
            if m <= n - 2:
                put((1, m), (1, m), _rate(spec, n, m, "m0"))
                put((2, m), (2, m), _rate(spec, m, n, "0m"))
            if m + 1 <= n - 2:
                put((1, m), (1, m + 1), _rate(spec, n, m, "mp"))
                put((2, m), (2, m + 1), _rate(spec, m, n, "pm"))
    return Q


# ----------------------------------------------------------------------------
# All levels


@dataclass(frozen=True)
class GeneratorBlocks:
    """Levels ``0..N`` of the block-tridiagonal generator.

    ``diag[n]`` always carries minus the total exit rate on its diagonal,
    including rates out of the window from level ``N``; ``top_leak`` holds
    those out-of-window rates per state of level ``N``.
    """

    spec: ModelSpec
    N: int
    layouts: tuple
    diag: tuple
    up: tuple
    down: tuple
    top_leak: np.ndarray

    def sizes(self) -> list:
        return [lay.total_size for lay in self.layouts]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes())])

    def blocked_diag(self, n: int) -> np.ndarray:
        """``diag[n]``, with exits above level ``N`` removed when ``n == N``."""
        if n != self.N:
            return self.diag[n]
        return self.diag[n] + np.diag(self.top_leak)

    def assemble(self, blocked: bool = False) -> sp.csr_matrix:
        grid = [[None] * (self.N + 1) for _ in range(self.N + 1)]
        for n in range(self.N + 1):
            grid[n][n] = sp.csr_matrix(self.blocked_diag(n) if blocked else self.diag[n])
            if n < self.N:
                grid[n][n + 1] = sp.csr_matrix(self.up[n])
            if n >= 1:
                grid[n][n - 1] = sp.csr_matrix(self.down[n])
        return sp.bmat(grid, format="csr")

    def states(self) -> list:
        return [u for lay in self.layouts for u in lay.states()]

    def to_dict(self) -> dict:
        levels = []
        for n in range(self.N + 1):
            entry = {
                "level": n,
                "layout": self.layouts[n].to_dict(),
                "diag": self.diag[n].tolist(),
            }
            if n < self.N:
                entry["up"] = self.up[n].tolist()
            if n >= 1:
                entry["down"] = self.down[n].tolist()
            levels.append(entry)
        return {"N": self.N, "top_leak": self.top_leak.tolist(), "levels": levels}

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")


def build_blocks_up_to(spec: ModelSpec, N: int) -> GeneratorBlocks:
    if N < 0:
        raise ValueError("N must be nonnegative")
    layouts = _layouts(spec, range(N + 2))
    diag, up, down = [], [], [None]
    top_leak = None
    for n in range(N + 1):
        rows = _level_row_blocks(spec, n, layouts)
        diag.append(rows[n])
        if n < N:
            up.append(rows[n + 1])
        else:
            top_leak = rows[n + 1].sum(axis=1)
        if n >= 1:
            down.append(rows[n - 1])
    return GeneratorBlocks(
        spec, N, tuple(layouts[z] for z in range(N + 1)), tuple(diag), tuple(up), tuple(down), top_leak
    )
