"""Monte-Carlo simulation of the planar walk.

Paths run on a finite window of states. A path that tries to leave the
window is rerun from scratch on a window twice as large; because each path
owns its random stream and transitions are scanned in a window-independent
order, this does not change any result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ModelSpec, State2D, enumerate_states, state_transitions

MAX_WINDOW = 1024


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon: float = 1.0
    paths: int = 1
    record: str = "terminal"
    backend: str = "auto"

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.paths < 1:
            raise ValueError("paths must be at least 1")
        if self.record not in ("terminal", "trajectory"):
            raise ValueError("record must be 'terminal' or 'trajectory'")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class TransitionTable:
    """Outgoing transitions of every state with ``max(n, m) <= W`` in CSR form.

    ``cum`` holds cumulative rates per row; ``dest`` is -1 for destinations
    outside the window.
    """

    W: int
    states: list
    index: dict
    indptr: np.ndarray
    dest: np.ndarray
    cum: np.ndarray
    coords: np.ndarray  # (n, m, i) per state


def transition_table(spec: ModelSpec, W: int) -> TransitionTable:
    states = enumerate_states(spec, W)
    index = {s: idx for idx, s in enumerate(states)}
    # Outgoing moves depend on (n, m) only through the matching rule and the
    # clamping at n = 0 or m = 0, so one relative pattern serves many states.
    # Translation keeps the destination order.
    patterns: dict = {}
    indptr = [0]
    dest = []
    cum = []
    for s in states:
        key = (spec.rule_index(s.n, s.m), s.n == 0, s.m == 0, s.i)
        pat = patterns.get(key)
        if pat is None:
            moves = state_transitions(spec, *s)
            pat = patterns[key] = (
                [(d[0] - s.n, d[1] - s.m, d[2]) for d, _ in moves],
                np.cumsum([r for _, r in moves]).tolist(),
            )
        for dn, dm, j in pat[0]:
            dest.append(index.get((s.n + dn, s.m + dm, j), -1))
        cum.extend(pat[1])
        indptr.append(len(dest))
    return TransitionTable(
        W,
        states,
        index,
        np.asarray(indptr, dtype=np.int64),
        np.asarray(dest, dtype=np.int64),
        np.asarray(cum, dtype=np.float64),
        np.asarray(states, dtype=np.int64).reshape(-1, 3),
    )


class _Windows:
    def __init__(self, spec: ModelSpec, init: State2D):
        self.spec = spec
        W = 16
        while W < max(init.n, init.m) + 8:
            W *= 2
        self.W = W
        self.table = transition_table(spec, W)
        if init not in self.table.index:
            raise ValueError(f"invalid initial state {init}")

    def grow(self) -> TransitionTable:
        if 2 * self.W > MAX_WINDOW:
            raise RuntimeError(f"paths keep leaving a window of {self.W} levels")
        self.W *= 2
        self.table = transition_table(self.spec, self.W)
        return self.table


@dataclass
class PathBatch:
    """Terminal states ``(n, m, i)`` and jump counts, one row per path."""

    terminal: np.ndarray
    jumps: np.ndarray
    absorbed: np.ndarray


def run_paths(spec: ModelSpec, init, cfg: SimConfig) -> PathBatch:
    init = State2D(*init)
    kern = kernels.get(cfg.backend)
    win = _Windows(spec, init)
    terminal = np.zeros((cfg.paths, 3), dtype=np.int64)
    jumps = np.zeros(cfg.paths, dtype=np.int64)
    status = np.zeros(cfg.paths, dtype=np.int8)
    pending = np.arange(cfg.paths)
    while pending.size:
        tab = win.table
        start = tab.index[init]
        # contiguous runs of path indices share one kernel call
        breaks = np.flatnonzero(np.diff(pending) != 1) + 1
        for chunk in np.split(pending, breaks):
            n = chunk.size
            st = np.empty(n, dtype=np.int64)
            jp = np.empty(n, dtype=np.int64)
            ss = np.empty(n, dtype=np.int8)
            kern.run_paths(tab.indptr, tab.dest, tab.cum, start, float(cfg.horizon),
                           int(cfg.seed), int(chunk[0]), st, jp, ss)
            terminal[chunk] = tab.coords[st]
            jumps[chunk] = jp
            status[chunk] = ss
        pending = np.flatnonzero(status == kernels.ESCAPED)
        if pending.size:
            win.grow()
    return PathBatch(terminal, jumps, status == kernels.ABSORBED)


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    absorbed: bool = False

    def __len__(self):
        return len(self.states)

    @property
    def jumps(self) -> int:
        return len(self.states) - 1


def simulate(spec: ModelSpec, init, cfg: SimConfig, path: int = 0) -> Trajectory:
    """Full trajectory of path number ``path`` (the same path ``run_paths`` draws)."""
    init = State2D(*init)
    kern = kernels.get(cfg.backend)
    win = _Windows(spec, init)
    cap = 1024
    while True:
        tab = win.table
        times = np.empty(cap)
        idx = np.empty(cap, dtype=np.int64)
        count, status = kern.run_path_record(
            tab.indptr, tab.dest, tab.cum, tab.index[init], float(cfg.horizon),
            int(cfg.seed), int(path), times, idx,
        )
        if status == kernels.FULL:
            cap *= 4
        elif status == kernels.ESCAPED:
            win.grow()
        else:
            break
    states = [tab.states[k] for k in idx[:count]]
    return Trajectory(times[:count].copy(), states, status == kernels.ABSORBED)


def empirical_distribution(spec: ModelSpec, init, t: float, cfg: SimConfig) -> dict:
    """Fraction of ``cfg.paths`` paths in each state at time ``t``."""
    cfg = SimConfig(cfg.seed, float(t), cfg.paths, cfg.record, cfg.backend)
    batch = run_paths(spec, init, cfg)
    keys, counts = np.unique(batch.terminal, axis=0, return_counts=True)
    return {State2D(*map(int, k)): c / cfg.paths for k, c in zip(keys, counts)}
