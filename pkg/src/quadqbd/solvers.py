"""Stationary, first-passage, transient and hitting-time analysis.

The level-dependent recursions work level by level on dense blocks. The
transient and hitting-time routines use uniformization on the truncated
planar generator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import poisson

from .mapping import to_planar
from .model import ModelSpec, State2D, build_generator_2d
from .qbd import GeneratorBlocks, build_blocks_up_to

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class TruncationError(SolverError):
    """The tail-mass diagnostic did not pass within the allowed regrowths."""


@dataclass(frozen=True)
class SolverConfig:
    """``max_sweep`` caps how often the truncation is doubled; 0 keeps ``N`` fixed."""

    N: int = 30
    tol: float = 1e-10
    max_sweep: int = 4
    poisson_eps: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 0 < self.poisson_eps < 1:
            raise ValueError("poisson_eps must lie in (0, 1)")
        if self.max_sweep < 0:
            raise ValueError("max_sweep must be nonnegative")


def _right_solve(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Return ``B @ inv(A)``."""
    try:
        return la.solve(A.T, B.T, check_finite=False).T
    except la.LinAlgError as exc:
        raise SolverError(f"singular level matrix: {exc}") from None


def _left_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return la.solve(A, B, check_finite=False)
    except la.LinAlgError as exc:
        raise SolverError(f"singular level matrix: {exc}") from None


def _clip_roundoff(X: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.abs(X).max(initial=0.0)))
    if X.size and X.min() < -1e-12 * scale:
        raise SolverError(f"{what} has negative entries ({X.min():.3g})")
    return np.maximum(X, 0.0)


# ----------------------------------------------------------------------------
# Stationary distribution


def compute_R(blocks: GeneratorBlocks, cfg: SolverConfig | None = None, blocked: bool = True) -> list:
    """Rate matrices ``R_0 .. R_{N-1}`` with ``pi_{n+1} = pi_n R_n``.

    Runs the backward recursion from ``R_N = 0``. With ``blocked`` the top
    level has its exits out of the window removed, so that the truncated
    chain is conservative.
    """
    N = blocks.N
    R = [None] * N
    for n in range(N - 1, -1, -1):
        A = blocks.blocked_diag(n + 1) if blocked else blocks.diag[n + 1]
        if n + 1 < N:
            A = A + R[n + 1] @ blocks.down[n + 2]
        R[n] = _clip_roundoff(_right_solve(blocks.up[n], -A), f"R_{n}")
    return R


@dataclass
class StationaryResult:
    pi: list
    residual: float
    tail_mass_bound: float
    R_seq: list
    blocks: GeneratorBlocks = field(repr=False)

    @property
    def N(self) -> int:
        return self.blocks.N

    def level_mass(self) -> np.ndarray:
        return np.array([p.sum() for p in self.pi])

    def vector(self) -> np.ndarray:
        return np.concatenate(self.pi)

    def to_planar(self) -> dict:
        out = {}
        for lay, p in zip(self.blocks.layouts, self.pi):
            for u, x in zip(lay.states(), p):
                out[to_planar(u)] = float(x)
        return out

    def rows(self) -> list:
        """``(level, eps1, eps2, phase, probability)`` per state."""
        return [
            (u.z, u.eps1, u.eps2, u.i, float(x))
            for lay, p in zip(self.blocks.layouts, self.pi)
            for u, x in zip(lay.states(), p)
        ]


def _residual(blocks: GeneratorBlocks, pi: list) -> float:
    worst = 0.0
    for n in range(blocks.N + 1):
        r = pi[n] @ blocks.blocked_diag(n)
        if n >= 1:
            r = r + pi[n - 1] @ blocks.up[n - 1]
        if n < blocks.N:
            r = r + pi[n + 1] @ blocks.down[n + 1]
        worst = max(worst, float(np.abs(r).max(initial=0.0)))
    return worst


def _solve_fixed(blocks: GeneratorBlocks) -> StationaryResult:
    N = blocks.N
    R = compute_R(blocks, blocked=True)
    A0 = blocks.blocked_diag(0)
    if N >= 1:
        A0 = A0 + R[0] @ blocks.down[1]
    # total mass carried per unit of pi_0, v = 1 + R_0 (1 + R_1 (1 + ...))
    v = np.ones(blocks.layouts[N].total_size)
    for n in range(N - 1, -1, -1):
        v = 1.0 + R[n] @ v
    M = A0.T.copy()
    M[-1, :] = v
    rhs = np.zeros(M.shape[0])
    rhs[-1] = 1.0
    pi0 = _clip_roundoff(_left_solve(M, rhs), "pi_0")
    pi = [pi0]
    for n in range(N):
        pi.append(pi[-1] @ R[n])
    total = sum(p.sum() for p in pi)
    pi = [p / total for p in pi]
    return StationaryResult(pi, _residual(blocks, pi), float(pi[N].sum()), R, blocks)


def stationary(blocks: GeneratorBlocks, cfg: SolverConfig | None = None) -> StationaryResult:
    """Stationary distribution of the window chain with the top level blocked.

    When the mass on the top level exceeds ``cfg.tol`` the truncation is
    doubled, at most ``cfg.max_sweep`` times.
    """
    cfg = cfg or SolverConfig(N=max(blocks.N, 1))
    res = _solve_fixed(blocks)
    sweeps = 0
    while res.tail_mass_bound > cfg.tol and sweeps < cfg.max_sweep:
        sweeps += 1
        N = 2 * max(res.N, 1)
        log.info("top-level mass %.3e > tol at N=%d; retrying with N=%d", res.tail_mass_bound, res.N, N)
        res = _solve_fixed(build_blocks_up_to(blocks.spec, N))
    if cfg.max_sweep and res.tail_mass_bound > cfg.tol:
        raise TruncationError(
            f"top-level mass {res.tail_mass_bound:.3e} still above tol at N={res.N}"
        )
    log.info("stationary solved at N=%d, tail mass %.3e, residual %.3e", res.N, res.tail_mass_bound, res.residual)
    return res


def solve_stationary(spec: ModelSpec, cfg: SolverConfig) -> StationaryResult:
    return stationary(build_blocks_up_to(spec, cfg.N), cfg)


# ----------------------------------------------------------------------------
# First passage


@dataclass
class GSequence:
    """``G[n]`` for ``n = 1..N``; ``G[0]`` is ``None``."""

    G: list

    @property
    def N(self) -> int:
        return len(self.G) - 1

    def __getitem__(self, n: int) -> np.ndarray:
        if n < 1:
            raise IndexError(n)
        return self.G[n]

    def row_sums(self, n: int) -> np.ndarray:
        return self.G[n].sum(axis=1)


def compute_G(blocks: GeneratorBlocks, cfg: SolverConfig | None = None) -> GSequence:
    """First-passage matrices from level ``n`` down to ``n - 1``.

    Paths that leave the window above level ``N`` are treated as never
    returning, which makes every ``G_n`` a lower bound.
    """
    N = blocks.N
    G = [None] * (N + 1)
    nxt = None
    for n in range(N, 0, -1):
        A = blocks.diag[n] if nxt is None else blocks.diag[n] + blocks.up[n] @ nxt
        nxt = G[n] = _clip_roundoff(_left_solve(-A, blocks.down[n]), f"G_{n}")
    return GSequence(G)


# ----------------------------------------------------------------------------
# Uniformization


def _as_distribution(gen, pi0) -> np.ndarray:
    size = len(gen.states)
    if isinstance(pi0, tuple) and len(pi0) == 3 and all(isinstance(x, (int, np.integer)) for x in pi0):
        pi0 = {State2D(*pi0): 1.0}
    if isinstance(pi0, dict):
        index = gen.index
        p = np.zeros(size)
        for s, mass in pi0.items():
            try:
                p[index[State2D(*s)]] += mass
            except KeyError:
                raise ValueError(f"initial state {s} outside the window") from None
    else:
        p = np.asarray(pi0, dtype=float)
        if p.shape != (size,):
            raise ValueError(f"initial vector has shape {p.shape}, expected ({size},)")
    if p.min(initial=0.0) < 0 or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be nonnegative and sum to 1")
    return p


def poisson_window(mu: float, eps: float) -> tuple:
    """Range ``[left, right]`` holding all but ``eps`` of Poisson(mu).

    Returns ``(left, right, weights, tail)`` where ``tail`` is the exact
    probability outside the range.
    """
    if mu <= 0:
        return 0, 0, np.ones(1), 0.0
    left = int(poisson.ppf(eps / 2, mu))
    right = int(poisson.isf(eps / 2, mu))
    weights = poisson.pmf(np.arange(left, right + 1), mu)
    tail = float(poisson.cdf(left - 1, mu) + poisson.sf(right, mu))
    return left, right, weights, tail


def _uniformize(Q: sp.csr_matrix, p: np.ndarray, t: float, eps: float) -> tuple:
    """``p exp(Q t)`` and the Poisson mass dropped by truncation."""
    theta = float(-Q.diagonal().min(initial=0.0))
    if t == 0 or theta == 0:
        return p.copy(), 0.0
    PT = (sp.identity(Q.shape[0], format="csr") + Q / theta).T.tocsr()
    left, right, w, tail = poisson_window(theta * t, eps)
    out = np.zeros_like(p)
    v = p.copy()
    for j in range(right + 1):
        if j >= left:
            out += w[j - left] * v
        v = PT @ v
    return out, tail


@dataclass
class TransientResult:
    states: list
    p: np.ndarray
    poisson_tail: float
    t: float

    @property
    def leak_mass(self) -> float:
        """Mass lost through the window boundary or the truncated series."""
        return max(0.0, 1.0 - float(self.p.sum()))

    def to_planar(self) -> dict:
        return {s: float(x) for s, x in zip(self.states, self.p)}


def transient(spec: ModelSpec, pi0, t: float, cfg: SolverConfig) -> TransientResult:
    """Distribution at time ``t`` on the window ``max(n, m) <= cfg.N``.

    Mass that leaves the window is lost, so the output sums to at most one.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    gen = build_generator_2d(spec, cfg.N)
    p0 = _as_distribution(gen, pi0)
    p, tail = _uniformize(gen.Q, p0, float(t), cfg.poisson_eps)
    return TransientResult(gen.states, np.maximum(p, 0.0), tail, float(t))


def _target_mask(gen, target) -> np.ndarray:
    if callable(target):
        mask = np.array([bool(target(s)) for s in gen.states])
    else:
        wanted = set()
        for item in target:
            wanted.add(tuple(item))
        mask = np.array([(s.n, s.m) in wanted or tuple(s) in wanted for s in gen.states])
    if not mask.any():
        raise ValueError("target has no state inside the window")
    return mask


@dataclass
class HittingCDF:
    t: np.ndarray
    cdf: np.ndarray
    poisson_tail: float


def hitting_time_cdf(spec: ModelSpec, target, pi0, t_grid, cfg: SolverConfig) -> HittingCDF:
    """Probability that ``target`` has been reached by each time in ``t_grid``.

    ``target`` is a predicate on :class:`State2D` or an iterable of
    ``(n, m)`` positions and ``(n, m, i)`` states.
    """
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    if t_grid.size and (t_grid.min() < 0 or np.any(np.diff(t_grid) < 0)):
        raise ValueError("t_grid must be nonnegative and nondecreasing")
    gen = build_generator_2d(spec, cfg.N)
    mask = _target_mask(gen, target)
    p = _as_distribution(gen, pi0)
    keep = sp.diags((~mask).astype(float))
    Q = (keep @ gen.Q).tocsr()  # target rows absorbing
    cdf = np.empty(t_grid.size)
    now = 0.0
    tail = 0.0
    for idx, t in enumerate(t_grid):
        p, dropped = _uniformize(Q, p, t - now, cfg.poisson_eps)
        tail += dropped
        now = t
        cdf[idx] = p[mask].sum()
    # absorption is monotone; remove roundoff wiggle
    cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
    return HittingCDF(t_grid, cdf, tail)


@dataclass
class HittingTimes:
    """Mean hitting times from every non-target window state.

    ``h`` is a lower bound because paths are stopped at the window edge;
    ``escape_prob`` is the probability of that happening first.
    """

    states: list
    h: np.ndarray
    escape_prob: np.ndarray

    def to_planar(self) -> dict:
        return {s: float(x) for s, x in zip(self.states, self.h)}


def expected_hitting_time(spec: ModelSpec, target, cfg: SolverConfig) -> HittingTimes:
    gen = build_generator_2d(spec, cfg.N)
    mask = _target_mask(gen, target)
    free = np.flatnonzero(~mask)
    Qrr = gen.Q[free][:, free].tocsc()
    if free.size == 0:
        return HittingTimes([], np.zeros(0), np.zeros(0))
    lu = _splu(Qrr)
    h = lu.solve(-np.ones(free.size))
    esc = lu.solve(-gen.leak[free])
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(esc))):
        raise SolverError("target unreachable from some window states")
    return HittingTimes([gen.states[k] for k in free], np.maximum(h, 0.0), np.clip(esc, 0.0, 1.0))


def _splu(A):
    try:
        return spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"restricted generator is singular: {exc}") from None
