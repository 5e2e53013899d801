"""Neighbourhood random walk on the quadrant.

A model is described by an ordered list of region rules. Each rule gives
the phase count, the holding rates and nine jump-probability matrices, one
per direction pair ``(a, b)`` with ``a`` acting on the first coordinate and
``b`` on the second. Moves below zero are clamped back onto the axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

SCHEMA_VERSION = 1

#: Direction keys in canonical order, ``p`` for +1, ``0`` for 0, ``m`` for -1.
DIRECTIONS = ("pp", "p0", "pm", "0p", "00", "0m", "mp", "m0", "mm")
_STEP = {"p": 1, "0": 0, "m": -1}
STEPS = {key: (_STEP[key[0]], _STEP[key[1]]) for key in DIRECTIONS}
KEY_OF_STEP = {v: k for k, v in STEPS.items()}

REGIONS = (
    "origin",
    "x-axis",
    "y-axis",
    "diagonal",
    "interior-below",
    "interior-above",
    "all",
)

ROW_SUM_TOL = 1e-10


class ModelError(ValueError):
    """Raised for malformed model descriptions."""


class CoverageError(ModelError):
    """Raised when some position is matched by no rule."""


def region_of(n: int, m: int) -> str:
    if n == 0 and m == 0:
        return "origin"
    if m == 0:
        return "x-axis"
    if n == 0:
        return "y-axis"
    if n == m:
        return "diagonal"
    return "interior-below" if n > m else "interior-above"


def clamp(n: int, m: int, a: int, b: int) -> tuple[int, int]:
    """Destination of a move ``(a, b)`` from ``(n, m)`` with ``[u]^+`` applied."""
    return max(n + a, 0), max(m + b, 0)


class State2D(NamedTuple):
    n: int
    m: int
    i: int  # 1-based phase


@dataclass(frozen=True)
class RegionRule:
    """Parameters shared by every position the rule matches.

    ``regions`` holds region class names; ``positions`` holds explicit
    ``(n, m)`` pairs. A rule matches a position if either applies.
    Missing direction keys in ``P`` mean a zero matrix.
    """

    k: int
    hold_rates: np.ndarray
    P: dict
    regions: tuple = ()
    positions: frozenset = frozenset()

    def __post_init__(self):
        rates = np.asarray(self.hold_rates, dtype=float).reshape(-1)
        object.__setattr__(self, "hold_rates", rates)
        P = {}
        for key, mat in self.P.items():
            if key not in STEPS:
                raise ModelError(f"unknown direction key {key!r}")
            if mat is None:
                continue
            P[key] = np.atleast_2d(np.asarray(mat, dtype=float))
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(
            self, "positions", frozenset((int(n), int(m)) for n, m in self.positions)
        )
        for r in self.regions:
            if r not in REGIONS:
                raise ModelError(f"unknown region {r!r}")
        if not self.regions and not self.positions:
            raise ModelError("rule matches nothing")

    def matches(self, n: int, m: int) -> bool:
        if (n, m) in self.positions:
            return True
        return "all" in self.regions or region_of(n, m) in self.regions


class Resolved(NamedTuple):
    k: int
    hold_rates: np.ndarray
    P: dict


@dataclass(frozen=True)
class ModelSpec:
    rules: tuple
    horizon: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.horizon < 0:
            raise ModelError("horizon must be nonnegative")
        explicit: dict = {}
        for idx, rule in enumerate(self.rules):
            for n, m in rule.positions:
                if max(n, m) > self.horizon:
                    raise ModelError(
                        f"rule {idx}: explicit position ({n},{m}) beyond horizon {self.horizon}"
                    )
                explicit.setdefault((n, m), idx)
        self._cache["explicit"] = explicit

    def rule_index(self, n: int, m: int) -> int:
        key = (n, m)
        idx = self._cache.get(key)
        if idx is None:
            # first match: the earliest explicit rule competes with region rules
            idx = self._cache["explicit"].get(key, len(self.rules))
            region = region_of(n, m)
            for j in range(idx):
                regions = self.rules[j].regions
                if "all" in regions or region in regions:
                    idx = j
                    break
            if idx == len(self.rules):
                raise CoverageError(f"no rule matches position ({n},{m})")
            self._cache[key] = idx
        return idx

    def k(self, n: int, m: int) -> int:
        return self.rules[self.rule_index(n, m)].k

    def jump_matrix(self, n: int, m: int, key: str) -> np.ndarray:
        """Jump-probability matrix for ``key`` at ``(n, m)``, zeros if absent."""
        rule = self.rules[self.rule_index(n, m)]
        mat = rule.P.get(key)
        if mat is None:
            dest = clamp(n, m, *STEPS[key])
            return np.zeros((rule.k, self.k(*dest)))
        return mat


def resolve(spec: ModelSpec, n: int, m: int) -> Resolved:
    rule = spec.rules[spec.rule_index(n, m)]
    return Resolved(rule.k, rule.hold_rates, {key: spec.jump_matrix(n, m, key) for key in DIRECTIONS})


def state_transitions(spec: ModelSpec, n: int, m: int, i: int) -> list:
    """Effective transitions out of ``(n, m, i)``.

    Returns ``[((n2, m2, j), rate), ...]`` sorted by destination. Directions
    that clamp onto the same destination are merged; the total self-loop is
    dropped, and so are transitions of rate zero.
    """
    res = resolve(spec, n, m)
    lam = res.hold_rates[i - 1]
    rates: dict = {}
    for key in DIRECTIONS:
        row = res.P[key][i - 1]
        n2, m2 = clamp(n, m, *STEPS[key])
        for j in np.flatnonzero(row):
            dest = (n2, m2, int(j) + 1)
            if dest == (n, m, i):
                continue
            rates[dest] = rates.get(dest, 0.0) + lam * row[j]
    return sorted((d, float(r)) for d, r in rates.items() if r > 0)


# ----------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    N: int
    violations: list = field(default_factory=list)
    strongly_connected: bool | None = None

    def __bool__(self):
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "ok": self.ok,
            "violations": list(self.violations),
            "strongly_connected": self.strongly_connected,
        }


def validate_model(spec: ModelSpec, N: int) -> ValidationReport:
    """Check every model constraint for positions with ``max(n, m) <= N + 1``.

    Raises :class:`CoverageError` when some position is unmatched; all other
    problems are collected in the report. Strong connectivity of the window
    ``max(n, m) <= N`` is reported as advisory information only.
    """
    report = ValidationReport(N)
    bad = report.violations
    W = N + 1
    for n in range(W + 1):
        for m in range(W + 1):
            spec.rule_index(n, m)  # raises on missing coverage
    for n in range(W + 1):
        for m in range(W + 1):
            rule = spec.rules[spec.rule_index(n, m)]
            k = rule.k
            where = f"({n},{m})"
            if k < 1:
                bad.append(f"phase count {k} < 1 at {where}")
                continue
            if rule.hold_rates.shape != (k,):
                bad.append(f"hold_rates length {rule.hold_rates.size} != k={k} at {where}")
                continue
            for i in np.flatnonzero(~(rule.hold_rates > 0)):
                bad.append(f"holding rate not positive at {where}, phase {i + 1}")
            total = np.zeros(k)
            shapes_ok = True
            for key in DIRECTIONS:
                mat = rule.P.get(key)
                if mat is None:
                    continue
                dest = clamp(n, m, *STEPS[key])
                kd = spec.k(*dest)
                if mat.shape != (k, kd):
                    bad.append(
                        f"matrix {key} has shape {mat.shape} at {where}, "
                        f"expected ({k},{kd}) for destination {dest}"
                    )
                    shapes_ok = False
                    continue
                if not np.all(np.isfinite(mat)) or mat.min() < 0 or mat.max() > 1:
                    bad.append(f"matrix {key} has entries outside [0,1] at {where}")
                total += mat.sum(axis=1)
            if not shapes_ok:
                continue
            P00 = rule.P.get("00")
            if P00 is not None:
                for i in np.flatnonzero(np.diag(P00) != 0):
                    bad.append(
                        f"diagonal of (a,b)=(0,0) matrix nonzero at {where}, phase {i + 1}"
                    )
            for i in np.flatnonzero(np.abs(total - 1.0) > ROW_SUM_TOL):
                bad.append(
                    f"jump probabilities sum to {total[i]:.12g} != 1 at {where}, phase {i + 1}"
                )
    if report.ok:
        gen = build_generator_2d(spec, N)
        ncomp, _ = connected_components(gen.Q, directed=True, connection="strong")
        report.strongly_connected = ncomp == 1
    return report


# ----------------------------------------------------------------------------
# Truncated generator


@dataclass(frozen=True)
class Generator2D:
    """Generator restricted to ``max(n, m) <= N``.

    ``Q`` is a CSR matrix over ``states`` (lexicographic in ``(n, m, i)``);
    its diagonal holds minus the total exit rate, so rows sum to ``-leak``.
    """

    N: int
    states: list
    Q: sp.csr_matrix
    leak: np.ndarray

    @property
    def index(self) -> dict:
        return {s: idx for idx, s in enumerate(self.states)}

    def toarray(self) -> np.ndarray:
        return self.Q.toarray()

    def conservative(self) -> sp.csr_matrix:
        """Generator with exits from the window blocked (rows sum to zero)."""
        return (self.Q + sp.diags(self.leak)).tocsr()


def enumerate_states(spec: ModelSpec, N: int) -> list:
    return [
        State2D(n, m, i)
        for n in range(N + 1)
        for m in range(N + 1)
        for i in range(1, spec.k(n, m) + 1)
    ]


def build_generator_2d(spec: ModelSpec, N: int) -> Generator2D:
    states = enumerate_states(spec, N)
    index = {s: idx for idx, s in enumerate(states)}
    rows, cols, vals = [], [], []
    leak = np.zeros(len(states))
    for r, s in enumerate(states):
        exit_rate = 0.0
        for dest, rate in state_transitions(spec, *s):
            exit_rate += rate
            c = index.get(dest)
            if c is None:
                leak[r] += rate
            else:
                rows.append(r)
                cols.append(c)
                vals.append(rate)
        rows.append(r)
        cols.append(r)
        vals.append(-exit_rate)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    return Generator2D(N, states, Q, leak)


# ----------------------------------------------------------------------------
# JSON I/O


def _rule_to_dict(rule: RegionRule) -> dict:
    out: dict = {}
    if rule.regions:
        out["region"] = list(rule.regions)
    if rule.positions:
        out["positions"] = sorted([list(p) for p in rule.positions])
    out["k"] = rule.k
    out["hold_rates"] = rule.hold_rates.tolist()
    out["P"] = {key: rule.P[key].tolist() for key in DIRECTIONS if key in rule.P}
    return out


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "horizon": spec.horizon,
        "rules": [_rule_to_dict(r) for r in spec.rules],
    }


def spec_from_dict(doc: dict) -> ModelSpec:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema_version {version!r}")
    rules = []
    for idx, raw in enumerate(doc["rules"]):
        region = raw.get("region", ())
        if isinstance(region, str):
            region = (region,)
        try:
            rules.append(
                RegionRule(
                    k=int(raw["k"]),
                    hold_rates=raw["hold_rates"],
                    P=dict(raw.get("P", {})),
                    regions=tuple(region),
                    positions=frozenset(tuple(p) for p in raw.get("positions", ())),
                )
            )
        except KeyError as exc:
            raise ModelError(f"rule {idx}: missing field {exc}") from None
    return ModelSpec(tuple(rules), horizon=int(doc.get("horizon", 0)))


def load_model(path) -> ModelSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def save_model(spec: ModelSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=1)
        fh.write("\n")


def uniform_model(k: int, hold_rates: Iterable[float], P: dict) -> ModelSpec:
    """Model with a single catch-all rule."""
    return ModelSpec((RegionRule(k, np.asarray(list(hold_rates), float), P, regions=("all",)),))
