"""Reference models with known behaviour, used by the tests and the CLI."""

from __future__ import annotations

import numpy as np

from .model import DIRECTIONS, STEPS, ModelSpec, RegionRule, clamp, uniform_model


def product_form(up_x=1.0, down_x=2.0, up_y=0.6, down_y=2.0) -> ModelSpec:
    """Two independent single-server birth-death queues, one per axis.

    The stationary law is ``(1-r1) r1**n (1-r2) r2**m`` with
    ``r1 = up_x/down_x`` and ``r2 = up_y/down_y``.
    """
    total = up_x + down_x + up_y + down_y
    P = {
        "p0": [[up_x / total]],
        "m0": [[down_x / total]],
        "0p": [[up_y / total]],
        "0m": [[down_y / total]],
    }
    return uniform_model(1, [total], P)


def product_form_distribution(n: int, m: int, r1=0.5, r2=0.3) -> float:
    return (1 - r1) * r1**n * (1 - r2) * r2**m


def axis_birth_death(up=1.0, down=2.0) -> ModelSpec:
    """Single-phase birth-death moving only along the first coordinate."""
    total = up + down
    return uniform_model(1, [total], {"p0": [[up / total]], "m0": [[down / total]]})


def two_phase_switch(rate01=1.0, rate10=1.0) -> ModelSpec:
    """Two phases switching without ever changing position."""
    rates = [rate01, rate10]
    return uniform_model(2, rates, {"00": [[0.0, 1.0], [1.0, 0.0]]})


def level_birth_death(up=1.0, down=2.0, shuffle=0.5) -> ModelSpec:
    """Single-phase walk whose level ``max(n, m)`` is a birth-death chain.

    Every state moves diagonally up at rate ``up`` and diagonally down at
    rate ``down``; extra moves at rate ``shuffle`` keep the level fixed and
    make the chain irreducible.
    """
    total = up + down + 2 * shuffle
    base = {"pp": up / total, "mm": down / total}
    s = shuffle / total
    rules = []
    for regions, moves in (
        (("origin", "diagonal"), ("0m", "m0")),
        (("x-axis", "interior-below"), ("0p", "0m")),
        (("y-axis", "interior-above"), ("p0", "m0")),
    ):
        P = {key: [[p]] for key, p in base.items()}
        for key in moves:
            P[key] = [[s]]
        rules.append(RegionRule(1, [total], P, regions=regions))
    return ModelSpec(tuple(rules))


def _random_P(rng, k: int, dest_k: dict, weights: dict) -> dict:
    mats = {}
    for key in DIRECTIONS:
        w = weights.get(key, 0.0)
        mats[key] = w * rng.uniform(0.2, 1.0, size=(k, dest_k[key]))
    np.fill_diagonal(mats["00"], 0.0)
    total = sum(mat.sum(axis=1) for mat in mats.values())
    return {key: mat / total[:, None] for key, mat in mats.items()}


DOWNWARD = {"pp": 0.3, "p0": 0.6, "pm": 0.4, "0p": 0.6, "00": 1.0, "0m": 1.0, "mp": 0.4, "m0": 1.0, "mm": 0.8}


def level_independent(k=2, seed=7, weights=None) -> ModelSpec:
    """Random level-independent model: one rule with all nine directions."""
    rng = np.random.default_rng(seed)
    weights = DOWNWARD if weights is None else weights
    P = _random_P(rng, k, {key: k for key in DIRECTIONS}, weights)
    rates = rng.uniform(1.0, 3.0, size=k)
    return uniform_model(k, rates, P)


def cyclic_k(n: int, m: int) -> int:
    return 1 + (n + m) % 3


def variable_k(kfun=cyclic_k, inner=12, k_out=2, seed=11, weights=None) -> ModelSpec:
    """Random model whose phase count follows ``kfun`` for ``max(n, m) <= inner``.

    Positions up to ``inner + 1`` get explicit rules; beyond that one rule
    per region class with ``k_out`` phases.
    """
    rng = np.random.default_rng(seed)
    weights = DOWNWARD if weights is None else weights
    H = inner + 1

    def k_at(n, m):
        return kfun(n, m) if max(n, m) <= inner else k_out

    rules = []
    for n in range(H + 1):
        for m in range(H + 1):
            k = k_at(n, m)
            dest_k = {key: k_at(*clamp(n, m, *STEPS[key])) for key in DIRECTIONS}
            P = _random_P(rng, k, dest_k, weights)
            rules.append(
                RegionRule(k, rng.uniform(1.0, 3.0, size=k), P, positions=frozenset({(n, m)}))
            )
    P = _random_P(rng, k_out, {key: k_out for key in DIRECTIONS}, weights)
    rules.append(RegionRule(k_out, rng.uniform(1.0, 3.0, size=k_out), P, regions=("all",)))
    return ModelSpec(tuple(rules), horizon=H)
