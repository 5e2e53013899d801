import math

import numpy as np
import pytest

from oracles import (
    absorbing_cdf,
    dense_hitting_mean,
    dense_stationary,
    dense_transient,
    minimal_root,
    total_variation,
)
from quadqbd import corpus
from quadqbd.model import State2D, build_generator_2d
from quadqbd.qbd import build_blocks_up_to
from quadqbd.solvers import (
    SolverConfig,
    SolverError,
    TruncationError,
    compute_G,
    compute_R,
    expected_hitting_time,
    hitting_time_cdf,
    poisson_window,
    solve_stationary,
    stationary,
    transient,
)

TWO_STATE = (1 + math.exp(-1)) / 2


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0)
    with pytest.raises(ValueError):
        SolverConfig(N=0)
    with pytest.raises(ValueError):
        SolverConfig(poisson_eps=1.0)


def test_R_birth_death_limit():
    root = minimal_root(2.0, -3.0, 1.0)
    assert root == pytest.approx(0.5)
    blocks = build_blocks_up_to(corpus.level_birth_death(1, 2), 40)
    R = compute_R(blocks)
    for n in range(20):
        assert np.abs(R[n].sum(axis=1) - root).max() <= 1e-8
    leaky = compute_R(blocks, blocked=False)
    last = blocks.up[39] @ np.linalg.inv(-blocks.diag[40])
    assert np.abs(leaky[39] - last).max() <= 1e-14
    assert all(r.min() >= 0 for r in R + leaky)


def test_G_recurrent_and_transient():
    rec = compute_G(build_blocks_up_to(corpus.level_birth_death(1, 2), 40))
    for n in range(1, 21):
        assert np.abs(rec.row_sums(n) - 1).max() <= 1e-6
    root = minimal_root(2.0, -3.0, 1.0)
    tr = compute_G(build_blocks_up_to(corpus.level_birth_death(2, 1), 60))
    for n in range(1, 21):
        assert np.abs(tr.row_sums(n) - root).max() <= 1e-6
    for n in range(1, 61):
        assert tr[n].min() >= 0 and tr.row_sums(n).max() <= 1 + 1e-12


def test_G_base_case():
    blocks = build_blocks_up_to(corpus.variable_k(inner=4), 6)
    G = compute_G(blocks)
    expected = np.linalg.solve(-blocks.diag[6], blocks.down[6])
    assert np.abs(G[6] - expected).max() <= 1e-14
    assert G.row_sums(6).max() <= 1


def test_product_form_levels():
    res = solve_stationary(corpus.product_form(), SolverConfig(N=40))
    mass = res.level_mass()
    assert mass[0] == pytest.approx(0.35, abs=1e-12)
    assert mass[1] == pytest.approx(0.175 + 0.105 + 0.0525, abs=1e-12)
    pi = res.to_planar()
    assert pi[State2D(1, 0, 1)] == pytest.approx(0.175, abs=1e-12)
    assert pi[State2D(0, 1, 1)] == pytest.approx(0.105, abs=1e-12)
    assert res.residual <= 1e-12
    assert all(p.min() >= 0 for p in res.pi)


def test_dense_oracle(corpus_spec):
    N = 8
    gen = build_generator_2d(corpus_spec, N)
    ref = dense_stationary(gen.conservative().toarray())
    res = stationary(build_blocks_up_to(corpus_spec, N), SolverConfig(N=N, max_sweep=0))
    got = res.to_planar()
    assert total_variation(got, dict(zip(gen.states, ref))) <= 1e-10
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-13)


def test_truncation_growth():
    cfg = SolverConfig(N=4, tol=1e-10, max_sweep=4)
    res = solve_stationary(corpus.product_form(), cfg)
    assert res.N == 64 and res.tail_mass_bound <= 1e-10
    with pytest.raises(TruncationError):
        solve_stationary(corpus.product_form(), SolverConfig(N=2, tol=1e-10, max_sweep=1))


def test_poisson_window_tail():
    for mu in (0.3, 5.0, 120.0, 2000.0):
        left, right, w, tail = poisson_window(mu, 1e-12)
        assert tail <= 1e-12
        assert 1 - w.sum() == pytest.approx(tail, abs=1e-11)
        assert left <= mu <= right


def test_transient_time_zero():
    spec = corpus.variable_k(inner=3)
    res = transient(spec, (1, 1, 1), 0.0, SolverConfig(N=4))
    p0 = np.zeros(len(res.states))
    p0[res.states.index(State2D(1, 1, 1))] = 1
    assert np.array_equal(res.p, p0)


def test_transient_two_state():
    res = transient(corpus.two_phase_switch(), (0, 0, 1), 0.5, SolverConfig(N=1))
    assert res.to_planar()[State2D(0, 0, 1)] == pytest.approx(TWO_STATE, abs=1e-12)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_transient_matches_expm(corpus_spec, t):
    cfg = SolverConfig(N=4)
    gen = build_generator_2d(corpus_spec, 4)
    p0 = np.zeros(len(gen.states))
    p0[gen.index[State2D(2, 1, 1)]] = 0.5
    p0[gen.index[State2D(0, 0, 1)]] = 0.5
    res = transient(corpus_spec, p0, t, cfg)
    ref = dense_transient(gen.toarray(), p0, t)
    assert np.abs(res.p - ref).max() <= 1e-8
    assert res.poisson_tail <= cfg.poisson_eps
    assert 1 - res.p.sum() >= -1e-12


def test_transient_approaches_stationary():
    spec = corpus.product_form()
    cfg = SolverConfig(N=15)
    pi = solve_stationary(spec, SolverConfig(N=15, max_sweep=0)).to_planar()
    tv = [total_variation(transient(spec, (3, 3, 1), t, cfg).to_planar(), pi) for t in (1, 3, 10, 30)]
    assert all(a > b for a, b in zip(tv, tv[1:]))


def test_transient_rejects_bad_input():
    spec = corpus.product_form()
    with pytest.raises(ValueError):
        transient(spec, (0, 0, 1), -1.0, SolverConfig(N=2))
    with pytest.raises(ValueError):
        transient(spec, {(0, 0, 1): 0.5}, 1.0, SolverConfig(N=2))


def test_hitting_cdf_matches_oracle(product_form):
    cfg = SolverConfig(N=20)
    grid = [0.0, 0.5, 1.0, 2.0, 5.0]
    res = hitting_time_cdf(product_form, [(0, 0)], (1, 1, 1), grid, cfg)
    gen = build_generator_2d(product_form, 20)
    mask = np.array([s[:2] == (0, 0) for s in gen.states])
    p0 = np.zeros(len(gen.states))
    p0[gen.index[State2D(1, 1, 1)]] = 1
    ref = [absorbing_cdf(gen.toarray(), mask, p0, t) for t in grid]
    assert np.abs(res.cdf - ref).max() <= 1e-8
    assert np.all(np.diff(res.cdf) >= 0)


def test_hitting_cdf_starts_on_target(product_form):
    res = hitting_time_cdf(product_form, lambda s: s.n == 0, (0, 3, 1), [0, 1, 5], SolverConfig(N=6))
    assert np.array_equal(res.cdf, [1.0, 1.0, 1.0])


def test_hitting_target_outside_window(product_form):
    with pytest.raises(ValueError):
        hitting_time_cdf(product_form, [(50, 50)], (0, 0, 1), [1.0], SolverConfig(N=5))


def test_mm1_busy_period():
    res = expected_hitting_time(corpus.axis_birth_death(1, 2), lambda s: s.n == 0, SolverConfig(N=60))
    h = res.to_planar()
    assert h[State2D(1, 0, 1)] == pytest.approx(1 / (2 - 1), abs=1e-8)
    assert State2D(0, 0, 1) not in h
    assert res.escape_prob.max() <= 1


def test_hitting_mean_matches_dense(product_form):
    cfg = SolverConfig(N=15)
    res = expected_hitting_time(product_form, [(0, 0, 1)], cfg)
    gen = build_generator_2d(product_form, 15)
    mask = np.array([tuple(s) == (0, 0, 1) for s in gen.states])
    ref = dense_hitting_mean(gen.toarray(), mask)
    assert np.abs(res.h - ref).max() <= 1e-8
    assert res.to_planar()[State2D(1, 1, 1)] == pytest.approx(ref[[tuple(s) for s in np.array(gen.states)[~mask].tolist()].index((1, 1, 1))])


def test_hitting_unreachable():
    spec = corpus.two_phase_switch()
    with pytest.raises(SolverError):
        expected_hitting_time(spec, [(1, 0)], SolverConfig(N=2))
