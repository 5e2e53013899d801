import math

import numpy as np
import pytest

from quadqbd import corpus, kernels
from quadqbd.model import State2D, state_transitions
from quadqbd.sim import SimConfig, empirical_distribution, run_paths, simulate, transition_table

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available(), reason="extension not built")


def drifting():
    """Walk pushed away from the origin, so paths leave small windows."""
    return corpus.product_form(up_x=3.0, down_x=1.0, up_y=2.0, down_y=1.0)


def test_config_validation():
    for bad in [dict(horizon=-1), dict(paths=0), dict(record="all"), dict(seed=-1)]:
        with pytest.raises(ValueError):
            SimConfig(**bad)
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_horizon_zero(product_form):
    traj = simulate(product_form, (2, 1, 1), SimConfig(horizon=0.0))
    assert traj.states == [State2D(2, 1, 1)]
    assert list(traj.times) == [0.0]
    assert empirical_distribution(product_form, (2, 1, 1), 0.0, SimConfig(paths=50)) == {State2D(2, 1, 1): 1.0}


def test_invalid_init(product_form):
    with pytest.raises(ValueError):
        simulate(product_form, (0, 0, 2), SimConfig())


def test_stream_rule():
    py = kernels.get("python")
    assert py.stream_start(0, 0) == py.mix64(0x9E3779B97F4A7C15)
    if "compiled" in kernels.available():
        c = kernels.get("compiled")
        for seed, p in [(0, 0), (5, 17), (2**64 - 1, 3)]:
            assert c.stream_start(seed, p) == py.stream_start(seed, p)


def test_determinism(product_form):
    cfg = SimConfig(seed=42, horizon=5.0, paths=200)
    a = run_paths(product_form, (0, 0, 1), cfg)
    b = run_paths(product_form, (0, 0, 1), cfg)
    assert np.array_equal(a.terminal, b.terminal) and np.array_equal(a.jumps, b.jumps)
    t1 = simulate(product_form, (0, 0, 1), cfg, path=7)
    t2 = simulate(product_form, (0, 0, 1), cfg, path=7)
    assert np.array_equal(t1.times, t2.times) and t1.states == t2.states
    other = run_paths(product_form, (0, 0, 1), SimConfig(seed=43, horizon=5.0, paths=200))
    assert not np.array_equal(a.terminal, other.terminal)


@needs_compiled
@pytest.mark.parametrize("make", [corpus.product_form, corpus.level_independent, corpus.variable_k, drifting])
def test_backend_parity(make):
    spec = make()
    base = dict(seed=9, horizon=8.0, paths=300)
    a = run_paths(spec, (1, 0, 1), SimConfig(backend="compiled", **base))
    b = run_paths(spec, (1, 0, 1), SimConfig(backend="python", **base))
    assert np.array_equal(a.terminal, b.terminal)
    assert np.array_equal(a.jumps, b.jumps)
    ta = simulate(spec, (1, 0, 1), SimConfig(backend="compiled", **base), path=11)
    tb = simulate(spec, (1, 0, 1), SimConfig(backend="python", **base), path=11)
    assert np.array_equal(ta.times, tb.times) and ta.states == tb.states


def test_window_independence():
    spec = drifting()
    cfg = SimConfig(seed=1, horizon=10.0, paths=64)
    batch = run_paths(spec, (0, 0, 1), cfg)
    assert batch.terminal[:, :2].max() > 16  # some paths needed a regrown window
    big = transition_table(spec, 256)
    kern = kernels.get()
    st = np.empty(cfg.paths, dtype=np.int64)
    jp = np.empty(cfg.paths, dtype=np.int64)
    ss = np.empty(cfg.paths, dtype=np.int8)
    kern.run_paths(big.indptr, big.dest, big.cum, big.index[State2D(0, 0, 1)], cfg.horizon, cfg.seed, 0, st, jp, ss)
    assert (ss == kernels.OK).all()
    assert np.array_equal(big.coords[st], batch.terminal)
    assert np.array_equal(jp, batch.jumps)


def test_batch_matches_single_paths():
    spec = drifting()
    cfg = SimConfig(seed=5, horizon=6.0, paths=20)
    batch = run_paths(spec, (0, 0, 1), cfg)
    for p in range(cfg.paths):
        traj = simulate(spec, (0, 0, 1), cfg, path=p)
        assert tuple(traj.states[-1]) == tuple(batch.terminal[p])
        assert traj.jumps == batch.jumps[p]


def test_trajectory_validity():
    spec = corpus.variable_k()
    traj = simulate(spec, (0, 0, 1), SimConfig(seed=2, horizon=100.0))
    assert traj.jumps > 50
    assert np.all(np.diff(traj.times) > 0)
    for a, b in zip(traj.states, traj.states[1:]):
        assert a != b
        rates = dict(state_transitions(spec, *a))
        assert rates.get(tuple(b), 0.0) > 0


def test_absorbing_state_flagged():
    spec = corpus.two_phase_switch(rate01=1.0, rate10=0.0)
    traj = simulate(spec, (0, 0, 1), SimConfig(seed=0, horizon=100.0))
    assert traj.absorbed
    assert traj.states == [State2D(0, 0, 1), State2D(0, 0, 2)]
    batch = run_paths(spec, (0, 0, 1), SimConfig(seed=0, horizon=100.0, paths=10))
    assert batch.absorbed.all()


def test_holding_times():
    # up 1, down 2: interior exit rate 3, boundary exit rate 1 (clamped move is thinned)
    spec = corpus.axis_birth_death()
    holds = {0: [], 1: []}
    cfg = SimConfig(seed=8, horizon=50.0)
    for p in range(400):
        traj = simulate(spec, (0, 0, 1), cfg, path=p)
        gaps = np.diff(traj.times)
        for s, g in zip(traj.states, gaps):
            holds[min(s.n, 1)].append(g)
    for key, rate in [(0, 1.0), (1, 3.0)]:
        h = np.asarray(holds[key])
        se = h.std(ddof=1) / math.sqrt(h.size)
        assert abs(h.mean() - 1 / rate) <= 3 * se


def test_two_phase_probability():
    paths = 100_000
    dist = empirical_distribution(corpus.two_phase_switch(), (0, 0, 1), 0.5, SimConfig(seed=4, paths=paths))
    p = dist.get(State2D(0, 0, 1), 0.0)
    exact = (1 + math.exp(-1)) / 2
    assert abs(p - exact) <= 3 * math.sqrt(exact * (1 - exact) / paths)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("make", [corpus.variable_k, corpus.level_birth_death, corpus.level_independent])
def test_transition_table_matches_direct(make):
    spec = make()
    tab = transition_table(spec, 20)
    for r, s in enumerate(tab.states):
        lo, hi = tab.indptr[r], tab.indptr[r + 1]
        moves = state_transitions(spec, *s)
        assert hi - lo == len(moves)
        expected = [tab.index.get(d, -1) for d, _ in moves]
        assert tab.dest[lo:hi].tolist() == expected
        assert np.allclose(tab.cum[lo:hi], np.cumsum([rate for _, rate in moves]), rtol=0, atol=0)


def test_fallback_selected_without_extension():
    import subprocess
    import sys

    code = (
        "import sys; sys.modules['quadqbd._ckernels'] = None\n"
        "from quadqbd import kernels, corpus\n"
        "from quadqbd.sim import SimConfig, run_paths\n"
        "assert kernels.DEFAULT == 'python' and kernels.available() == ['python']\n"
        "b = run_paths(corpus.product_form(), (0, 0, 1), SimConfig(seed=3, horizon=2.0, paths=5))\n"
        "print(b.terminal.tolist())\n"
    )
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    ref = run_paths(corpus.product_form(), (0, 0, 1), SimConfig(seed=3, horizon=2.0, paths=5))
    assert proc.stdout.strip() == str(ref.terminal.tolist())
