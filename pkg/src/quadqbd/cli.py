"""Command-line interface.

Every command writes its results into ``--out`` and finishes by writing
``manifest.json`` there. Exit codes: 0 success, 1 model validation failure,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import resource
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .fluid import DiscretizationConfig, discretize, displacement_moments, load_fluid
from .mapping import to_level_phase
from .model import ModelError, ModelSpec, load_model, save_model, validate_model
from .qbd import build_blocks_up_to
from .sim import SimConfig, empirical_distribution, simulate
from .solvers import (
    SolverConfig,
    SolverError,
    compute_G,
    expected_hitting_time,
    hitting_time_cdf,
    stationary,
    transient,
)

log = logging.getLogger("quadqbd")

STATE_COLUMNS = ["level", "eps1", "eps2", "phase", "probability"]


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class Run:
    def __init__(self, args):
        self.args = args
        self.out = args.out
        self.outputs: list = []
        self.inputs: list = []
        self.started = time.perf_counter()
        self.started_at = datetime.now(timezone.utc).isoformat()
        try:
            os.makedirs(self.out, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc}") from None
        if not os.access(self.out, os.W_OK):
            raise UsageError(f"output directory {self.out} is not writable")

    def path(self, name: str) -> str:
        p = os.path.join(self.out, name)
        self.outputs.append(name)
        return p

    def write_csv(self, name: str, header: list, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(x) for x in row])

    def write_json(self, name: str, doc) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def model(self) -> ModelSpec:
        return self._load(self.args.model, load_model)

    def _load(self, path, loader):
        self.inputs.append(path)
        try:
            return loader(path)
        except FileNotFoundError:
            raise UsageError(f"input file not found: {path}") from None
        except (ModelError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None

    def checked_model(self, N: int) -> ModelSpec:
        spec = self.model()
        try:
            report = validate_model(spec, N)
        except ModelError as exc:
            self.write_json("validation.json", {"N": N, "ok": False, "violations": [str(exc)]})
            raise ValidationFailed(str(exc)) from None
        if not report.ok:
            self.write_json("validation.json", report.to_dict())
            raise ValidationFailed("; ".join(report.violations[:5]))
        return spec

    def manifest(self, code: int) -> None:
        overrides = {
            k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "command", "out")
        }
        doc = {
            "command": self.args.command,
            "inputs": self.inputs,
            "config": overrides,
            "output_dir": self.out,
            "outputs": self.outputs,
            "exit_code": code,
            "version": __version__,
            "started_at": self.started_at,
            "wall_time_s": time.perf_counter() - self.started,
            "peak_rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
        }
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=1, default=str)
            fh.write("\n")


def _parse_state(text: str) -> tuple:
    try:
        parts = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad state {text!r}, expected n,m,i") from None
    if len(parts) != 3:
        raise UsageError(f"bad state {text!r}, expected n,m,i")
    return parts


def _parse_target(text: str) -> list:
    items = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            item = tuple(int(x) for x in chunk.split(","))
        except ValueError:
            raise UsageError(f"bad target {chunk!r}") from None
        if len(item) not in (2, 3):
            raise UsageError(f"bad target {chunk!r}, expected n,m or n,m,i")
        items.append(item)
    if not items:
        raise UsageError("empty target")
    return items


def _solver_cfg(args) -> SolverConfig:
    try:
        return SolverConfig(
            N=args.N,
            tol=getattr(args, "tol", 1e-10),
            max_sweep=getattr(args, "max_sweep", 0),
            poisson_eps=getattr(args, "poisson_eps", 1e-12),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _state_rows(states, values):
    for s, x in zip(states, values):
        u = to_level_phase(s)
        yield (u.z, u.eps1, u.eps2, u.i, float(x))


# ----------------------------------------------------------------------------
# Commands


def cmd_validate(run: Run) -> None:
    spec = run.model()
    try:
        report = validate_model(spec, run.args.N)
    except ModelError as exc:
        run.write_json("validation.json", {"N": run.args.N, "ok": False, "violations": [str(exc)]})
        raise ValidationFailed(str(exc)) from None
    run.write_json("validation.json", report.to_dict())
    if not report.ok:
        raise ValidationFailed("; ".join(report.violations[:5]))
    print(f"ok: {len(report.violations)} violations, strongly connected window: {report.strongly_connected}")


def cmd_blocks(run: Run) -> None:
    spec = run.checked_model(run.args.N)
    blocks = build_blocks_up_to(spec, run.args.N)
    blocks.dump(run.path("blocks.json"))
    print(f"levels 0..{blocks.N}, sizes {blocks.sizes()}")


def cmd_stationary(run: Run) -> None:
    cfg = _solver_cfg(run.args)
    spec = run.checked_model(cfg.N)
    res = stationary(build_blocks_up_to(spec, cfg.N), cfg)
    run.write_csv("stationary.csv", STATE_COLUMNS, res.rows())
    run.write_json(
        "stationary.json",
        {
            "N": res.N,
            "residual": res.residual,
            "tail_mass_bound": res.tail_mass_bound,
            "level_mass": res.level_mass().tolist(),
        },
    )
    print(f"N={res.N} P(level 0)={res.level_mass()[0]:.12g} residual={res.residual:.3e} tail={res.tail_mass_bound:.3e}")


def cmd_gmatrix(run: Run) -> None:
    cfg = _solver_cfg(run.args)
    spec = run.checked_model(cfg.N)
    blocks = build_blocks_up_to(spec, cfg.N)
    G = compute_G(blocks, cfg)
    rows = []
    for n in range(1, G.N + 1):
        for u, r in zip(blocks.layouts[n].states(), G.row_sums(n)):
            rows.append((n, u.eps1, u.eps2, u.i, float(r)))
    run.write_csv("gmatrix_rowsums.csv", ["level", "eps1", "eps2", "phase", "row_sum"], rows)
    run.write_json("gmatrix.json", {"N": G.N, "G": {str(n): G[n].tolist() for n in range(1, G.N + 1)}})
    print(f"G_1 row sums: min {G.row_sums(1).min():.12g} max {G.row_sums(1).max():.12g}")


def cmd_transient(run: Run) -> None:
    cfg = _solver_cfg(run.args)
    spec = run.checked_model(cfg.N)
    init = _parse_state(run.args.init)
    try:
        res = transient(spec, {init: 1.0}, run.args.t, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run.write_csv("transient.csv", STATE_COLUMNS, _state_rows(res.states, res.p))
    run.write_json("transient.json", {"t": res.t, "N": cfg.N, "poisson_tail": res.poisson_tail, "leak_mass": res.leak_mass})
    print(f"t={res.t} mass in window {res.p.sum():.12g}")


def cmd_hitting(run: Run) -> None:
    cfg = _solver_cfg(run.args)
    spec = run.checked_model(cfg.N)
    target = _parse_target(run.args.target)
    init = _parse_state(run.args.init)
    try:
        grid = [float(x) for x in run.args.t_grid.split(",")]
        cdf = hitting_time_cdf(spec, target, {init: 1.0}, grid, cfg)
        mean = expected_hitting_time(spec, target, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run.write_csv("hitting_cdf.csv", ["t", "cdf"], zip(cdf.t, cdf.cdf))
    run.write_csv(
        "hitting_mean.csv",
        ["n", "m", "phase", "mean_time", "escape_prob"],
        ((s.n, s.m, s.i, h, e) for s, h, e in zip(mean.states, mean.h, mean.escape_prob)),
    )
    h = mean.to_planar().get(init)
    print(f"mean hitting time from {init}: {h if h is not None else 0.0}")


def cmd_simulate(run: Run) -> None:
    a = run.args
    spec = run.model()
    init = _parse_state(a.init)
    try:
        cfg = SimConfig(seed=a.seed, horizon=a.t, paths=a.paths, record=a.record, backend=a.backend)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if a.record == "trajectory":
        traj = simulate(spec, init, cfg)
        run.write_csv(
            "trajectory.csv", ["time", "n", "m", "phase"], ((t, *s) for t, s in zip(traj.times, traj.states))
        )
        print(f"{traj.jumps} jumps, absorbed={traj.absorbed}")
    else:
        hist = empirical_distribution(spec, init, a.t, cfg)
        run.write_csv("histogram.csv", ["n", "m", "phase", "mass"], ((*s, p) for s, p in sorted(hist.items())))
        print(f"{len(hist)} distinct states over {a.paths} paths")


def cmd_fluid_discretize(run: Run) -> None:
    a = run.args
    f = run._load(a.fluid, load_fluid)
    try:
        if a.dx is not None:
            d = DiscretizationConfig.with_aspect(a.k_res, a.dx / a.dy if a.dy else float("nan"))
        else:
            d = DiscretizationConfig.square(a.k_res)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = discretize(f, d)
    save_model(spec, run.path("model.json"))
    run.write_json("grid.json", {"k_res": d.k_res, "dz": d.dz, "dx": d.dx, "dy": d.dy})
    print(f"wrote {f.k}-phase model at dz={d.dz}")


def cmd_fluid_moments(run: Run) -> None:
    a = run.args
    dz = a.dz if a.dz is not None else (1.0 / a.k_res if a.k_res else None)
    if dz is None:
        raise UsageError("give --dz or --k-res")
    try:
        mean, var = displacement_moments(a.c1, a.c2, dz, a.t)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run.write_json("moments.json", {"c1": a.c1, "c2": a.c2, "dz": dz, "t": a.t, "mean": mean, "variance": var})
    print(f"mean {mean:.12g} variance {var:.12g}")


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quadqbd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        return sp

    def model_args(sp, N=30):
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--N", type=int, default=N, help="truncation level")

    sp = command("validate", cmd_validate, "check a model file")
    model_args(sp, 10)
    sp = command("blocks", cmd_blocks, "dump generator blocks")
    model_args(sp, 5)
    sp = command("stationary", cmd_stationary, "stationary distribution")
    model_args(sp)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-sweep", type=int, default=4)
    sp = command("gmatrix", cmd_gmatrix, "first-passage matrices")
    model_args(sp)
    sp = command("transient", cmd_transient, "distribution at time t")
    model_args(sp, 10)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--init", default="0,0,1", help="initial state n,m,i")
    sp.add_argument("--poisson-eps", type=float, default=1e-12)
    sp = command("hitting", cmd_hitting, "hitting-time distribution and means")
    model_args(sp, 10)
    sp.add_argument("--target", required=True, help="';'-separated n,m or n,m,i")
    sp.add_argument("--init", default="0,0,1")
    sp.add_argument("--t-grid", default="0,1,2,5,10", help="comma-separated times")
    sp.add_argument("--poisson-eps", type=float, default=1e-12)
    sp = command("simulate", cmd_simulate, "Monte-Carlo simulation")
    sp.add_argument("--model", required=True)
    sp.add_argument("--init", default="0,0,1")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--paths", type=int, default=1000)
    sp.add_argument("--record", choices=["terminal", "trajectory"], default="terminal")
    sp.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto")
    sp = command("fluid-discretize", cmd_fluid_discretize, "lattice model from a fluid model")
    sp.add_argument("--fluid", required=True, help="fluid JSON file")
    sp.add_argument("--k-res", type=int, required=True)
    sp.add_argument("--dx", type=float, help="grid aspect together with --dy")
    sp.add_argument("--dy", type=float)
    sp = command("fluid-moments", cmd_fluid_moments, "mean and variance of the jump displacement")
    sp.add_argument("--c1", type=float, required=True)
    sp.add_argument("--c2", type=float, required=True)
    sp.add_argument("--dz", type=float)
    sp.add_argument("--k-res", type=int)
    sp.add_argument("--t", type=float, required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        run = Run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args.func(run)
        code = 0
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        code = 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        code = 1
    run.manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
