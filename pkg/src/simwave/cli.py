"""Batch front end: ``simwave <mode> --config <path>``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ao import run_ao, sweep
from .cascade import compose, random_phases
from .config import ConfigError, RunConfig, load_config
from .io import PLOT_SCRIPT, dump_matrix, rate_row, rate_row_header, render_csv
from .metrics import sinr_closed_form
from .phase_optimizer import (SumSEObjective, grad_objective,
                              optimize_phases)
from .scene import OperatorFactory, StatisticsFactory, build_scene
from .validation import directional_error, mc_check, unit_direction

log = logging.getLogger("simwave")

MODES = ("validate", "ao", "sweep-n", "sweep-l", "converge")


class OracleFailure(Exception):
    pass


def _meta(cfg: RunConfig, mode: str) -> dict:
    return {"simwave": f"{__version__} {mode}", "seed": cfg.seed, "config": cfg.resolved_json()}


def _validate(cfg: RunConfig, workers: int):
    scene = build_scene(cfg)
    ops, stats = scene.ops, scene.stats
    exp = cfg.experiment
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(3,)))
    p = np.full(stats.num_users, cfg.power_budget / stats.num_users)
    objective = SumSEObjective(ops, stats, p)
    # a few ascent steps move off random phases, where weak LoS gains inflate MC noise
    phases, _ = optimize_phases(random_phases(ops.num_layers, ops.num_atoms, rng), objective,
                                max_iters=cfg.optimizer.phase_max_iters)

    mc = mc_check(phases, ops, stats, p, exp.mc_samples, rng)
    mc_rel = float(mc.rel_err.max())
    mc_z = float(mc.z_score.max())

    state = compose(phases, ops)
    bundle = grad_objective(state, ops, stats, p)
    k = stats.num_users

    def components(x):
        rep = sinr_closed_form(compose(x, ops), ops, stats, p)
        return rep.numerators, rep.denominators

    errs = []
    for _ in range(5):
        d = unit_direction(phases.shape, rng)
        errs.append(directional_error(objective.value, bundle.objective, phases, d,
                                      exp.fd_step, central=True))
        for u in range(k):
            for which, grad in ((0, bundle.numerator), (1, bundle.denominator)):
                errs.append(directional_error(lambda x: components(x)[which][u], grad[:, u],
                                              phases, d, exp.fd_step, central=True))
    grad_rel = float(max(errs))

    checks = [("mc_rel_err", mc_rel, exp.mc_rel_tol),
              ("mc_z_score", mc_z, 3.0),
              ("grad_rel_err", grad_rel, exp.grad_rel_tol)]
    rows = [(name, value, limit, int(value < limit)) for name, value, limit in checks]
    for name, value, limit, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name} = {value:.3e} (< {limit:g})")
    text = render_csv(["metric", "value", "threshold", "passed"], rows, _meta(cfg, "validate"))
    failed = [r[0] for r in rows if not r[3]]
    return {"validate.csv": text}, failed


def _ao(cfg: RunConfig, workers: int, dump: bool):
    scene = build_scene(cfg)
    result = run_ao(scene.ops, scene.stats, cfg.ao_config(), workers=workers)
    best = result.best
    report = sinr_closed_form(compose(best.phases, scene.ops), scene.ops, scene.stats,
                              best.powers.p)
    g = scene.geometry
    meta = _meta(cfg, "ao")
    files = {
        "ao.csv": render_csv(rate_row_header(g.num_users),
                             [rate_row(0, g.num_atoms, g.num_layers, cfg.optimizer.P_T_dbm,
                                       cfg.seed, report.sinr, report.sum_se)], meta),
        "phase_trajectory.csv": render_csv(
            ["iteration", "objective", "step_size", "backtracks"],
            [(i, *row) for i, row in enumerate(best.phase_log)], meta),
        "power_trajectory.csv": render_csv(
            ["iteration", "sum_se", *[f"p_{k + 1}" for k in range(g.num_users)]],
            [(i, se, *p) for i, (se, p) in enumerate(best.power_log)], meta),
    }
    print(f"best sum SE {report.sum_se:.6f} bit/s/Hz (start {result.best_index + 1} "
          f"of {len(result.starts)})")
    binaries = {}
    if dump:
        binaries = {"W1.bin": scene.ops.input_mapping, "W.bin": scene.ops.layer_transfer,
                    "R.bin": scene.stats.correlation}
    return files, binaries


def _sweep(cfg: RunConfig, workers: int, axis: str):
    values = cfg.experiment.sweep_n_values if axis == "N" else cfg.experiment.sweep_l_values
    points = sweep(OperatorFactory(cfg, axis), StatisticsFactory(cfg, axis), values,
                   cfg.experiment.drops, cfg.ao_config(), workers)
    g = cfg.geometry
    rows = []
    for pt in points:
        n, l = (pt.value, g.L) if axis == "N" else (g.N_x * g.N_y, pt.value)
        rows.append((n, l, g.K, len(pt.sum_se), pt.mean, pt.std))
        print(f"{axis}={pt.value}: mean sum SE {pt.mean:.4f} bit/s/Hz over {len(pt.sum_se)} drops")
    name = "sweep_n.csv" if axis == "N" else "sweep_l.csv"
    header = ["N", "L", "K", "drops", "mean_sum_se", "std_sum_se"]
    if axis == "L":
        header[:2] = ["L", "N"]
        rows = [(r[1], r[0], *r[2:]) for r in rows]
    return {name: render_csv(header, rows, _meta(cfg, f"sweep-{axis.lower()}"))}


def _converge(cfg: RunConfig, workers: int):
    scene = build_scene(cfg)
    result = run_ao(scene.ops, scene.stats, cfg.ao_config(), workers=workers)
    trajs = result.trajectories
    length = max(len(t) for t in trajs)
    rows = [(i, *[t[i] if i < len(t) else None for t in trajs]) for i in range(length)]
    finals = [t[-1] for t in trajs]
    spread = (max(finals) - min(finals)) / max(finals)
    for j, s in enumerate(result.starts):
        print(f"start {j + 1}: {s.sum_se:.6f} bit/s/Hz after {s.iterations} iterations"
              f"{'' if s.converged else ' (iteration cap)'}")
    print(f"relative spread of final sum SE: {spread:.4f}")
    meta = _meta(cfg, "converge")
    meta["final_spread"] = repr(spread)
    header = ["iteration", *[f"start_{j + 1}" for j in range(len(trajs))]]
    return {"converge.csv": render_csv(header, rows, meta)}


def run(mode: str, cfg: RunConfig, out_dir: Path, workers: int = 1, dump: bool = False) -> int:
    """Execute one mode and write its artifacts; returns the exit status."""
    binaries = {}
    failed = []
    if mode == "validate":
        files, failed = _validate(cfg, workers)
    elif mode == "ao":
        files, binaries = _ao(cfg, workers, dump)
    elif mode in ("sweep-n", "sweep-l"):
        files = _sweep(cfg, workers, "N" if mode == "sweep-n" else "L")
    elif mode == "converge":
        files = _converge(cfg, workers)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    for name, matrix in binaries.items():
        dump_matrix(out_dir / name, matrix)
    (out_dir / "plot_figures.py").write_text(PLOT_SCRIPT)
    if failed:
        print(f"oracle failure: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("SIMWAVE_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid thread count {value!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simwave", description=__doc__)
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--out", help="output directory (overrides output.out_dir)")
    parser.add_argument("--threads", help="worker processes (default: $SIMWAVE_THREADS or 1)")
    parser.add_argument("--dump-operators", action="store_true",
                        help="ao mode: also write W1.bin, W.bin and R.bin")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        workers = _threads(args.threads)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig.model_validate({**cfg.model_dump(), "seed": args.seed})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid seed: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out or cfg.output.out_dir)
    return run(args.mode, cfg, out_dir, workers, args.dump_operators)


if __name__ == "__main__":
    sys.exit(main())
