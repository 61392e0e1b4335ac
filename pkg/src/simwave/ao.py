"""Alternating optimisation of phases and powers, multi-start and sweeps."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cascade import forward_beams, random_phases
from .metrics import beam_terms, coefficients_from_terms
from .phase_optimizer import LineSearchConfig, SumSEObjective, optimize_phases
from .power_optimizer import PowerAllocation, optimize_powers
from .propagation import ChannelStatistics, PropagationOperators

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AOConfig:
    tolerance: float = 1e-5
    max_outer_iters: int = 130
    num_starts: int = 5
    phase_max_iters: int = 50
    phase_tolerance: float = 1e-6
    power_max_iters: int = 50
    power_tolerance: float = 1e-8
    line_search: LineSearchConfig = LineSearchConfig()
    update_mode: str = "joint"
    power_budget: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.tolerance <= 0 or self.num_starts < 1 or self.max_outer_iters < 1:
            raise ValueError("need tolerance > 0, num_starts >= 1, max_outer_iters >= 1")


@dataclass
class StartResult:
    phases: np.ndarray
    powers: PowerAllocation
    trajectory: list               # sum SE before the first pass, then after each outer pass
    half_steps: list = field(default_factory=list)  # (after phases, after powers) per pass
    converged: bool = False
    phase_log: list = field(default_factory=list)  # (objective, step_size, backtracks) per PGA step
    power_log: list = field(default_factory=list)  # (sum_se, p) per WMMSE iteration

    @property
    def iterations(self) -> int:
        return len(self.trajectory) - 1

    @property
    def sum_se(self) -> float:
        return self.trajectory[-1]


@dataclass
class AOResult:
    starts: list

    @property
    def best_index(self) -> int:
        # first maximum, so ties resolve by start order
        return int(np.argmax([s.sum_se for s in self.starts]))

    @property
    def best(self) -> StartResult:
        return self.starts[self.best_index]

    @property
    def best_sum_se(self) -> float:
        return self.best.sum_se

    @property
    def trajectories(self) -> list:
        return [s.trajectory for s in self.starts]


def start_rng(seed: int, point_index: int, start_index: int) -> np.random.Generator:
    """Independent stream per (sweep point, start)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, point_index, start_index)))


def run_start(ops: PropagationOperators, stats: ChannelStatistics, config: AOConfig,
              rng: np.random.Generator) -> StartResult:
    k = stats.num_users
    phases = random_phases(ops.num_layers, ops.num_atoms, rng)
    alloc = PowerAllocation.uniform(k, config.power_budget)
    value = SumSEObjective(ops, stats, alloc.p).value(phases)
    result = StartResult(phases, alloc, [value])
    for _ in range(config.max_outer_iters):
        objective = SumSEObjective(ops, stats, alloc.p)
        phases, ptraj = optimize_phases(phases, objective, config.phase_tolerance,
                                        config.phase_max_iters, config.line_search,
                                        config.update_mode)
        # same evaluation path as the phase objective, so the power block
        # starts from exactly the value the phase block ended on
        _, beams = forward_beams(phases, ops, k)
        coeffs = coefficients_from_terms(beam_terms(beams, stats), stats)
        alloc, wtraj = optimize_powers(coeffs, alloc.p, config.power_budget,
                                       config.power_tolerance, config.power_max_iters)
        new_value = wtraj.sum_se[-1]
        result.phase_log.extend(zip(ptraj.objective[1:], ptraj.step_size[1:], ptraj.backtracks[1:]))
        result.power_log.extend(zip(wtraj.sum_se[1:], wtraj.powers[1:]))
        result.half_steps.append((ptraj.objective[-1], new_value))
        result.trajectory.append(new_value)
        result.phases, result.powers = phases, alloc
        if abs(new_value - value) < config.tolerance:
            result.converged = True
            break
        value = new_value
    log.debug("start finished after %d passes, sum SE %.6f", result.iterations, result.sum_se)
    return result


def _start_job(args):
    ops, stats, config, point_index, start_index = args
    return run_start(ops, stats, config, start_rng(config.seed, point_index, start_index))


def run_ao(ops: PropagationOperators, stats: ChannelStatistics, config: AOConfig = AOConfig(),
           point_index: int = 0, workers: int = 1) -> AOResult:
    """Multi-start alternating optimisation; keeps every start, reports the best."""
    jobs = [(ops, stats, config, point_index, s) for s in range(config.num_starts)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            starts = list(pool.map(_start_job, jobs))
    else:
        starts = [_start_job(j) for j in jobs]
    return AOResult(starts)


@dataclass
class SweepPoint:
    value: int
    sum_se: list  # best sum SE per drop

    @property
    def mean(self) -> float:
        return float(np.mean(self.sum_se))

    @property
    def std(self) -> float:
        return float(np.std(self.sum_se))


def _sweep_job(args):
    make_ops, make_stats, value, point_index, drop, config = args
    ops = make_ops(value)
    stats = make_stats(value, drop)
    # same start stream per drop across axis values: common random numbers
    return run_ao(ops, stats, config, point_index=drop).best_sum_se


def sweep(make_ops, make_stats, values, drops: int, config: AOConfig = AOConfig(),
          workers: int = 1) -> list:
    """Mean best sum SE over independent user drops for each axis value.

    ``make_ops(value)`` builds the operators and ``make_stats(value, drop)``
    the channel statistics of one drop; both must be picklable when
    ``workers > 1``.
    """
    jobs = [(make_ops, make_stats, v, i, d, config)
            for i, v in enumerate(values) for d in range(drops)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            best = list(pool.map(_sweep_job, jobs))
    else:
        best = [_sweep_job(j) for j in jobs]
    return [SweepPoint(v, best[i * drops:(i + 1) * drops]) for i, v in enumerate(values)]
