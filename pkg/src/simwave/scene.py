"""Turn a run configuration into operators and channel statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SimGeometry, drop_users
from .propagation import (ChannelStatistics, PropagationOperators, build_operators,
                          channel_statistics)


@dataclass(frozen=True)
class Scene:
    geometry: SimGeometry
    ops: PropagationOperators
    stats: ChannelStatistics


def grid_shape(num_atoms: int) -> tuple:
    """``(N_x, N_y)`` with ``N_y`` the largest divisor of N not above sqrt(N)."""
    n_y = max(d for d in range(1, int(np.sqrt(num_atoms)) + 1) if num_atoms % d == 0)
    return num_atoms // n_y, n_y


def drop_rng(seed: int, drop: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, drop)))


def make_geometry(cfg, num_atoms: int | None = None, num_layers: int | None = None) -> SimGeometry:
    g = cfg.geometry
    n_x, n_y = (g.N_x, g.N_y) if num_atoms is None else grid_shape(num_atoms)
    return SimGeometry.from_frequency(g.frequency_hz, g.N_t, g.K, num_layers or g.L, n_x, n_y,
                                      g.T_SIM_wavelengths, g.H_BS_m)


def make_stats(cfg, geometry: SimGeometry, drop: int) -> ChannelStatistics:
    g, c = cfg.geometry, cfg.channel
    seed = cfg.seed if c.seed is None else c.seed
    layout = drop_users(geometry, g.r_min_m, g.r_max_m, drop_rng(seed, drop))
    return channel_statistics(geometry, layout, kappa=c.kappa, alpha=g.alpha,
                              bandwidth_hz=c.bandwidth_hz, noise_figure_db=c.noise_figure_db)


def build_scene(cfg, drop: int = 0, num_atoms: int | None = None,
                num_layers: int | None = None) -> Scene:
    geometry = make_geometry(cfg, num_atoms, num_layers)
    return Scene(geometry, build_operators(geometry), make_stats(cfg, geometry, drop))


class OperatorFactory:
    """Picklable ``value -> operators`` for one sweep axis ("N" or "L")."""

    def __init__(self, cfg, axis: str):
        self.cfg, self.axis = cfg, axis

    def geometry(self, value):
        if self.axis == "N":
            return make_geometry(self.cfg, num_atoms=value)
        return make_geometry(self.cfg, num_layers=value)

    def __call__(self, value):
        return build_operators(self.geometry(value))


class StatisticsFactory(OperatorFactory):
    """Picklable ``(value, drop) -> statistics``; users depend on the drop only."""

    def __call__(self, value, drop):
        return make_stats(self.cfg, self.geometry(value), drop)
