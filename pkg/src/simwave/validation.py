"""Independent checks of the closed forms: Monte-Carlo SINR and finite differences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import compose
from .metrics import sinr_closed_form, sinr_uatf_mc


@dataclass(frozen=True)
class McCheck:
    closed_form: np.ndarray
    monte_carlo: np.ndarray
    stderr: np.ndarray

    @property
    def rel_err(self) -> np.ndarray:
        return np.abs(self.monte_carlo - self.closed_form) / self.closed_form

    @property
    def z_score(self) -> np.ndarray:
        return np.abs(self.monte_carlo - self.closed_form) / self.stderr


def mc_check(phases, ops, stats, p, num_samples: int, rng) -> McCheck:
    state = compose(phases, ops)
    closed = sinr_closed_form(state, ops, stats, p).sinr
    mc = sinr_uatf_mc(state, ops, stats, p, num_samples, rng)
    return McCheck(closed, mc.sinr, mc.stderr)


def directional_error(f, grad, x, direction, eps: float, central: bool = False) -> float:
    """Relative error between a finite difference of ``f`` along ``direction``
    and the Wirtinger prediction ``2 Re <grad, direction>``."""
    predicted = 2 * np.vdot(grad, direction).real
    if central:
        measured = (f(x + eps * direction) - f(x - eps * direction)) / (2 * eps)
    else:
        measured = (f(x + eps * direction) - f(x)) / eps
    return abs(measured - predicted) / abs(predicted)


def unit_direction(shape, rng) -> np.ndarray:
    d = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return d / np.linalg.norm(d)
