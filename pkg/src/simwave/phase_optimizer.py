"""Projected gradient ascent over the unit-modulus phase shifts.

Gradients are Wirtinger derivatives with respect to the conjugate phases,
so a real objective changes as ``df = 2 Re <grad, dphi>`` with
``<a, b> = a^H b``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cascade import CascadeState, backward_apply, forward_beams
from .metrics import LinkTerms, beam_terms, coefficients_from_terms, link_terms
from .propagation import ChannelStatistics, PropagationOperators

log = logging.getLogger(__name__)

LOG2E = np.log2(np.e)


@dataclass(frozen=True)
class LineSearchConfig:
    initial_step: float = 1.0
    shrink: float = 0.5
    max_backtracks: int = 30
    warm_start: bool = True  # next trial step = 2 * last accepted step

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.initial_step <= 0 or self.max_backtracks < 1:
            raise ValueError("initial_step must be > 0 and max_backtracks >= 1")


@dataclass(frozen=True)
class GradientBundle:
    """Per-layer gradients; arrays are (L, K, N) for the user terms."""
    numerator: np.ndarray
    denominator: np.ndarray
    objective: np.ndarray  # (L, N)


def _layer_factors(state: CascadeState, ops: PropagationOperators,
                   stats: ChannelStatistics, terms: LinkTerms, l: int):
    """``C_l W^1``, ``A_l^H H_LoS`` and ``A_l^H R G W^1`` for 0-based layer ``l``."""
    k = stats.num_users
    a_h = state.suffix[l].conj().T
    inner = state.prefix[l] @ ops.input_mapping[:, :k]
    return inner, a_h @ stats.los, a_h @ (stats.correlation @ terms.beams)


def grad_D(k: int, l: int, state: CascadeState, ops: PropagationOperators,
           stats: ChannelStatistics, p) -> np.ndarray:
    """Gradient of the signal term of user ``k`` w.r.t. layer ``l`` (both 0-based)."""
    terms = link_terms(state, ops, stats)
    inner, back_los, _ = _layer_factors(state, ops, stats, terms, l)
    return p[k] * stats.kappa[k] * terms.cross[k, k] * back_los[:, k] * inner[:, k].conj()


def grad_I(k: int, l: int, state: CascadeState, ops: PropagationOperators,
           stats: ChannelStatistics, p) -> np.ndarray:
    """Gradient of the interference-plus-noise term of user ``k`` w.r.t. layer ``l``."""
    terms = link_terms(state, ops, stats)
    inner, back_los, back_scatter = _layer_factors(state, ops, stats, terms, l)
    p = np.asarray(p, dtype=float)
    g = (inner.conj() * back_scatter) @ p
    others = np.arange(stats.num_users) != k
    weights = p[others] * stats.kappa[k] * terms.cross[k, others]
    return g + back_los[:, k] * (inner[:, others].conj() @ weights)


def _assemble(factors, terms: LinkTerms, stats: ChannelStatistics, p,
              per_user: bool = True) -> GradientBundle:
    """Combine per-layer factors ``(inner, back_los, back_scatter)`` into gradients."""
    p = np.asarray(p, dtype=float)
    k = stats.num_users
    coeffs = coefficients_from_terms(terms, stats)
    D = p * coeffs.q
    I = coeffs.C @ p + coeffs.u2
    w_num = LOG2E / (I + D)
    w_den = -LOG2E * D / (I * (I + D))

    off = ~np.eye(k, dtype=bool)
    # los_w[k, i]: weight of back_los[:, k] * conj(inner[:, i]) inside dI_k
    los_w = np.where(off, stats.kappa[:, None] * terms.cross * p[None, :], 0)
    sig_w = p * stats.kappa * np.diag(terms.cross)
    # objective weights folded into one K x K matrix
    total_w = w_den[:, None] * los_w + np.diag(w_num * sig_w)

    num_layers = len(factors)
    n = terms.beams.shape[0]
    total = np.empty((num_layers, n), dtype=complex)
    grad_num = np.empty((num_layers, k, n), dtype=complex) if per_user else None
    grad_den = np.empty((num_layers, k, n), dtype=complex) if per_user else None
    for l, (inner, back_los, back_scatter) in enumerate(factors):
        inner_c = inner.conj()
        scatter = (inner_c * back_scatter) @ p
        total[l] = w_den.sum() * scatter + np.sum(back_los * (inner_c @ total_w.T), axis=1)
        if per_user:
            grad_num[l] = (sig_w * back_los * inner_c).T
            grad_den[l] = scatter[None, :] + (back_los * (inner_c @ los_w.T)).T
    return GradientBundle(grad_num, grad_den, total)


def grad_objective(state: CascadeState, ops: PropagationOperators,
                   stats: ChannelStatistics, p, terms: LinkTerms | None = None) -> GradientBundle:
    """Gradient of ``sum_k log2(1 + D_k / I_k)`` for every layer.

    Uses ``log2(e) (I dD - D dI) / (I^2 (1 + gamma))`` per user.
    """
    terms = terms or link_terms(state, ops, stats)
    factors = [_layer_factors(state, ops, stats, terms, l) for l in range(state.phases.shape[0])]
    return _assemble(factors, terms, stats, p)


def project_unit_modulus(u) -> np.ndarray:
    """Entry-wise projection onto the unit circle; zeros map to ``1 + 0j``."""
    u = np.asarray(u, dtype=complex)
    mag = np.abs(u)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, u / safe, 1.0 + 0j)


class SumSEObjective:
    """Sum SE as a function of the phase state for fixed powers."""

    def __init__(self, ops: PropagationOperators, stats: ChannelStatistics, p):
        self.ops = ops
        self.stats = stats
        self.p = np.asarray(p, dtype=float)

    def value(self, phases) -> float:
        _, beams = forward_beams(phases, self.ops, self.stats.num_users)
        coeffs = coefficients_from_terms(beam_terms(beams, self.stats), self.stats)
        return coeffs.sum_se(self.p)

    def value_and_grad(self, phases):
        """Objective and its gradient via matrix-free forward/backward chains."""
        stats = self.stats
        inner, beams = forward_beams(phases, self.ops, stats.num_users)
        terms = beam_terms(beams, stats)
        value = coefficients_from_terms(terms, stats).sum_se(self.p)
        # one backward sweep for both the LoS and the scattering factors
        back = backward_apply(phases, self.ops,
                              np.hstack([stats.los, stats.correlation @ beams]))
        k = stats.num_users
        factors = [(x, b[:, :k], b[:, k:]) for x, b in zip(inner, back)]
        return value, _assemble(factors, terms, stats, self.p, per_user=False).objective


@dataclass(frozen=True)
class PgaStep:
    phases: np.ndarray
    step: float
    value: float
    backtracks: int


def pga_step(phases, grad, value: float, objective, ls: LineSearchConfig,
             initial_step: float | None = None) -> PgaStep:
    """One projected ascent step with Armijo-Goldstein backtracking.

    A trial ``x = P(phi + mu grad)`` is accepted once
    ``f(x) >= f(phi) + 2 Re <grad, x - phi> - |x - phi|^2 / mu``. If no
    trial is accepted the input phases come back with ``step = 0``.
    """
    mu = ls.initial_step if initial_step is None else initial_step
    if not np.any(grad):
        return PgaStep(phases, 0.0, value, 0)
    for m in range(ls.max_backtracks + 1):
        trial = project_unit_modulus(phases + mu * grad)
        delta = trial - phases
        model = value + 2 * np.vdot(grad, delta).real - np.vdot(delta, delta).real / mu
        f_trial = objective.value(trial)
        # second test guards against rounding in the quadratic model
        if f_trial >= model and f_trial >= value:
            return PgaStep(trial, mu, f_trial, m)
        mu *= ls.shrink
    return PgaStep(phases, 0.0, value, ls.max_backtracks)


@dataclass
class PhaseTrajectory:
    objective: list = field(default_factory=list)
    step_size: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)

    def rows(self):
        return [(i, f, s, b) for i, (f, s, b) in
                enumerate(zip(self.objective, self.step_size, self.backtracks))]


def optimize_phases(phases0, objective, tol: float = 1e-6, max_iters: int = 50,
                    ls: LineSearchConfig = LineSearchConfig(), mode: str = "joint"):
    """Iterate ``pga_step`` until the objective gain drops below ``tol``.

    ``objective`` needs ``value(phases)`` and ``value_and_grad(phases)``.
    ``mode="cyclic"`` updates one layer per step, cycling through layers
    within an iteration. Returns the best phases and the trajectory, whose
    first entry is the starting value.
    """
    if mode not in ("joint", "cyclic"):
        raise ValueError(f"unknown update mode {mode!r}")
    phases = project_unit_modulus(np.atleast_2d(phases0))
    value, grad = objective.value_and_grad(phases)
    traj = PhaseTrajectory([value], [0.0], [0])
    step = ls.initial_step
    for _ in range(max_iters):
        start = value
        if mode == "joint":
            res = pga_step(phases, grad, value, objective, ls, step)
            accepted, last = res.step, res.backtracks
            phases, value = res.phases, res.value
            if res.step > 0 and ls.warm_start:
                step = 2 * res.step
        else:
            accepted, last = 0.0, 0
            for l in range(phases.shape[0]):
                if l > 0:
                    value, grad = objective.value_and_grad(phases)
                masked = np.zeros_like(grad)
                masked[l] = grad[l]
                res = pga_step(phases, masked, value, objective, ls, step)
                phases, value = res.phases, res.value
                last += res.backtracks
                if res.step > 0:
                    accepted = res.step
                    if ls.warm_start:
                        step = 2 * res.step
        traj.objective.append(value)
        traj.step_size.append(accepted)
        traj.backtracks.append(last)
        if accepted == 0 or abs(value - start) < tol:
            break
        value, grad = objective.value_and_grad(phases)
    return phases, traj
