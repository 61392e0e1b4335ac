"""Weighted-MMSE power allocation under a total power budget."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import WmmseCoefficients


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray
    budget: float

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("power budget must be positive")
        if np.any(self.p < 0) or self.p.sum() > self.budget * (1 + 1e-9):
            raise ValueError("power allocation violates p >= 0, sum(p) <= P_T")

    @classmethod
    def uniform(cls, num_users: int, budget: float) -> "PowerAllocation":
        return cls(np.full(num_users, budget / num_users), budget)


@dataclass(frozen=True)
class WmmseState:
    v: np.ndarray
    d: np.ndarray
    e: np.ndarray


def mmse_receiver(coeffs: WmmseCoefficients, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    signal = p * coeffs.q
    return np.sqrt(signal) / (signal + coeffs.C @ p + coeffs.u2)


def mse(coeffs: WmmseCoefficients, p, v) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    total = p * coeffs.q + coeffs.C @ p + coeffs.u2
    return v ** 2 * total - 2 * v * np.sqrt(coeffs.q * p) + 1


def update_weights(e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise ValueError("MSE values must be positive")
    return 1 / e


def wmmse_objective(coeffs: WmmseCoefficients, p, v, d) -> float:
    """``sum_k d_k e_k - ln d_k``, which the power block minimises."""
    d = np.asarray(d, dtype=float)
    return float(np.sum(d * mse(coeffs, p, v) - np.log(d)))


def update_powers(coeffs: WmmseCoefficients, v, d, budget: float,
                  rtol: float = 1e-8) -> PowerAllocation:
    """Minimise the weighted MSE over ``p`` with ``v`` and ``d`` held fixed.

    In amplitudes ``s_k = sqrt(p_k)`` the problem is a convex quadratic:
    ``s_k = d_k v_k sqrt(q_k) / (q_k d_k v_k^2 + sum_j d_j v_j^2 C[j, k] + eta)``
    with the budget multiplier ``eta >= 0`` found by Newton's method on the
    (convex, decreasing) total power.
    """
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    k = coeffs.num_users
    num = d * v * np.sqrt(coeffs.q)
    den = coeffs.q * d * v ** 2 + coeffs.C.T @ (d * v ** 2)
    if not np.any(den > 0):
        return PowerAllocation.uniform(k, budget)
    live = num > 0
    num, den = num[live], den[live]

    def excess(eta):
        return np.sum((num / (den + eta)) ** 2) - budget

    eta = 0.0
    if excess(0.0) > 0:
        # iterates approach the root from below, so the total stays above budget
        for _ in range(100):
            s = num / (den + eta)
            f = np.sum(s ** 2) - budget
            if f <= rtol * budget:
                break
            eta += f / (2 * np.sum(s ** 2 / (den + eta)))
    p = np.zeros(k)
    p[live] = np.minimum(budget, (num / (den + eta)) ** 2)
    total = p.sum()
    if total > budget:
        p *= budget / total
    return PowerAllocation(p, budget)


@dataclass
class PowerTrajectory:
    sum_se: list = field(default_factory=list)
    powers: list = field(default_factory=list)

    def rows(self):
        return [(i, s, *p) for i, (s, p) in enumerate(zip(self.sum_se, self.powers))]


def _wmmse_path(coeffs: WmmseCoefficients, p, budget: float, tol: float, max_iters: int):
    value = coeffs.sum_se(p)
    traj = PowerTrajectory([value], [p.copy()])
    for _ in range(max_iters):
        v = mmse_receiver(coeffs, p)
        d = update_weights(mse(coeffs, p, v))
        new_p = update_powers(coeffs, v, d, budget).p
        new_value = coeffs.sum_se(new_p)
        if new_value < value:
            break
        gain = new_value - value
        p, value = new_p, new_value
        traj.sum_se.append(value)
        traj.powers.append(p.copy())
        if gain < tol:
            break
    return p, traj


def restart_points(num_users: int, budget: float) -> list:
    """Uniform split and every single-user vertex of the budget simplex."""
    return [np.full(num_users, budget / num_users), *(budget * np.eye(num_users))]


def optimize_powers(coeffs: WmmseCoefficients, p0, budget: float,
                    tol: float = 1e-8, max_iters: int = 50, restarts: bool = True):
    """Cycle receiver, weight and power updates while the sum SE improves.

    An update that would lower the sum SE is discarded and the loop stops,
    so the returned trajectory never decreases. WMMSE only finds a local
    optimum; with ``restarts`` the loop is rerun from ``restart_points`` and
    a strictly better end point is appended to the trajectory as one jump.
    """
    p = np.asarray(p0, dtype=float)
    PowerAllocation(p, budget)
    p, traj = _wmmse_path(coeffs, p, budget, tol, max_iters)
    if restarts and coeffs.num_users > 1:
        for start in restart_points(coeffs.num_users, budget):
            alt, alt_traj = _wmmse_path(coeffs, start, budget, tol, max_iters)
            if alt_traj.sum_se[-1] > traj.sum_se[-1]:
                p = alt
                traj.sum_se.append(alt_traj.sum_se[-1])
                traj.powers.append(alt.copy())
    return PowerAllocation(p, budget), traj
