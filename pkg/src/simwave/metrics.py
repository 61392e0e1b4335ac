"""Statistical-CSI SINR, sum spectral efficiency and a Monte-Carlo check.

Everything is expressed after dividing the use-and-then-forget SINR by
``beta_k / (1 + kappa_k)``, so the noise enters as ``sigma^2 (1+kappa)/beta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import CascadeState, effective_input_response
from .propagation import ChannelStatistics, PropagationOperators, sample_channels


@dataclass(frozen=True)
class RateReport:
    numerators: np.ndarray
    denominators: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        return self.numerators / self.denominators

    @property
    def per_user_se(self) -> np.ndarray:
        return np.log2(1 + self.sinr)

    @property
    def sum_se(self) -> float:
        return sum_se(self)


@dataclass(frozen=True)
class LinkTerms:
    """Power-independent quantities shared by the SINR and its gradient.

    ``cross[k, i] = h_{k,LoS}^H G w^1_i`` and ``scatter[i] = g_i^H R g_i``.
    """
    beams: np.ndarray    # (N, K) columns g_i = G w^1_i
    cross: np.ndarray    # (K, K)
    scatter: np.ndarray  # (K,)


def link_terms(state: CascadeState, ops: PropagationOperators,
               stats: ChannelStatistics) -> LinkTerms:
    return beam_terms(effective_input_response(state, ops)[:, :stats.num_users], stats)


def beam_terms(beams: np.ndarray, stats: ChannelStatistics) -> LinkTerms:
    cross = stats.los.conj().T @ beams
    # quadratic form instead of tr(G w w^H G^H R)
    scatter = np.einsum("ni,ni->i", beams.conj(), stats.correlation @ beams).real
    return LinkTerms(beams, cross, scatter)


def _check_powers(p, k):
    p = np.asarray(p, dtype=float)
    if p.shape != (k,) or not np.all(np.isfinite(p)):
        raise ValueError(f"power vector must be {k} finite values")
    return p


@dataclass(frozen=True)
class WmmseCoefficients:
    """SINR as ``p_k q_k / (sum_i C[k, i] p_i + u2_k)``.

    ``C[k, k]`` holds only the scattering term; the line-of-sight self term
    of user ``k`` lives in ``q_k``.
    """
    q: np.ndarray
    C: np.ndarray
    u2: np.ndarray

    @property
    def num_users(self) -> int:
        return self.q.size

    def report(self, p) -> RateReport:
        p = _check_powers(p, self.num_users)
        return RateReport(p * self.q, self.C @ p + self.u2)

    def sum_se(self, p) -> float:
        return self.report(p).sum_se


def wmmse_coefficients(state: CascadeState, ops: PropagationOperators,
                       stats: ChannelStatistics, terms: LinkTerms | None = None) -> WmmseCoefficients:
    return coefficients_from_terms(terms or link_terms(state, ops, stats), stats)


def coefficients_from_terms(terms: LinkTerms, stats: ChannelStatistics) -> WmmseCoefficients:
    los_power = stats.kappa[:, None] * np.abs(terms.cross) ** 2
    q = np.diag(los_power).copy()
    C = terms.scatter[None, :] + los_power
    np.fill_diagonal(C, terms.scatter)
    return WmmseCoefficients(q, C, stats.effective_noise)


def sinr_closed_form(state: CascadeState, ops: PropagationOperators,
                     stats: ChannelStatistics, p) -> RateReport:
    return wmmse_coefficients(state, ops, stats).report(p)


def sum_se(report: RateReport) -> float:
    return float(np.sum(np.log2(1 + report.sinr)))


@dataclass(frozen=True)
class MonteCarloSinr:
    sinr: np.ndarray
    stderr: np.ndarray
    num_samples: int


def sinr_uatf_mc(state: CascadeState, ops: PropagationOperators, stats: ChannelStatistics,
                 p, num_samples: int, rng: np.random.Generator,
                 block_size: int = 10_000) -> MonteCarloSinr:
    """Sample-average estimate of the use-and-then-forget SINR.

    The same channel draws feed the numerator and the denominator. Standard
    errors come from the delta method on the sample means of
    ``(Re z_kk, Im z_kk, sum_i p_i |z_ki|^2)``, ``z_ki = h_k^H G w^1_i``.
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    k = stats.num_users
    p = _check_powers(p, k)
    beams = effective_input_response(state, ops)[:, :k]

    # per user: running sums of x and x x^T for x = (Re z_kk, Im z_kk, received power)
    s1 = np.zeros((k, 3))
    s2 = np.zeros((k, 3, 3))
    done = 0
    while done < num_samples:
        m = min(block_size, num_samples - done)
        h = sample_channels(stats, rng, m)                    # (m, N, K)
        z = np.einsum("snk,ni->ski", h.conj(), beams)         # (m, K, K)
        diag = z[:, np.arange(k), np.arange(k)]
        x = np.stack([diag.real, diag.imag, (np.abs(z) ** 2) @ p], axis=-1)  # (m, K, 3)
        s1 += x.sum(axis=0)
        s2 += np.einsum("ska,skb->kab", x, x)
        done += m

    mean = s1 / num_samples
    sinr = np.empty(k)
    stderr = np.full(k, np.nan)
    for u in range(k):
        a, b, total = mean[u]
        signal = p[u] * (a * a + b * b)
        den = total - signal + stats.noise_variance[u]
        sinr[u] = signal / den
        if num_samples > 1:
            cov = (s2[u] - num_samples * np.outer(mean[u], mean[u])) / (num_samples - 1)
            d_signal = (total + stats.noise_variance[u]) / den ** 2
            grad = np.array([2 * p[u] * a * d_signal, 2 * p[u] * b * d_signal, -signal / den ** 2])
            stderr[u] = np.sqrt(max(grad @ cov @ grad, 0.0) / num_samples)
    return MonteCarloSinr(sinr, stderr, num_samples)
