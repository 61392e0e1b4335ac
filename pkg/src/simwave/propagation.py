"""Diffraction operators, spatial correlation and correlated Rician channels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (SimGeometry, UserLayout, antenna_to_layer_distances,
                       element_positions, inter_layer_distances, path_loss,
                       world_positions)

THERMAL_NOISE_DBM_PER_HZ = -174.0


def diffraction_coefficient(atom_area, cos_x, r, wavelength):
    """Rayleigh-Sommerfeld transmission coefficient between two meta-atoms.

    Vectorised over ``cos_x`` and ``r``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("propagation distance must be positive")
    w = (atom_area * np.asarray(cos_x) / r) * (1 / (2 * np.pi * r) - 1j / wavelength) \
        * np.exp(2j * np.pi * r / wavelength)
    return complex(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class PropagationOperators:
    """Fixed wave-domain operators of a SIM.

    ``layer_transfer`` is shared by every layer pair (uniform spacing);
    column ``m`` of ``input_mapping`` couples antenna ``m`` to layer 1.
    """
    layer_transfer: np.ndarray  # (N, N)
    input_mapping: np.ndarray   # (N, N_t)
    num_layers: int

    @property
    def num_atoms(self) -> int:
        return self.layer_transfer.shape[0]

    def layer(self, l: int) -> np.ndarray:
        """Transfer matrix into layer ``l`` (2 <= l <= L)."""
        if not 2 <= l <= self.num_layers:
            raise ValueError(f"layer index {l} outside 2..{self.num_layers}")
        return self.layer_transfer


def build_operators(geometry: SimGeometry) -> PropagationOperators:
    d = inter_layer_distances(geometry)
    w = diffraction_coefficient(geometry.atom_area, geometry.layer_spacing / d, d,
                                geometry.wavelength)
    d1 = antenna_to_layer_distances(geometry)
    w1 = diffraction_coefficient(geometry.atom_area, geometry.layer_spacing / d1, d1,
                                 geometry.wavelength)
    return PropagationOperators(np.atleast_2d(w), np.atleast_2d(w1), geometry.num_layers)


def correlation_matrix(geometry: SimGeometry) -> np.ndarray:
    """Isotropic-scattering sinc correlation between the atoms of a layer."""
    u = element_positions(geometry)
    dist = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=-1)
    return np.sinc(2 * dist / geometry.wavelength).astype(complex)


def correlation_sqrt(R: np.ndarray) -> np.ndarray:
    """Factor ``S`` with ``S S^H = R``; negative eigenvalues are clipped to 0.

    The sinc kernel is rank deficient on half-wavelength grids, so Cholesky
    is not an option.
    """
    R = (R + R.conj().T) / 2
    eigval, eigvec = np.linalg.eigh(R)
    if eigval.min() < -1e-12 * max(1.0, eigval.max()):
        raise ValueError("correlation matrix is not positive semidefinite")
    return eigvec * np.sqrt(np.clip(eigval, 0, None))


def los_vector(user_position, geometry: SimGeometry) -> np.ndarray:
    """Spherical-wavefront steering vector from the last layer to a user."""
    r = np.linalg.norm(world_positions(geometry) - np.asarray(user_position, dtype=float), axis=1)
    return np.exp(-2j * np.pi * r / geometry.wavelength)


def noise_variance(bandwidth_hz: float, noise_figure_db: float = 0.0) -> float:
    """Thermal noise power in watts."""
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10 * np.log10(bandwidth_hz) + noise_figure_db
    return 10 ** ((dbm - 30) / 10)


@dataclass(frozen=True)
class ChannelStatistics:
    """Second-order statistics of the last-layer-to-user channels.

    ``los`` stores one steering vector per column (N x K).
    """
    kappa: np.ndarray           # (K,)
    beta: np.ndarray            # (K,)
    los: np.ndarray             # (N, K)
    correlation: np.ndarray     # (N, N)
    noise_variance: np.ndarray  # (K,)
    correlation_sqrt: np.ndarray

    @classmethod
    def create(cls, kappa, beta, los, correlation, noise_var):
        los = np.asarray(los, dtype=complex)
        k = los.shape[1]
        return cls(np.broadcast_to(np.asarray(kappa, float), (k,)).copy(),
                   np.broadcast_to(np.asarray(beta, float), (k,)).copy(),
                   los, np.asarray(correlation, dtype=complex),
                   np.broadcast_to(np.asarray(noise_var, float), (k,)).copy(),
                   correlation_sqrt(np.asarray(correlation, dtype=complex)))

    @property
    def num_users(self) -> int:
        return self.los.shape[1]

    @property
    def effective_noise(self) -> np.ndarray:
        """Noise normalised by the NLoS power, ``sigma^2 (1 + kappa) / beta``."""
        return self.noise_variance * (1 + self.kappa) / self.beta

    def mean(self) -> np.ndarray:
        """E{h_k} as an (N, K) matrix."""
        return self.los * np.sqrt(self.beta * self.kappa / (1 + self.kappa))

    def covariance(self, k: int) -> np.ndarray:
        return self.beta[k] / (1 + self.kappa[k]) * self.correlation


def channel_statistics(geometry: SimGeometry, layout: UserLayout, kappa=1.0,
                       noise_var: float | None = None, alpha: float = 2.5,
                       bandwidth_hz: float = 20e6, noise_figure_db: float = 0.0) -> ChannelStatistics:
    los = np.stack([los_vector(x, geometry) for x in layout.positions], axis=1)
    beta = path_loss(layout.distances, geometry.wavelength, alpha)
    if noise_var is None:
        noise_var = noise_variance(bandwidth_hz, noise_figure_db)
    return ChannelStatistics.create(kappa, beta, los, correlation_matrix(geometry), noise_var)


def sample_channels(stats: ChannelStatistics, rng: np.random.Generator,
                    num_samples: int | None = None) -> np.ndarray:
    """Draw channel realisations ``h_k``.

    Returns an (N, K) matrix, or (num_samples, N, K) when ``num_samples``
    is given. Users and draws are independent.
    """
    n, k = stats.los.shape
    shape = (1 if num_samples is None else num_samples, n, k)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    nlos = stats.correlation_sqrt @ z
    kap = stats.kappa
    h = np.sqrt(stats.beta) * (np.sqrt(kap / (1 + kap)) * stats.los + np.sqrt(1 / (1 + kap)) * nlos)
    return h[0] if num_samples is None else h
