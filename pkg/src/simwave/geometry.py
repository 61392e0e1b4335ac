"""Physical layout of the base station, the stacked metasurface and the users.

Conventions: atoms are indexed ``1..N`` row-major, ``N_x`` atoms per row.
Every layer lies in a plane parallel to the y-z plane; the stack axis is x
and the users sit in the half-space x > 0 at ground level (z = 0). The
centre of each layer is at height ``bs_height``. All quantities are SI.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SimGeometry:
    num_antennas: int
    num_users: int
    num_layers: int
    atoms_per_row: int
    atoms_per_col: int
    wavelength: float
    sim_thickness: float
    bs_height: float = 10.0

    def __post_init__(self):
        for name in ("num_antennas", "num_users", "num_layers", "atoms_per_row", "atoms_per_col"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("wavelength", "sim_thickness", "bs_height"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.num_users > self.num_antennas:
            # stream k is radiated by antenna k
            raise ValueError("num_users cannot exceed num_antennas")

    @classmethod
    def from_frequency(cls, frequency_hz: float, num_antennas: int, num_users: int,
                       num_layers: int, atoms_per_row: int, atoms_per_col: int,
                       thickness_wavelengths: float = 5.0, bs_height: float = 10.0) -> "SimGeometry":
        wavelength = SPEED_OF_LIGHT / frequency_hz
        return cls(num_antennas, num_users, num_layers, atoms_per_row, atoms_per_col,
                   wavelength, thickness_wavelengths * wavelength, bs_height)

    @property
    def num_atoms(self) -> int:
        return self.atoms_per_row * self.atoms_per_col

    @property
    def element_spacing(self) -> float:
        return self.wavelength / 2

    @property
    def atom_area(self) -> float:
        return (self.wavelength / 2) ** 2

    @property
    def layer_spacing(self) -> float:
        return self.sim_thickness / self.num_layers


@dataclass(frozen=True)
class UserLayout:
    positions: np.ndarray   # (K, 3)
    horizontal: np.ndarray  # (K,) ground distance to the point below the SIM centre
    distances: np.ndarray   # (K,) 3-D distance to the SIM centre


def _check_atom(n, geometry):
    if not 1 <= n <= geometry.num_atoms:
        raise ValueError(f"atom index {n} outside 1..{geometry.num_atoms}")


def grid_indices(n, atoms_per_row):
    """Horizontal and vertical grid indices of (1-based) atom ``n``."""
    n = np.asarray(n)
    return np.mod(n - 1, atoms_per_row), (n - 1) // atoms_per_row


def element_position(n: int, geometry: SimGeometry) -> np.ndarray:
    """Local position ``[0, i d_H, j d_V]`` of atom ``n`` within its layer."""
    _check_atom(n, geometry)
    i, j = grid_indices(n, geometry.atoms_per_row)
    d = geometry.element_spacing
    return np.array([0.0, i * d, j * d])


def element_positions(geometry: SimGeometry) -> np.ndarray:
    n = np.arange(1, geometry.num_atoms + 1)
    i, j = grid_indices(n, geometry.atoms_per_row)
    d = geometry.element_spacing
    return np.stack([np.zeros(n.size), i * d, j * d], axis=1)


def world_positions(geometry: SimGeometry) -> np.ndarray:
    """Atom positions of a layer centred on ``(0, 0, bs_height)``."""
    local = element_positions(geometry)
    d = geometry.element_spacing
    local[:, 1] -= (geometry.atoms_per_row - 1) / 2 * d
    local[:, 2] += geometry.bs_height - (geometry.atoms_per_col - 1) / 2 * d
    return local


def intra_layer_offset(n: int, n_tilde: int, geometry: SimGeometry) -> float:
    """Lateral offset between atoms ``n`` and ``n_tilde`` of adjacent layers.

    Follows the index-difference formula used for the inter-layer
    coefficients, which depends on ``|n - n_tilde|`` only.
    """
    _check_atom(n, geometry)
    _check_atom(n_tilde, geometry)
    return float(intra_layer_offsets(geometry)[n - 1, n_tilde - 1])


def intra_layer_offsets(geometry: SimGeometry) -> np.ndarray:
    n = np.arange(geometry.num_atoms)
    diff = np.abs(n[:, None] - n[None, :])
    nx = geometry.atoms_per_row
    return geometry.wavelength / 2 * np.sqrt((diff // nx) ** 2 + np.mod(diff, nx) ** 2)


def inter_layer_distances(geometry: SimGeometry) -> np.ndarray:
    """N x N matrix of 3-D distances between atoms of consecutive layers."""
    return np.sqrt(geometry.layer_spacing ** 2 + intra_layer_offsets(geometry) ** 2)


def antenna_to_layer_distance(m: int, n_tilde: int, geometry: SimGeometry) -> float:
    if not 1 <= m <= geometry.num_antennas:
        raise ValueError(f"antenna index {m} outside 1..{geometry.num_antennas}")
    _check_atom(n_tilde, geometry)
    return float(antenna_to_layer_distances(geometry)[n_tilde - 1, m - 1])


def antenna_to_layer_distances(geometry: SimGeometry) -> np.ndarray:
    """N x N_t distances from the antenna line to the first layer.

    The antennas sit on a horizontal line at the SIM centre height with
    half-wavelength spacing, one layer spacing behind the first layer.
    """
    g = geometry
    half = g.wavelength / 2
    n = np.arange(1, g.num_atoms + 1)
    m = np.arange(1, g.num_antennas + 1)
    col = (np.mod(n - 1, g.atoms_per_row) - (g.atoms_per_row - 1) / 2) * half
    row = (np.ceil(n / g.atoms_per_row) - (g.atoms_per_col + 1) / 2) * half
    ant = (m - (g.num_antennas + 1) / 2) * half
    lateral = col[:, None] - ant[None, :]
    return np.sqrt(g.layer_spacing ** 2 + lateral ** 2 + (row ** 2)[:, None])


def obliquity_cosine(distance_3d, geometry: SimGeometry):
    """Cosine of the angle between the layer normal and the propagation path."""
    distance_3d = np.asarray(distance_3d, dtype=float)
    # tolerate rounding in sqrt(d_SIM^2 + 0)
    if np.any(distance_3d < geometry.layer_spacing * (1 - 1e-12)):
        raise ValueError("distance shorter than the layer spacing")
    cos = np.minimum(geometry.layer_spacing / distance_3d, 1.0)
    return float(cos) if cos.ndim == 0 else cos


def drop_users(geometry: SimGeometry, r_min: float, r_max: float, rng_seed=None) -> UserLayout:
    """Place ``K`` users on the ground in front of the SIM.

    Ground distance is uniform on ``[r_min, r_max]`` and azimuth uniform on
    the half-plane x > 0. ``rng_seed`` is anything accepted by
    ``numpy.random.default_rng``.
    """
    if not 0 < r_min <= r_max:
        raise ValueError("need 0 < r_min <= r_max")
    rng = np.random.default_rng(rng_seed)
    k = geometry.num_users
    radius = rng.uniform(r_min, r_max, size=k)
    azimuth = rng.uniform(-np.pi / 2, np.pi / 2, size=k)
    positions = np.stack([radius * np.cos(azimuth), radius * np.sin(azimuth), np.zeros(k)], axis=1)
    distances = np.sqrt(radius ** 2 + geometry.bs_height ** 2)
    return UserLayout(positions, radius, distances)


def path_loss(d_k, wavelength: float, alpha: float = 2.5, reference: float = 1.0):
    """Large-scale gain ``C_0 (d/d_ref)^-alpha`` with free-space ``C_0`` at ``d_ref``."""
    d_k = np.asarray(d_k, dtype=float)
    if np.any(d_k <= 0):
        raise ValueError("distance must be positive")
    c0 = (wavelength / (4 * np.pi * reference)) ** 2
    beta = c0 * (d_k / reference) ** (-alpha)
    return float(beta) if beta.ndim == 0 else beta
