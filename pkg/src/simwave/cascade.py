"""Wave-domain response of the stacked layers and its prefix/suffix factors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import PropagationOperators


def random_phases(num_layers: int, num_atoms: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus phase state with angles uniform on [0, 2 pi)."""
    return np.exp(1j * rng.uniform(0, 2 * np.pi, size=(num_layers, num_atoms)))


def phases_from_angles(theta) -> np.ndarray:
    return np.exp(1j * np.atleast_2d(np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class CascadeState:
    """``G`` together with ``suffix[l] @ diag(phases[l]) @ prefix[l] == G``.

    Lists are indexed from 0, so ``suffix[0]`` is the factor of layer 1.
    """
    phases: np.ndarray  # (L, N)
    G: np.ndarray
    suffix: list
    prefix: list


def compose(phases: np.ndarray, ops: PropagationOperators) -> CascadeState:
    phases = np.atleast_2d(phases)
    num_layers, n = phases.shape
    if num_layers != ops.num_layers or n != ops.num_atoms:
        raise ValueError(f"phase state {phases.shape} does not match operators "
                         f"({ops.num_layers}, {ops.num_atoms})")
    w = ops.layer_transfer
    eye = np.eye(n, dtype=complex)

    prefix = [eye]
    for l in range(1, num_layers):
        # W diag(phi) C: column scaling of W
        prefix.append((w * phases[l - 1]) @ prefix[-1])

    suffix = [eye] * num_layers
    for l in range(num_layers - 1, 0, -1):
        suffix[l - 1] = (suffix[l] * phases[l]) @ w

    G = (suffix[0] * phases[0]) @ prefix[0]
    return CascadeState(phases, G, suffix, prefix)


def effective_input_response(state: CascadeState, ops: PropagationOperators) -> np.ndarray:
    """End-to-end beams ``G W^1``; column ``k`` is the beam of stream ``k``."""
    return state.G @ ops.input_mapping


def forward_beams(phases: np.ndarray, ops: PropagationOperators, num_streams: int):
    """Matrix-free forward pass.

    Returns ``inner`` with ``inner[l] = C_l W^1`` (first ``num_streams``
    columns) and the beams ``G W^1``. Costs O(L N^2 K) instead of the
    O(L N^3) of forming the prefix matrices.
    """
    w = ops.layer_transfer
    x = ops.input_mapping[:, :num_streams]
    inner = [x]
    for l in range(1, phases.shape[0]):
        x = w @ (phases[l - 1][:, None] * x)
        inner.append(x)
    return inner, phases[-1][:, None] * x


def backward_apply(phases: np.ndarray, ops: PropagationOperators, y: np.ndarray) -> list:
    """``[A_l^H y for every layer l]`` without forming the suffix matrices."""
    wh = ops.layer_transfer.conj().T
    out = [y] * phases.shape[0]
    for l in range(phases.shape[0] - 1, 0, -1):
        out[l - 1] = wh @ (phases[l].conj()[:, None] * out[l])
    return out
