import numpy as np
import pytest

from simwave.cascade import (backward_apply, compose, effective_input_response, forward_beams,
                             phases_from_angles, random_phases)
from simwave.metrics import sinr_closed_form
from simwave.propagation import PropagationOperators

from conftest import make_scene


def random_ops(rng, n=4, n_t=2, layers=3):
    w = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    w1 = rng.standard_normal((n, n_t)) + 1j * rng.standard_normal((n, n_t))
    return PropagationOperators(w, w1, layers)


def naive_product(phases, ops):
    g = np.diag(phases[0])
    for l in range(1, phases.shape[0]):
        g = np.diag(phases[l]) @ ops.layer_transfer @ g
    return g


def test_single_layer_is_diagonal(rng):
    ops = random_ops(rng, layers=1)
    phi = random_phases(1, 4, rng)
    st = compose(phi, ops)
    np.testing.assert_allclose(st.G, np.diag(phi[0]))
    np.testing.assert_allclose(st.suffix[0], np.eye(4))
    np.testing.assert_allclose(st.prefix[0], np.eye(4))


def test_identity_hook():
    ops = PropagationOperators(np.eye(5, dtype=complex), np.ones((5, 1), dtype=complex), 3)
    st = compose(np.ones((3, 5), dtype=complex), ops)
    np.testing.assert_allclose(st.G, np.eye(5))
    np.testing.assert_allclose(effective_input_response(st, ops), ops.input_mapping)


def test_compose_matches_naive_product(rng):
    for _ in range(5):
        ops = random_ops(rng, n=4, layers=3)
        phi = random_phases(3, 4, rng)
        st = compose(phi, ops)
        ref = naive_product(phi, ops)
        assert np.linalg.norm(st.G - ref) / np.linalg.norm(ref) < 1e-12


def test_factorisation_identity(rng):
    ops = random_ops(rng, n=6, layers=4)
    st = compose(random_phases(4, 6, rng), ops)
    for l in range(4):
        rebuilt = (st.suffix[l] * st.phases[l]) @ st.prefix[l]
        assert np.linalg.norm(rebuilt - st.G) / np.linalg.norm(st.G) < 1e-9


def test_dimension_mismatch(rng):
    ops = random_ops(rng, n=4, layers=3)
    with pytest.raises(ValueError):
        compose(random_phases(2, 4, rng), ops)
    with pytest.raises(ValueError):
        compose(random_phases(3, 5, rng), ops)


def test_effective_input_response_per_column(rng):
    ops = random_ops(rng, n=5, n_t=3, layers=2)
    st = compose(random_phases(2, 5, rng), ops)
    out = effective_input_response(st, ops)
    for k in range(3):
        np.testing.assert_allclose(out[:, k], st.G @ ops.input_mapping[:, k], rtol=1e-13)
    single = PropagationOperators(ops.layer_transfer, ops.input_mapping[:, :1], 2)
    assert effective_input_response(compose(st.phases, single), single).shape == (5, 1)


def test_matrix_free_chains_match_factors(rng):
    ops = random_ops(rng, n=6, n_t=3, layers=4)
    phi = random_phases(4, 6, rng)
    st = compose(phi, ops)
    inner, beams = forward_beams(phi, ops, 2)
    np.testing.assert_allclose(beams, (st.G @ ops.input_mapping)[:, :2], rtol=1e-12)
    y = rng.standard_normal((6, 3)) + 0j
    back = backward_apply(phi, ops, y)
    for l in range(4):
        np.testing.assert_allclose(inner[l], st.prefix[l] @ ops.input_mapping[:, :2], rtol=1e-12)
        np.testing.assert_allclose(back[l], st.suffix[l].conj().T @ y, rtol=1e-12, atol=1e-12)


def test_global_phase_shift_invariance(rng):
    scene = make_scene(layers=3)
    phi = random_phases(3, scene.geometry.num_atoms, rng)
    shifted = phi.copy()
    shifted[1] *= np.exp(0.7j)
    a, b = compose(phi, scene.ops), compose(shifted, scene.ops)
    np.testing.assert_allclose(b.G, np.exp(0.7j) * a.G, rtol=1e-12)
    p = np.array([0.5, 0.5])
    assert sinr_closed_form(b, scene.ops, scene.stats, p).sum_se == pytest.approx(
        sinr_closed_form(a, scene.ops, scene.stats, p).sum_se, rel=1e-12)


def test_phase_helpers(rng):
    phi = random_phases(3, 7, rng)
    np.testing.assert_allclose(np.abs(phi), 1, atol=1e-12)
    np.testing.assert_allclose(phases_from_angles([0.0, np.pi / 2]), [[1, 1j]], atol=1e-15)
