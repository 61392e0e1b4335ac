import numpy as np
import pytest
from hypothesis import given, strategies as st

from simwave.cascade import compose, random_phases
from simwave.metrics import sinr_closed_form
from simwave.phase_optimizer import (LineSearchConfig, SumSEObjective, grad_D, grad_I,
                                     grad_objective, optimize_phases, pga_step,
                                     project_unit_modulus)
from simwave.propagation import ChannelStatistics
from simwave.validation import directional_error, unit_direction

from conftest import make_scene


def components(scene, p):
    def f(x):
        rep = sinr_closed_form(compose(x, scene.ops), scene.ops, scene.stats, p)
        return rep.numerators, rep.denominators
    return f


class Separable:
    """f(phi) = Re(a^H phi), maximised entry-wise at a / |a|."""

    def __init__(self, a):
        self.a = a

    def value(self, phases):
        return float(np.vdot(self.a, phases).real)

    def value_and_grad(self, phases):
        return self.value(phases), self.a / 2


def test_projection_examples():
    assert project_unit_modulus([3 + 4j])[0] == pytest.approx(0.6 + 0.8j)
    assert project_unit_modulus([0j])[0] == 1 + 0j
    u = np.exp(1j * np.linspace(0, 6, 7))
    np.testing.assert_allclose(project_unit_modulus(u), u, rtol=1e-15)


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=20))
def test_projection_is_feasible_and_idempotent(values):
    out = project_unit_modulus(values)
    np.testing.assert_allclose(np.abs(out), 1, atol=1e-12)
    np.testing.assert_allclose(project_unit_modulus(out), out, atol=1e-12)


def test_line_search_config_validation():
    for kwargs in (dict(shrink=0.0), dict(shrink=1.0), dict(initial_step=0.0), dict(max_backtracks=0)):
        with pytest.raises(ValueError):
            LineSearchConfig(**kwargs)


def test_grad_D_and_I_trivial_cases(rng):
    scene = make_scene(n_x=3, n_y=2, layers=2)
    st_ = compose(random_phases(2, 6, rng), scene.ops)
    p = np.array([0.4, 0.6])
    assert not np.any(grad_D(0, 1, st_, scene.ops, scene.stats, [0.0, 0.6]))
    np.testing.assert_allclose(grad_D(0, 0, st_, scene.ops, scene.stats, 2 * p),
                               2 * grad_D(0, 0, st_, scene.ops, scene.stats, p))
    assert not np.any(grad_I(1, 0, st_, scene.ops, scene.stats, np.zeros(2)))
    single = make_scene(n_x=3, n_y=2, layers=2, users=1)
    s = single.stats
    no_scatter = ChannelStatistics.create(s.kappa, s.beta, s.los, np.zeros((6, 6)), s.noise_variance)
    st1 = compose(random_phases(2, 6, rng), single.ops)
    assert not np.any(grad_I(0, 1, st1, single.ops, no_scatter, [1.0]))


def test_per_layer_gradients_match_bundle(rng):
    scene = make_scene(n_x=3, n_y=2, layers=3)
    st_ = compose(random_phases(3, 6, rng), scene.ops)
    p = np.array([0.3, 0.7])
    bundle = grad_objective(st_, scene.ops, scene.stats, p)
    for k in range(2):
        for l in range(3):
            np.testing.assert_allclose(bundle.numerator[l, k], grad_D(k, l, st_, scene.ops, scene.stats, p))
            np.testing.assert_allclose(bundle.denominator[l, k], grad_I(k, l, st_, scene.ops, scene.stats, p))
    assert bundle.objective.shape == (3, 6) and np.all(np.isfinite(bundle.objective))


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    scene = make_scene(n_x=3, n_y=2, layers=2, seed=seed)
    phi = random_phases(2, 6, rng)
    p = rng.uniform(0.1, 1, 2)
    bundle = grad_objective(compose(phi, scene.ops), scene.ops, scene.stats, p)
    f = components(scene, p)
    obj = SumSEObjective(scene.ops, scene.stats, p)
    d = unit_direction(phi.shape, rng)
    assert directional_error(obj.value, bundle.objective, phi, d, 1e-6, central=True) < 1e-5
    for k in range(2):
        assert directional_error(lambda x: f(x)[0][k], bundle.numerator[:, k], phi, d, 1e-6, True) < 1e-5
        assert directional_error(lambda x: f(x)[1][k], bundle.denominator[:, k], phi, d, 1e-6, True) < 1e-5


def test_first_order_error_ratio():
    rng = np.random.default_rng(11)
    scene = make_scene(n_x=3, n_y=2, layers=3, seed=11)
    phi = random_phases(3, 6, rng)
    p = np.array([0.5, 0.5])
    obj = SumSEObjective(scene.ops, scene.stats, p)
    grad = obj.value_and_grad(phi)[1]
    ratios = []
    for _ in range(5):
        d = unit_direction(phi.shape, rng)
        e5 = directional_error(obj.value, grad, phi, d, 1e-5)
        e6 = directional_error(obj.value, grad, phi, d, 1e-6)
        ratios.append(e5 / e6)
    assert 7 < np.median(ratios) < 13


def test_matrix_free_gradient_matches_bundle(rng):
    scene = make_scene(n_x=4, n_y=2, layers=3, users=2, antennas=3)
    phi = random_phases(3, 8, rng)
    p = np.array([0.2, 0.8])
    value, grad = SumSEObjective(scene.ops, scene.stats, p).value_and_grad(phi)
    st_ = compose(phi, scene.ops)
    np.testing.assert_allclose(grad, grad_objective(st_, scene.ops, scene.stats, p).objective,
                               rtol=1e-10, atol=1e-14)
    assert value == pytest.approx(sinr_closed_form(st_, scene.ops, scene.stats, p).sum_se, rel=1e-12)


def test_noise_dominated_direction_follows_signal(rng):
    single = make_scene(n_x=3, n_y=2, layers=2, users=1)
    s = single.stats
    loud = ChannelStatistics.create(s.kappa, s.beta, s.los, s.correlation, s.noise_variance * 1e6)
    st_ = compose(random_phases(2, 6, rng), single.ops)
    bundle = grad_objective(st_, single.ops, loud, [1.0])
    assert np.vdot(bundle.numerator[:, 0], bundle.objective).real > 0


def test_pga_step_zero_gradient():
    phi = np.exp(1j * np.arange(4.0))[None]
    obj = Separable(np.zeros((1, 4)))
    res = pga_step(phi, np.zeros_like(phi), 0.0, obj, LineSearchConfig())
    assert res.step == 0 and res.value == 0
    np.testing.assert_array_equal(res.phases, phi)


def test_pga_converges_on_separable_objective(rng):
    a = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    phases, traj = optimize_phases(random_phases(2, 5, rng), Separable(a), tol=1e-14, max_iters=200)
    np.testing.assert_allclose(phases, a / np.abs(a), atol=1e-4)
    assert np.all(np.diff(traj.objective) >= 0)


def test_pga_step_accepts_only_ascent(rng):
    scene = make_scene(n_x=3, n_y=2, layers=2)
    obj = SumSEObjective(scene.ops, scene.stats, np.array([0.5, 0.5]))
    phi = random_phases(2, 6, rng)
    value, grad = obj.value_and_grad(phi)
    res = pga_step(phi, grad, value, obj, LineSearchConfig(initial_step=1e6))
    assert res.value >= value and res.backtracks > 0
    np.testing.assert_allclose(np.abs(res.phases), 1, atol=1e-12)


def test_huge_tolerance_stops_after_one_iteration(rng):
    scene = make_scene()
    obj = SumSEObjective(scene.ops, scene.stats, np.array([0.5, 0.5]))
    _, traj = optimize_phases(random_phases(2, 8, rng), obj, tol=1e9)
    assert len(traj.objective) == 2


@pytest.mark.parametrize("mode", ["joint", "cyclic"])
def test_trajectories_monotone_and_feasible(mode):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        scene = make_scene(n_x=3, n_y=2, layers=3, seed=seed)
        obj = SumSEObjective(scene.ops, scene.stats, rng.dirichlet([1, 1]))
        phases, traj = optimize_phases(random_phases(3, 6, rng), obj, max_iters=20, mode=mode)
        assert np.all(np.diff(traj.objective) >= 0)
        np.testing.assert_allclose(np.abs(phases), 1, atol=1e-12)
        assert traj.objective[-1] == pytest.approx(obj.value(phases), rel=1e-12)
    with pytest.raises(ValueError):
        optimize_phases(phases, obj, mode="diagonal")


def test_single_atom_matches_grid_search():
    scene = make_scene(n_x=1, n_y=1, layers=2, users=1)
    obj = SumSEObjective(scene.ops, scene.stats, np.array([1.0]))
    phases, traj = optimize_phases(np.ones((2, 1), dtype=complex), obj)
    grid = np.linspace(0, 2 * np.pi, 721)
    best = max(obj.value(np.exp(1j * np.array([[t], [0.0]]))) for t in grid)
    assert traj.objective[-1] == pytest.approx(best, abs=1e-3)


def test_two_atom_layer_matches_grid_search():
    # one free relative phase once the global phase is factored out
    scene = make_scene(n_x=2, n_y=1, layers=1, users=1)
    obj = SumSEObjective(scene.ops, scene.stats, np.array([1.0]))
    grid = np.linspace(0, 2 * np.pi, 3601)
    values = [obj.value(np.exp(1j * np.array([[0.0, t]]))) for t in grid]
    _, traj = optimize_phases(np.ones((1, 2), dtype=complex), obj, tol=1e-12, max_iters=200)
    assert traj.objective[-1] == pytest.approx(max(values), abs=1e-3)


def test_global_phase_rotation_reaches_same_value(rng):
    scene = make_scene(n_x=3, n_y=2, layers=2)
    obj = SumSEObjective(scene.ops, scene.stats, np.array([0.5, 0.5]))
    phi = random_phases(2, 6, rng)
    _, a = optimize_phases(phi, obj)
    rotated = phi.copy()
    rotated[0] *= np.exp(2.1j)
    _, b = optimize_phases(rotated, obj)
    assert b.objective[-1] == pytest.approx(a.objective[-1], rel=1e-6)
