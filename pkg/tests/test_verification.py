import numpy as np

import quenching as qn

import pytest


def profile_field(gamma=0.5, N=21, T=0.1):
    grid = qn.make_grid(1, -1, 1, N, T, T)
    return qn.GridFunction.from_function(grid, lambda x, t: qn.exact_profile(x[..., 0], gamma))


# Power transform
def test_transform_v():
    grid = qn.make_grid(1, 0, 1, 5, 1, 1)
    u = qn.GridFunction(grid, np.full((2, 5), 4.0))
    v = qn.transform_v(u, 0.5)
    assert v.values == pytest.approx(np.full((2, 5), 4.0**0.75))

def test_transform_negative():
    grid = qn.make_grid(1, 0, 1, 5, 1, 1)
    values = np.ones((2, 5))
    values[1, 3] = -1e-12
    u = qn.GridFunction(grid, values)

    with pytest.raises(ValueError, match='node'):
        qn.transform_v(u, 0.5)

    v = qn.transform_v(u, 0.5, tol=1e-10)
    assert v[1, 3] == 0

def test_identity_constant():
    assert qn.transform_identity_residual('constant', 0.3, 0.01) == 0

def test_identity_gamma_zero():
    # v = u, both sides are the Hessian of u
    residual = qn.transform_identity_residual('sine', 0.3, 0.01, gamma=0.0)
    assert residual < 1e-10

def test_identity_bad_gamma():
    with pytest.raises(ValueError):
        qn.transform_identity_residual('sine', 0.3, 0.01, gamma=1.0)

@pytest.mark.parametrize('name, point', [('sine', 0.7), ('sine_cos', 0.7),
                                          ('exp_xy', (0.3, 0.5))])
def test_identity_order(name, point):
    fit = qn.identity_convergence_order(name, point, t=-0.3)
    assert fit.slope == pytest.approx(2.0, abs=0.25)

def test_identity_callable():
    residual = qn.transform_identity_residual(lambda x, t: 1 + x[..., 0]**2, 0.5, 0.01)
    assert residual < 1e-3


# Singular equation
def test_implied_source_constant():
    grid = qn.make_grid(1, -1, 1, 9, 1, 0.5)
    v = qn.GridFunction(grid, np.full((3, 9), 2.0))
    f = qn.implied_source(v, qn.make_operator('linear'), 0.5)

    assert len(f) == 2
    assert np.all(f.values == 0)

def test_implied_source_of_profile():
    # The stationary profile has v linear in x and
    # f = alpha c'^2 = gamma (2 - gamma)/2
    gamma = 0.5
    u = profile_field(gamma)
    v = qn.transform_v(u, gamma)
    alpha = gamma / (2 - gamma)
    f = qn.implied_source(v, qn.make_operator('linear'), alpha, floor=0.0)

    x = u.grid.coords()
    positive = x > 1e-9
    assert f.final[1:-1][positive[1:-1]] == pytest.approx(gamma * (2 - gamma) / 2, abs=1e-8)
    assert np.all(f.final[~positive] == 0)

def test_general_eq_residual_of_profile():
    gamma = 0.5
    alpha = gamma / (2 - gamma)
    v = qn.transform_v(profile_field(gamma), gamma)
    geq = qn.GeneralEqSpec(qn.make_operator('linear'), delta=alpha,
                           f=gamma * (2 - gamma) / 2)

    res = qn.general_eq_residual(v, geq, floor=0.0)
    assert res.values.max() < 1e-8

def test_implied_source_needs_positive():
    grid = qn.make_grid(1, -1, 1, 9, 1, 0.5)
    v = qn.GridFunction(grid, np.zeros((3, 9)))

    with pytest.raises(ValueError):
        qn.implied_source(v, qn.make_operator('linear'), 0.5)

def test_general_eq_bad_delta():
    with pytest.raises(ValueError):
        qn.GeneralEqSpec(qn.make_operator('linear'), delta=-1.0)


# Scaling
def test_scaling_exponent_vanishes():
    for gamma in (0.1, 0.5, 0.9):
        alpha = gamma / (2 - gamma)
        assert qn.rescaled_source_exponent(1 + alpha, gamma) == pytest.approx(0, abs=1e-12)

def test_rescaled_epsilon():
    alpha = 1 / 3
    assert qn.rescaled_epsilon(0.1, 0.5, 1 + alpha, 0.5) == pytest.approx(0.2)

def test_dyadic_kappa():
    assert qn.RescaleParams(0.25).m == 2
    assert qn.RescaleParams(1.0).m == 0

    with pytest.raises(ValueError):
        qn.RescaleParams(0.3).m

def test_rescale_field_self_similar():
    # x^2 + 2t is invariant under v(k x, k^2 t)/k^2
    grid = qn.make_grid(1, -1, 1, 33, 0.5, 0.1)
    v = qn.GridFunction.from_function(grid, lambda x, t: x[..., 0]**2 + 2 * t)
    v_k = qn.rescale_field(v, qn.RescaleParams(0.5, theta=2.0))

    assert v_k.grid.N == 17
    assert v_k.grid.h == pytest.approx(2 * grid.h)
    assert v_k.times == pytest.approx(4 * v.times)
    x = v_k.grid.coords()
    expected = x[None, :]**2 + 2 * v_k.times[:, None]
    assert v_k.values == pytest.approx(expected, abs=1e-12)

def test_rescaled_residual_of_bump_run():
    config = qn.parse_config({
        'grid': {'N': 65, 'T': 0.1},
        'penalization': {'gamma': 0.75, 'eps': [0.1]},
        'boundary': {'preset': 'bump'},
    }).solve_config(0.1)
    u = qn.solve(config).trajectory
    theta = 1 + config.params.alpha
    rp = qn.RescaleParams(0.5, theta)

    # Nodes of the rescaled grid are the nodes 16..48 of the original one
    baseline = qn.residual(u, config).values
    rescaled = qn.rescaled_residual(qn.rescale_field(u, rp), config, rp).values
    assert rescaled[:, 1:-1] == pytest.approx(0.5**(2 - theta) * baseline[:, 17:48],
                                              rel=1e-8, abs=1e-9)

    report = qn.rescale_residual_check(u, config)
    assert report
    assert report.witness['rescaled'] <= report.witness['baseline']

def test_rescale_field_too_small():
    grid = qn.make_grid(1, -1, 1, 5, 0.5, 0.1)
    v = qn.GridFunction(grid, np.zeros((6, 5)))

    with pytest.raises(ValueError):
        qn.rescale_field(v, qn.RescaleParams(0.25))


# Comparison
def test_comparison_ordered():
    grid = qn.make_grid(1, -1, 1, 33, 0.05, 0.05)
    sub = qn.GridFunction(grid, np.zeros((1, 33)), times=[-0.05])
    sup = qn.GridFunction(grid, np.ones((1, 33)), times=[-0.05])

    report = qn.comparison_trial(sub, sup, c=0.5, M_const=1.0)
    assert report
    assert report.worst <= 0

def test_comparison_unordered():
    grid = qn.make_grid(1, -1, 1, 33, 0.05, 0.05)
    sub = qn.GridFunction(grid, np.ones((1, 33)), times=[-0.05])
    sup = qn.GridFunction(grid, np.zeros((1, 33)), times=[-0.05])

    with pytest.raises(ValueError):
        qn.comparison_trial(sub, sup)

def test_random_comparison_trials():
    reports = qn.random_comparison_trials(n=8, seed=0, N=65)
    assert len(reports) == 8
    assert all(reports)


# Time barriers
def test_canonical_barrier():
    tbp = qn.TimeBarrierParams.canonical(2.0, n=1, Lam=1.0)
    assert tbp.K == 4.0
    assert tbp.Kbar == 8.0
    assert tbp.is_canonical

    tbp = qn.TimeBarrierParams(2.0, 4.0, 1.0)
    assert not tbp.is_canonical

def test_barrier_needs_L_above_one():
    with pytest.raises(ValueError):
        qn.TimeBarrierParams(1.0, 2.0, 4.0)

    with pytest.raises(ValueError):
        qn.kappa0(1.0, 0.0, 1, 1.0, 0.0)

def test_kappa0():
    assert qn.kappa0(2.0, 0.0, 1, 1.0, 0.0) == pytest.approx(0.125)
    assert qn.kappa0_thm(1.0, 0.0, 1, 1.0, 0.0) == pytest.approx(0.125)
    assert qn.holder_time_constant(1.0, 0.5, 0.25) == pytest.approx(16.0)

def test_time_barrier_brackets():
    grid = qn.make_grid(1, -1, 1, 9, 1.0, 0.25)
    tbp = qn.TimeBarrierParams.canonical(2.0)
    h_minus, h_plus = qn.time_barrier(1.0, tbp, -0.5, grid)

    assert len(h_minus) == 3
    assert np.all(h_minus.values <= 1.0 - 2.0)
    assert np.all(h_plus.values >= 1.0 + 2.0)

def test_time_oscillation_constant():
    grid = qn.make_grid(1, -1, 1, 17, 0.5, 0.1)
    v = qn.GridFunction(grid, np.full((6, 17), 3.0))
    report = qn.time_oscillation_check(v, qn.make_operator('linear'))

    assert report
    assert report.witness['drift'] == 0
    assert report.witness['barrier_sandwich']

def test_time_oscillation_small_field_drifting():
    # Flat in space, so the allowed drift is 0 whatever the size of v
    grid = qn.make_grid(1, -1, 1, 17, 0.05, 0.01)
    v = qn.GridFunction.from_function(grid, lambda x, t: np.full(x.shape[:-1], 1 + t))
    report = qn.time_oscillation_check(v, qn.make_operator('linear'))

    assert not report
    assert report.witness['measured_L'] == 0
    assert report.witness['drift'] == pytest.approx(0.05)

def test_time_oscillation_rescales_small_oscillation():
    grid = qn.make_grid(1, -1, 1, 17, 0.05, 0.01)
    v = qn.GridFunction.from_function(grid, lambda x, t: 0.25 * x[..., 0] + 2 + 5 * t)
    report = qn.time_oscillation_check(v, qn.make_operator('linear'))

    # Oscillation 1/2 is scaled up to L = 2, so M = 16 and kappa0 = 1/24
    assert report
    assert report.witness['measured_L'] == pytest.approx(0.5)
    assert report.witness['scale'] == pytest.approx(4.0)
    assert report.witness['L'] == pytest.approx(2.0)
    assert report.witness['kappa0'] == pytest.approx(1 / 24)
    assert report.witness['drift'] == pytest.approx(0.2)

    # A drift of 8.2 over (-1/24, 0] exceeds 8 times the oscillation
    v = v.map(lambda a: a + 200 * v.times[:, None])
    assert not qn.time_oscillation_check(v, qn.make_operator('linear'))
