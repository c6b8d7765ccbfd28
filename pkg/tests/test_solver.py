import pickle

import numpy as np

import quenching as qn
from quenching.solver import boundary_value, initial_values, pde_residual

import pytest


def small_config(preset='positive_constant', N=33, T=0.05, eps=0.1, gamma=0.5,
                 variant='linear', d=1, **kwargs):
    grid = qn.make_grid(d, -1, 1, N, T, T)
    spec = qn.make_operator(variant, 1.0, 2.0 if variant != 'linear' else 1.0, d=d)
    params = qn.PenalizationParams(gamma, 0.1, eps)
    return qn.SolveConfig(grid, spec, params, qn.BoundaryData(preset, **kwargs))


# Exact profile
def test_exact_profile_value():
    assert qn.exact_profile(1.0, 0.5) == pytest.approx((9 / 8)**(2 / 3))
    assert qn.exact_profile(-0.5, 0.5) == 0

def test_exact_profile_is_stationary():
    # u'' = gamma u^(gamma - 1) on {u > 0}
    gamma, x, h = 0.5, 0.5, 1e-4
    u = lambda y: qn.exact_profile(y, gamma)
    second = (u(x + h) - 2 * u(x) + u(x - h)) / h**2
    assert second == pytest.approx(gamma * u(x)**(gamma - 1), rel=1e-5)


# Boundary data
def test_boundary_presets():
    params = qn.PenalizationParams(0.5, 0.1, 0.1)
    assert boundary_value('positive_constant', 0.3, 0.0, params) == 1.0
    assert boundary_value('zero', 0.3, 0.0, params) == 0.0
    assert boundary_value('bump', 0.5, 0.0, params) == pytest.approx(0.5625)
    assert boundary_value('bump', 1.5, 0.0, params) == 0.0

def test_boundary_shift():
    params = qn.PenalizationParams(0.5, 0.1, 0.1)
    data = qn.BoundaryData('zero', shift=True)
    assert boundary_value(data, 0.3, 0.0, params) == pytest.approx(params.scale)

def test_bad_preset():
    with pytest.raises(ValueError):
        qn.BoundaryData('gaussian')


# Configuration
def test_cfl():
    config = small_config()
    grid = config.grid

    assert config.dt <= 0.5 * grid.h**2 / 2 * (1 + 1e-12)
    assert config.dt <= 0.25 / qn.source_lipschitz(config.params) * (1 + 1e-12)
    assert grid.n_steps * config.dt == pytest.approx(0.05)

def test_cfl_shrinks_with_eps():
    coarse = small_config(N=17, eps=0.1)
    fine = small_config(N=17, eps=0.02)
    assert fine.dt < coarse.dt

def test_dimension_mismatch():
    grid = qn.make_grid(2, -1, 1, 9, 0.1, 0.1)
    spec = qn.make_operator('linear', d=1)
    params = qn.PenalizationParams(0.5)

    with pytest.raises(ValueError):
        qn.SolveConfig(grid, spec, params)

def test_max_steps():
    grid = qn.make_grid(1, -1, 1, 129, 1.0, 1.0)
    spec = qn.make_operator('linear')
    params = qn.PenalizationParams(0.5)

    with pytest.raises(ValueError, match='max_steps'):
        qn.SolveConfig(grid, spec, params, max_steps=100)


# Solving
def test_zero_data_stays_zero():
    result = qn.solve(small_config('zero'))
    assert np.all(result.trajectory.values == 0)
    assert result.max_value == 0

def test_first_step_matches_step():
    config = small_config('bump')
    result = qn.solve(config)

    u0 = initial_values(config)
    u1 = qn.step(u0, 0, config)
    assert np.allclose(result.trajectory[1], u1, rtol=0, atol=1e-15)

def test_trajectory_matches_repeated_steps():
    config = small_config('bump', eps=0.05)
    result = qn.solve(config)
    assert len(result.trajectory) == config.grid.n_steps + 1

    u = initial_values(config)
    for k in range(config.grid.n_steps):
        u = qn.step(u, k, config)
        assert np.array_equal(result.trajectory[k + 1], u)

@pytest.mark.parametrize('lower, upper', [
    (dict(preset='positive_constant', value=0.5), dict(preset='positive_constant', value=1.0)),
    (dict(preset='bump'), dict(preset='positive_constant', value=1.0)),
    (dict(preset='zero'), dict(preset='bump')),
])
def test_discrete_comparison(lower, upper):
    # phi_1 <= phi_2 on the parabolic boundary gives u_1 <= u_2
    u1 = qn.solve(small_config(eps=0.05, **lower)).trajectory
    u2 = qn.solve(small_config(eps=0.05, **upper)).trajectory
    assert np.all(u1.values <= u2.values + 1e-8)

def test_profile_data_stays_near_profile():
    # The penalized problem moves the profile by O(eps^(2/3)) only
    config = small_config('exact_profile', N=65, T=0.1, eps=0.05)
    u = qn.solve(config).trajectory
    assert qn.profile_error(u, 0.5, level=0) == pytest.approx(0, abs=1e-15)
    assert qn.profile_error(u, 0.5) < 0.1
    assert u.values.min() >= 0

def test_deterministic():
    config = small_config('bump')
    a = qn.solve(config).trajectory
    b = qn.solve(config).trajectory
    assert np.array_equal(a.values, b.values)

def test_maximum_principle():
    result = qn.solve(small_config('positive_constant', value=2.0))

    assert result.min_value >= 0
    assert result.max_value <= 2.0 + 1e-12
    assert result.trajectory.final[16] < 2.0

def test_diagnostics():
    result = qn.solve(small_config('bump'))
    diagnostics = result.diagnostics()

    assert 'wall_time' not in diagnostics
    assert diagnostics['n_steps'] == result.n_steps
    assert len(result.residuals) == result.n_steps

def test_sandwich():
    config = small_config('bump', eps=0.05)
    u = qn.solve(config).trajectory
    upper = qn.barrier_upper(config)
    lower = qn.barrier_lower(config)

    report = qn.sandwich_check(u, lower, upper)
    assert report.passed
    assert report.worst <= 1e-6

def test_sandwich_2d():
    config = small_config('positive_constant', N=17, d=2)
    u = qn.solve(config).trajectory
    report = qn.sandwich_check(u, qn.barrier_lower(config), qn.barrier_upper(config))
    assert report

def test_sandwich_violation():
    grid = qn.make_grid(1, -1, 1, 5, 1, 0.5)
    u = qn.GridFunction(grid, np.ones((3, 5)))
    upper = u.map(lambda a: a - 1)
    lower = u.map(lambda a: a - 2)

    report = qn.sandwich_check(u, lower, upper)
    assert not report
    assert report.worst == pytest.approx(1.0)
    assert report.witness['side'] == 'upper'

def test_blow_up():
    grid = qn.make_grid(1, -1, 1, 9, 0.1, 0.1)
    config = qn.SolveConfig(grid, qn.make_operator('linear'), qn.PenalizationParams(0.5))
    values = np.full(9, 1.0)
    values[4] = np.inf

    with pytest.raises(qn.SchemeBlowUp):
        qn.step(values, 0, config)

def test_blow_up_pickles():
    error = qn.SchemeBlowUp((3,), 5, float('inf'))
    copy = pickle.loads(pickle.dumps(error))

    assert copy.node == (3,)
    assert copy.level == 5
    assert str(copy) == str(error)


# Residuals
def test_residual_of_exact_solution():
    # u = x^2 + 2t solves u_xx - u_t = 0
    grid = qn.make_grid(1, -1, 1, 21, 0.5, 0.1)
    gf = qn.GridFunction.from_function(grid, lambda x, t: x[..., 0]**2 + 2 * t)
    spec = qn.make_operator('linear')

    res = pde_residual(gf, spec, lambda u, t: np.zeros_like(u))
    assert len(res) == len(gf) - 1
    assert res.values.max() < 1e-9

def test_residual_of_solution_is_small():
    config = small_config('bump')
    result = qn.solve(config)
    assert result.residuals.max() < 1e3
    assert np.all(np.isfinite(result.residuals))
