import numpy as np

import quenching as qn
from quenching.grid import hessian_field, cylinder_mask

import pytest


# Grid geometry
def test_spacing():
    grid = qn.make_grid(d=1, a=0, b=1, N=101, T=1, dt=0.1)
    assert grid.h == pytest.approx(0.01)
    assert grid.n_steps == 10
    assert grid.shape == (101,)

def test_times_end_at_zero():
    grid = qn.make_grid(1, -1, 1, 5, T=1, dt=0.3)

    # dt shrunk so the levels tile (-T, 0]
    assert grid.n_steps == 4
    assert grid.dt == pytest.approx(0.25)
    assert grid.times[-1] == 0
    assert grid.times[0] == pytest.approx(-1)

def test_stored_levels():
    grid = qn.make_grid(1, -1, 1, 5, T=1, dt=0.01, max_stored_levels=11)
    levels = grid.stored_levels

    assert len(levels) == 11
    assert levels[0] == 0
    assert levels[-1] == grid.n_steps
    assert grid.stored_times[-1] == 0

def test_bad_grids():
    with pytest.raises(ValueError):
        qn.make_grid(3, -1, 1, 5, 1, 0.1)

    with pytest.raises(ValueError):
        qn.make_grid(1, 1, -1, 5, 1, 0.1)

    with pytest.raises(ValueError):
        qn.make_grid(1, -1, 1, 2, 1, 0.1)

    with pytest.raises(ValueError):
        qn.make_grid(1, -1, 1, 5, -1, 0.1)

def test_nearest_node():
    grid = qn.make_grid(2, -1, 1, 9, 1, 0.1)
    assert grid.nearest_node([0.0, 0.5]) == (4, 6)
    assert grid.nearest_node([5.0, -5.0]) == (8, 0)

def test_boundary_mask():
    grid = qn.make_grid(2, -1, 1, 5, 1, 0.1)
    mask = grid.boundary_mask()
    assert mask.sum() == 16
    assert not mask[1:-1, 1:-1].any()


# GridFunction
def test_grid_function_shape():
    grid = qn.make_grid(1, -1, 1, 5, 1, 0.5)

    with pytest.raises(ValueError):
        qn.GridFunction(grid, np.zeros((3, 4)))

def test_grid_function_non_finite():
    grid = qn.make_grid(1, -1, 1, 5, 1, 0.5)
    values = np.zeros((3, 5))
    values[1, 2] = np.nan

    with pytest.raises(ValueError, match='level 1'):
        qn.GridFunction(grid, values)

def test_from_function():
    grid = qn.make_grid(1, 0, 1, 11, 1, 0.5)
    gf = qn.GridFunction.from_function(grid, lambda x, t: x[..., 0] + t)

    assert len(gf) == 3
    assert gf.at(10) == pytest.approx(1.0)
    assert gf.at(10, level=0) == pytest.approx(0.0)

def test_to_df():
    grid = qn.make_grid(2, 0, 1, 3, 1, 1)
    gf = qn.GridFunction(grid, np.arange(18, dtype=float).reshape(2, 3, 3))
    df = gf.to_df()

    assert list(df.columns) == ['level', 't', 'i', 'j', 'x', 'y', 'u']
    assert len(df) == 18
    assert df['u'].iloc[-1] == 17


# Derivatives
def test_gradient_1d():
    grid = qn.make_grid(1, -1, 1, 21, 1, 1)
    gf = qn.GridFunction.from_function(grid, lambda x, t: x[..., 0]**2 + 3 * x[..., 0])
    node = 15
    x = grid.node_coordinates(node)[0]

    grad = qn.discrete_gradient(gf, node)
    assert grad == pytest.approx([2 * x + 3])

def test_hessian_2d_quadratic():
    grid = qn.make_grid(2, -1, 1, 11, 1, 1)
    gf = qn.GridFunction.from_function(
        grid, lambda x, t: x[..., 0]**2 + x[..., 0] * x[..., 1] + 2 * x[..., 1]**2
    )
    H = qn.discrete_hessian(gf, (3, 6))

    assert H == pytest.approx(np.array([[2.0, 1.0], [1.0, 4.0]]), abs=1e-9)
    assert H[0, 1] == H[1, 0]

def test_hessian_matches_field():
    grid = qn.make_grid(2, -1, 1, 9, 1, 1)
    gf = qn.GridFunction.from_function(grid, lambda x, t: np.sin(x[..., 0]) * np.exp(x[..., 1]))
    field = hessian_field(gf.final, grid.h)

    assert np.array_equal(qn.discrete_hessian(gf, (2, 5)), field[1, 4])

def test_hessian_second_order():
    # u = x^4: the central difference at x = 1/2 is off by exactly 2 h^2
    spacings, errors = [], []
    for N in (21, 41, 81, 161):
        grid = qn.make_grid(1, -1, 1, N, 1, 1)
        gf = qn.GridFunction.from_function(grid, lambda x, t: x[..., 0]**4)
        node = grid.nearest_node([0.5])
        H = qn.discrete_hessian(gf, node)
        spacings.append(grid.h)
        errors.append(abs(H[0, 0] - 3.0))

    assert errors == pytest.approx([2 * h**2 for h in spacings], rel=1e-6)
    assert qn.fit_exponent(spacings, errors).slope == pytest.approx(2.0, abs=1e-4)

def test_boundary_node_derivative():
    grid = qn.make_grid(1, -1, 1, 9, 1, 1)
    gf = qn.GridFunction(grid, np.zeros((2, 9)))

    with pytest.raises(ValueError):
        qn.discrete_gradient(gf, 0)


# Cylinders
def test_cylinder_nodes():
    grid = qn.make_grid(1, -1, 1, 5, T=0.5, dt=0.25)
    pairs = qn.cylinder_nodes(grid, qn.Cylinder((0.0,), 0.0, 0.5))

    # t = -0.25 is the open end of the time interval
    assert pairs == [((1,), 2), ((2,), 2), ((3,), 2)]

def test_cylinder_nodes_grow_with_radius():
    grid = qn.make_grid(1, -1, 1, 33, T=0.5, dt=0.05)
    radii = [1/16, 1/8, 1/4, 1/2]
    sets = [set(qn.cylinder_nodes(grid, qn.Cylinder((0.0,), 0.0, r))) for r in radii]

    for small, large in zip(sets, sets[1:]):
        assert small <= large
        assert len(small) < len(large)

def test_cylinder_escapes_space():
    grid = qn.make_grid(1, -1, 1, 9, T=1, dt=0.25)

    with pytest.raises(ValueError, match='upper face'):
        qn.cylinder_nodes(grid, qn.Cylinder((0.75,), 0.0, 0.5))

    with pytest.raises(ValueError, match='lower face'):
        qn.cylinder_nodes(grid, qn.Cylinder((-0.75,), 0.0, 0.5))

def test_cylinder_escapes_time():
    grid = qn.make_grid(1, -1, 1, 9, T=0.5, dt=0.25)

    with pytest.raises(ValueError, match='initial-time'):
        qn.cylinder_nodes(grid, qn.Cylinder((0.0,), 0.0, 0.9))

def test_cylinder_mask_2d():
    grid = qn.make_grid(2, -1, 1, 9, T=1, dt=0.25)
    levels, mask = cylinder_mask(grid, qn.Cylinder((0.0, 0.0), 0.0, 0.25))

    # center and its four axis neighbors
    assert mask.sum() == 5
    assert list(levels) == [4]

def test_bad_radius():
    with pytest.raises(ValueError):
        qn.Cylinder((0.0,), 0.0, 0.0)
