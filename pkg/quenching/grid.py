"""
Grid
------
Discrete space-time geometry for the penalized problem: uniform tensor
grids over boxes in one or two space dimensions, with time running over
(-T, 0] and the final level sitting exactly at t = 0. Also holds the
field container (GridFunction), the intrinsic parabolic cylinders

    G_rho(y, s) = B_rho(y) x (s - rho^2, s],

and the central-difference gradient and Hessian used everywhere else.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .util import check_finite_positive
from .util._field_attrs import _set_viz_attrs


class SpaceTimeGrid():
    """A uniform grid on [a, b]^d x (-T, 0].

    Parameters:
    -----------
    d: int
        Space dimension, 1 or 2.
    a, b: float
        Interval bounds per axis, a < b.
    N: int
        Nodes per axis (N >= 3). The spatial step is h = (b - a)/(N - 1).
    T: float
        Time horizon. Levels are t_k = -(n_steps - k) dt, so the last
        level is exactly t = 0 and the first is t = -T.
    dt: float
        Requested time step. If T/dt is not an integer, the step is
        shrunk to T/ceil(T/dt) so the levels tile (-T, 0] exactly.
    max_stored_levels: int, default None
        If given, only every `store_every`-th level is kept in fields
        evolved on this grid (the initial and final levels always are).
    """

    def __init__(self, d, a, b, N, T, dt, max_stored_levels=None):
        self.d = d
        self.a = float(a)
        self.b = float(b)
        self.N = N
        self.T = float(T)

        self.h = (self.b - self.a) / (N - 1)
        self.n_steps = max(1, math.ceil(self.T / dt - 1e-9))
        self.n_levels = self.n_steps + 1
        self.dt = self.T / self.n_steps if not math.isclose(
            self.n_steps * dt, self.T, rel_tol=1e-12) else float(dt)

        self.max_stored_levels = max_stored_levels
        if max_stored_levels is None or max_stored_levels >= self.n_levels:
            self.store_every = 1
        else:
            self.store_every = math.ceil(self.n_steps / (max_stored_levels - 1))

    def __repr__(self):
        return (f'SpaceTimeGrid(d={self.d}, a={self.a}, b={self.b}, N={self.N}, '
                f'T={self.T}, dt={self.dt:.6g}, levels={self.n_levels})')

    def __eq__(self, other):
        if not isinstance(other, SpaceTimeGrid):
            return NotImplemented
        return (self.spatial_key() == other.spatial_key()
                and self.n_steps == other.n_steps
                and self.dt == other.dt
                and self.store_every == other.store_every)

    def spatial_key(self):
        return (self.d, self.a, self.b, self.N)

    @property
    def shape(self):
        """Shape of one spatial level."""
        return (self.N,) * self.d

    @property
    def times(self):
        """Times of every computed level."""
        return -(self.n_steps - np.arange(self.n_levels)) * self.dt

    @property
    def stored_levels(self):
        """Indices (into `times`) of the levels fields keep."""
        levels = list(range(0, self.n_levels, self.store_every))
        if levels[-1] != self.n_steps:
            levels.append(self.n_steps)
        return np.array(levels)

    @property
    def stored_times(self):
        return self.times[self.stored_levels]

    def coords(self):
        """Node coordinates along one axis, exactly a + i*h."""
        return self.a + np.arange(self.N) * self.h

    def mesh(self):
        """Coordinates of every node, shape `shape + (d,)`."""
        x = self.coords()
        if self.d == 1:
            return x[:, None]
        X, Y = np.meshgrid(x, x, indexing='ij')
        return np.stack([X, Y], axis=-1)

    def interior_mesh(self):
        mesh = self.mesh()
        if self.d == 1:
            return mesh[1:-1]
        return mesh[1:-1, 1:-1]

    def node_coordinates(self, node):
        node = self._as_node(node)
        return self.a + np.array(node) * self.h

    def is_interior(self, node):
        node = self._as_node(node)
        return all(0 < i < self.N - 1 for i in node)

    def boundary_mask(self):
        """Boolean array, True on the spatial boundary nodes."""
        mask = np.zeros(self.shape, dtype=bool)
        if self.d == 1:
            mask[[0, -1]] = True
        else:
            mask[[0, -1], :] = True
            mask[:, [0, -1]] = True
        return mask

    def nearest_node(self, point):
        """Index of the node closest to a point."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((point - self.a) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.N - 1))

    def with_dt(self, dt):
        """Same spatial grid and horizon with a new time step."""
        return make_grid(self.d, self.a, self.b, self.N, self.T, dt,
                         max_stored_levels=self.max_stored_levels)

    def _as_node(self, node):
        if isinstance(node, (int, np.integer)):
            node = (int(node),)
        node = tuple(int(i) for i in node)
        if len(node) != self.d:
            raise ValueError(
                f'Node {node} does not have {self.d} index/indices.'
            )
        if not all(0 <= i < self.N for i in node):
            raise ValueError(
                f'Node {node} is outside the grid (N={self.N}).'
            )
        return node


def make_grid(d, a, b, N, T, dt, max_stored_levels=None):
    """Builds a SpaceTimeGrid after checking every size.

    Parameters:
    -----------
    d: int
        Space dimension, 1 or 2.
    a, b: float
        Interval per axis, a < b.
    N: int
        Nodes per axis, N >= 3.
    T: float
        Horizon; the grid covers (-T, 0].
    dt: float
        Time step.
    max_stored_levels: int, default None
        Cap on the number of levels kept in fields on this grid.

    Returns:
    --------
    grid: SpaceTimeGrid
        With h = (b-a)/(N-1) and ceil(T/dt) + 1 levels.

    Examples:
    ---------
    >>> qn.make_grid(d=1, a=0, b=1, N=101, T=1, dt=0.1).h
    0.01
    """
    if d not in (1, 2):
        raise ValueError(f'Only d = 1 or d = 2 is supported, found d={d}.')
    for value, name in ((a, 'a'), (b, 'b')):
        if isinstance(value, bool) or not isinstance(value, (int, float, np.number)) \
                or not math.isfinite(value):
            raise ValueError(f'Your {name} must be a finite number, found {value}.')
    if not a < b:
        raise ValueError(f'Need a < b, found a={a}, b={b}.')
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 3:
        raise ValueError(f'Need an integer N >= 3 nodes per axis, found {N}.')
    check_finite_positive(T, 'T')
    check_finite_positive(dt, 'dt')
    if max_stored_levels is not None and max_stored_levels < 2:
        raise ValueError('max_stored_levels must be at least 2.')

    return SpaceTimeGrid(d, a, b, int(N), T, dt, max_stored_levels)


class GridFunction():
    """A discrete space-time field on a SpaceTimeGrid.

    Values are stored as an array of shape `(n_levels,) + grid.shape`,
    one spatial slice per stored time level. Levels are addressed by
    their position in `times` (negative indices allowed, -1 is t = 0).

    Parameters:
    -----------
    grid: SpaceTimeGrid
        The grid the field lives on.
    values: array-like
        Field values; every entry must be finite.
    times: array-like, default None
        Times of the stored levels. Defaults to `grid.stored_times`.
        Derived fields (residuals, rescaled fields) may carry their own.
    """

    def __init__(self, grid, values, times=None):
        self.grid = grid
        if times is None:
            times = grid.stored_times
        self._times = np.asarray(times, dtype=float)
        self.values = values

        # Set plotting attributes directly as methods
        _set_viz_attrs(self)

    @classmethod
    def from_function(cls, grid, func, times=None):
        """Evaluates `func(x, t)` on every node and stored level, where
        `x` has shape `grid.shape + (d,)`.
        """
        if times is None:
            times = grid.stored_times
        mesh = grid.mesh()
        values = np.stack([
            np.broadcast_to(func(mesh, t), grid.shape) for t in times
        ])
        return cls(grid, values, times)

    @property
    def values(self):
        return self._values

    @values.setter
    def values(self, values):
        values = np.asarray(values, dtype=float)
        expected = (len(self._times),) + self.grid.shape
        if values.shape != expected:
            raise ValueError(
                f'Field shape {values.shape} does not match the grid '
                f'(expected {expected}).'
            )
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(
                f'Field contains a non-finite value at level {bad[0]}, '
                f'node {tuple(int(i) for i in bad[1:])}.'
            )
        self._values = values

    @property
    def times(self):
        return self._times

    def __getitem__(self, key):
        return self._values[key]

    def __len__(self):
        return len(self._times)

    def __repr__(self):
        return f'GridFunction({self.grid}, levels={len(self)})'

    def _repr_html_(self):
        return self.to_df()._repr_html_()

    @property
    def final(self):
        """Spatial slice at the last stored level (t = 0)."""
        return self._values[-1]

    def level_index(self, level):
        n = len(self._times)
        if not -n <= level < n:
            raise ValueError(f'Level {level} out of range for {n} stored levels.')
        return level % n

    def at(self, node, level=-1):
        node = self.grid._as_node(node)
        return self._values[(self.level_index(level),) + node]

    def copy(self):
        return GridFunction(self.grid, self._values.copy(), self._times.copy())

    def map(self, func):
        """New field with `func` applied to the value array."""
        return GridFunction(self.grid, func(self._values), self._times.copy())

    def to_df(self):
        """Tidy DataFrame with one row per (level, node): level, t, node
        index/indices, coordinate(s), u.
        """
        n_levels = len(self._times)
        n_nodes = int(np.prod(self.grid.shape))
        idx = np.indices(self.grid.shape).reshape(self.grid.d, -1)
        coords = self.grid.a + idx * self.grid.h

        data = {
            'level': np.repeat(np.arange(n_levels), n_nodes),
            't': np.repeat(self._times, n_nodes),
            'i': np.tile(idx[0], n_levels),
        }
        if self.grid.d == 2:
            data['j'] = np.tile(idx[1], n_levels)
        data['x'] = np.tile(coords[0], n_levels)
        if self.grid.d == 2:
            data['y'] = np.tile(coords[1], n_levels)
        data['u'] = self._values.reshape(-1)

        return pd.DataFrame(data)

    def to_csv(self, path):
        """Writes `to_df()` with 17 significant digits."""
        self.to_df().to_csv(path, index=False, float_format='%.17g')


def gradient_field(values, h):
    """Central-difference gradients at the interior nodes of one level.

    Returns an array of shape `interior_shape + (d,)`.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return ((values[2:] - values[:-2]) / (2 * h))[:, None]

    ux = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * h)
    uy = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * h)
    return np.stack([ux, uy], axis=-1)


def hessian_field(values, h):
    """Central-difference Hessians at the interior nodes of one level.

    The mixed derivative uses the 4-point corner stencil and is written
    into both off-diagonal slots, so every matrix is exactly symmetric.
    Returns an array of shape `interior_shape + (d, d)`.
    """
    values = np.asarray(values, dtype=float)
    h2 = h * h
    if values.ndim == 1:
        uxx = (values[2:] - 2 * values[1:-1] + values[:-2]) / h2
        return uxx[:, None, None]

    center = values[1:-1, 1:-1]
    uxx = (values[2:, 1:-1] - 2 * center + values[:-2, 1:-1]) / h2
    uyy = (values[1:-1, 2:] - 2 * center + values[1:-1, :-2]) / h2
    uxy = (values[2:, 2:] - values[2:, :-2]
           - values[:-2, 2:] + values[:-2, :-2]) / (4 * h2)

    H = np.empty(center.shape + (2, 2))
    H[..., 0, 0] = uxx
    H[..., 1, 1] = uyy
    H[..., 0, 1] = uxy
    H[..., 1, 0] = uxy
    return H


def _patch(gf, node, level):
    """3-point (or 3x3) stencil patch around an interior node."""
    grid = gf.grid
    node = grid._as_node(node)
    if not grid.is_interior(node):
        raise ValueError(
            f'Node {node} is on the boundary; central differences need '
            'an interior node.'
        )
    k = gf.level_index(level)
    window = tuple(slice(i - 1, i + 2) for i in node)
    return gf[(k,) + window]


def discrete_gradient(gf, node, level=-1):
    """Central difference (u[i+1] - u[i-1])/(2h) per axis at one node.

    Parameters:
    -----------
    gf: GridFunction
    node: int or tuple of int
        Interior node.
    level: int, default -1
        Stored level.

    Returns:
    --------
    grad: np.ndarray of shape (d,)
    """
    patch = _patch(gf, node, level)
    return gradient_field(patch, gf.grid.h).reshape(gf.grid.d)


def discrete_hessian(gf, node, level=-1):
    """Central-difference Hessian (d x d, exactly symmetric) at one node.

    Uses the same stencil arithmetic as `hessian_field`, so the result
    matches the vectorized field bit for bit.
    """
    patch = _patch(gf, node, level)
    d = gf.grid.d
    return hessian_field(patch, gf.grid.h).reshape(d, d)


@dataclass(frozen=True)
class Cylinder:
    """Intrinsic parabolic cylinder B_rho(y) x (s - rho^2, s].

    Parameters:
    -----------
    center: tuple of float
        Spatial center y.
    s: float
        Top time of the cylinder.
    radius: float
        rho > 0.
    """
    center: tuple
    s: float = 0.0
    radius: float = 1.0

    def __post_init__(self):
        check_finite_positive(self.radius, 'radius')
        object.__setattr__(self, 'center',
                           tuple(float(c) for c in np.atleast_1d(self.center)))


def check_cylinder(grid, cyl, times=None):
    """Checks that a cylinder is contained in the grid, naming the face
    it escapes through otherwise.
    """
    if times is None:
        times = grid.stored_times
    if len(cyl.center) != grid.d:
        raise ValueError(
            f'Cylinder center {cyl.center} does not have {grid.d} coordinate(s).'
        )
    tol = 1e-9 * grid.h
    rho = cyl.radius
    for axis, y in enumerate(cyl.center):
        if y - rho < grid.a - tol:
            raise ValueError(
                f'Cylinder escapes the domain through the lower face of axis '
                f'{axis}: y - rho = {y - rho:.6g} < a = {grid.a}.'
            )
        if y + rho > grid.b + tol:
            raise ValueError(
                f'Cylinder escapes the domain through the upper face of axis '
                f'{axis}: y + rho = {y + rho:.6g} > b = {grid.b}.'
            )
    t_tol = 1e-9 * max(grid.dt, 1e-300)
    if cyl.s - rho**2 < times[0] - t_tol:
        raise ValueError(
            f'Cylinder escapes through the initial-time face: '
            f's - rho^2 = {cyl.s - rho**2:.6g} < t0 = {times[0]:.6g}.'
        )
    if cyl.s > times[-1] + t_tol:
        raise ValueError(
            f'Cylinder escapes through the final-time face: '
            f's = {cyl.s:.6g} > {times[-1]:.6g}.'
        )


def cylinder_mask(grid, cyl, times=None):
    """Vectorized form of `cylinder_nodes`.

    Returns:
    --------
    levels: np.ndarray of int
        Stored levels inside (s - rho^2, s].
    mask: np.ndarray of bool, shape `grid.shape`
        Nodes with |x - y| <= rho.
    """
    if times is None:
        times = grid.stored_times
    times = np.asarray(times)
    check_cylinder(grid, cyl, times)

    rho = cyl.radius
    dist = np.linalg.norm(grid.mesh() - np.array(cyl.center), axis=-1)
    mask = dist <= rho + 1e-9 * grid.h

    t_tol = 1e-9 * max(grid.dt, 1e-300)
    in_time = (times - (cyl.s - rho**2) > t_tol) & (times <= cyl.s + t_tol)
    levels = np.flatnonzero(in_time)

    return levels, mask


def cylinder_nodes(grid, cyl, times=None):
    """All (node, level) pairs inside G_rho(y, s).

    Parameters:
    -----------
    grid: SpaceTimeGrid
    cyl: Cylinder
    times: array-like, default None
        Times of the levels to enumerate; defaults to `grid.stored_times`.

    Returns:
    --------
    pairs: list of (tuple of int, int)
        Ordered by level, then node index.

    Examples:
    ---------
    # h = 0.5, dt = 0.25, rho = 0.5: the level t = -0.25 sits exactly
    # on the open end of the time interval and is excluded
    >>> grid = qn.make_grid(1, -1, 1, 5, T=0.5, dt=0.25)
    >>> qn.cylinder_nodes(grid, qn.Cylinder((0.0,), 0.0, 0.5))
    [((1,), 2), ((2,), 2), ((3,), 2)]
    """
    levels, mask = cylinder_mask(grid, cyl, times)
    nodes = [tuple(int(i) for i in idx) for idx in np.argwhere(mask)]
    pairs = [(node, int(level)) for level in levels for node in nodes]
    if not pairs:
        raise ValueError(f'Cylinder {cyl} contains no grid points.')

    return pairs


def locate_center(grid, cyl, times=None):
    """Node and level of a cylinder's center; the center must be a grid
    point.
    """
    if times is None:
        times = grid.stored_times
    times = np.asarray(times)
    node = grid.nearest_node(cyl.center)
    if np.abs(grid.node_coordinates(node) - np.array(cyl.center)).max() > 1e-9 * grid.h:
        raise ValueError(
            f'Cylinder center {cyl.center} is not a grid node.'
        )
    level = int(np.argmin(np.abs(times - cyl.s)))
    if abs(times[level] - cyl.s) > 1e-9 * max(grid.dt, 1e-300) + 1e-12:
        raise ValueError(
            f'Cylinder time s={cyl.s} is not a stored time level.'
        )
    return node, level
