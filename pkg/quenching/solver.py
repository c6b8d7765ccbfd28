"""
Explicit monotone time stepping for the penalized problem

    F(x, t, D^2 u) - u_t = B_eps(u) u^(gamma-1)    in the box x (-T, 0],
    u = phi                                         on the parabolic boundary,

together with the two barrier solutions (zero right-hand side, and the
constant right-hand side `source_bound`) that sandwich every solution.
"""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .base import CheckReport
from .grid import GridFunction, hessian_field
from .operators import source, source_bound, source_lipschitz
from .util import check_finite_positive, check_open_unit, check_same_grid
from .util._validators import BOUNDARY_PRESETS

logger = logging.getLogger(__name__)


class SchemeBlowUp(FloatingPointError):
    """A non-finite value appeared while stepping, usually a symptom of a
    violated CFL condition.
    """

    def __init__(self, node, level, value=float('nan')):
        self.node = node
        self.level = level
        self.value = value
        super().__init__(
            f'Non-finite value {value} produced at node {node}, level {level}.'
        )

    def __reduce__(self):
        return (SchemeBlowUp, (self.node, self.level, self.value))


###################
# Boundary data
###################

@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data on the parabolic boundary.

    Parameters:
    -----------
    preset: str, default 'positive_constant'
        'positive_constant' (phi = value), 'bump' (phi = max(0, 1 - |x|^2)^2),
        'exact_profile' (the stationary 1D profile with free boundary at
        x0, along the first coordinate) or 'zero'.
    shift: bool, default False
        Adds eps^(1+alpha) to the data, keeping it strictly positive.
    value: float, default 1.0
        Level of 'positive_constant'.
    x0: float, default 0.0
        Free boundary location of 'exact_profile'.
    """
    preset: str = 'positive_constant'
    shift: bool = False
    value: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if self.preset not in BOUNDARY_PRESETS:
            raise ValueError(
                f"Boundary preset '{self.preset}' not recognized. Acceptable "
                f"presets are {BOUNDARY_PRESETS}."
            )


def exact_profile(x, gamma, x0=0.0):
    """c (x - x0)_+^(2/(2-gamma)) with c = ((2-gamma)^2/2)^(1/(2-gamma)),
    the stationary solution of u'' = gamma u^(gamma-1) on {u > 0}.

    Examples:
    ---------
    # c = (9/8)^(2/3) for gamma = 1/2
    >>> qn.exact_profile(1.0, 0.5)
    1.0816871777305958
    """
    check_open_unit(gamma, 'gamma')
    p = 2 / (2 - gamma)
    c = ((2 - gamma)**2 / 2)**(1 / (2 - gamma))
    value = c * np.maximum(np.asarray(x, dtype=float) - x0, 0)**p
    return value if np.ndim(x) else float(value)


def boundary_value(boundary, x, t, params):
    """Boundary data phi at points `x` (shape (..., d), or scalars in 1D)
    and time t.

    Parameters:
    -----------
    boundary: BoundaryData or str
        A preset name is taken with its default parameters.
    x: float or array-like
    t: float
    params: PenalizationParams
        Supplies gamma for 'exact_profile' and eps^(1+alpha) for the shift.
    """
    if isinstance(boundary, str):
        boundary = BoundaryData(boundary)

    x = np.asarray(x, dtype=float)
    points = x[..., None] if x.ndim == 0 else x
    shape = points.shape[:-1]

    if boundary.preset == 'positive_constant':
        value = np.full(shape, float(boundary.value))
    elif boundary.preset == 'bump':
        r2 = (points**2).sum(axis=-1)
        value = np.maximum(0, 1 - r2)**2
    elif boundary.preset == 'exact_profile':
        value = exact_profile(points[..., 0], params.gamma, boundary.x0)
    else:
        value = np.zeros(shape)

    if boundary.shift:
        value = value + params.scale

    return value if value.ndim else float(value)


###################
# Configuration
###################

def cfl_dt(grid, spec, params, safety=0.5, source_safety=0.5):
    """Stable step of the explicit scheme,

        dt = safety * min(h^2/(2 d Lam), source_safety/Lip(source)).

    The diffusion bound makes every stencil weight nonnegative; the
    source bound makes u - dt source(u) nondecreasing. Since the source
    Lipschitz constant grows like eps^-2, dt ~ eps^2 once it binds.
    """
    if not 0 < safety <= 1:
        raise ValueError(f'CFL safety factor must lie in (0, 1], found {safety}.')
    check_finite_positive(source_safety, 'source_safety')
    diffusion = grid.h**2 / (2 * grid.d * spec.Lam)
    lip = source_lipschitz(params)
    stiffness = source_safety / lip if lip > 0 else math.inf

    return safety * min(diffusion, stiffness)


class SolveConfig():
    """Everything a run needs. The grid's time step is always replaced by
    `cfl_dt` (shrunk further so the levels tile (-T, 0] exactly).

    Parameters:
    -----------
    grid: SpaceTimeGrid
        Spatial grid and horizon; its dt is ignored.
    spec: OperatorSpec
    params: PenalizationParams
    boundary: BoundaryData, default None
        Defaults to the 'positive_constant' preset.
    cfl_safety: float, default 0.5
    source_safety: float, default 0.5
    max_steps: int, default 2_000_000
        Runs needing more steps are refused.
    """

    def __init__(self, grid, spec, params, boundary=None, cfl_safety=0.5,
                 source_safety=0.5, max_steps=2_000_000):
        if spec.d != grid.d:
            raise ValueError(
                f'Operator acts in d={spec.d} but the grid has d={grid.d}.'
            )
        spec.check_coefficients(grid)
        if boundary is None:
            boundary = BoundaryData()
        elif isinstance(boundary, str):
            boundary = BoundaryData(boundary)

        self.spec = spec
        self.params = params
        self.boundary = boundary
        self.cfl_safety = cfl_safety
        self.source_safety = source_safety
        self.max_steps = max_steps

        dt = cfl_dt(grid, spec, params, cfl_safety, source_safety)
        self.grid = grid.with_dt(dt)
        if self.grid.n_steps > max_steps:
            raise ValueError(
                f'Run needs {self.grid.n_steps} steps (dt={dt:.3g}), more than '
                f'max_steps={max_steps}.'
            )

    @property
    def dt(self):
        return self.grid.dt

    def __repr__(self):
        return (f'SolveConfig({self.grid}, {self.spec.variant}, '
                f'gamma={self.params.gamma}, eps={self.params.eps}, '
                f"boundary='{self.boundary.preset}')")


@dataclass
class SolveResult:
    """Trajectory and diagnostics of a run.

    `residuals[k]` is the max interior residual at level k + 1, measured
    with the step actually taken.
    """
    trajectory: GridFunction
    dt: float
    residuals: np.ndarray
    min_value: float
    max_value: float
    wall_time: float
    n_steps: int

    def diagnostics(self):
        """Run summary without the wall time (kept out of reports so they
        stay reproducible).
        """
        return {
            'dt': float(self.dt),
            'n_steps': int(self.n_steps),
            'max_residual': float(self.residuals.max()) if len(self.residuals) else 0.0,
            'final_residual': float(self.residuals[-1]) if len(self.residuals) else 0.0,
            'min_value': float(self.min_value),
            'max_value': float(self.max_value),
            'positivity_margin': float(self.min_value),
        }


###################
# Stepping
###################

RHS_MODES = ('source', 'zero', 'bound')


def _rhs(values, params, mode):
    if mode == 'source':
        return source(values, params)
    if mode == 'zero':
        return np.zeros_like(values)
    return np.full_like(values, source_bound(params))


def _interior(values):
    if values.ndim == 1:
        return values[1:-1]
    return values[1:-1, 1:-1]


def _terms(values, t, config, mode, points):
    H = hessian_field(values, config.grid.h)
    Fu = config.spec.apply(points, t, H)
    return Fu, _rhs(_interior(values), config.params, mode)


def _check_finite(values, level):
    if not np.all(np.isfinite(values)):
        idx = np.argwhere(~np.isfinite(values))[0]
        node = tuple(int(i) for i in idx)
        raise SchemeBlowUp(node, level, values[tuple(idx)])


def _advance(values, Fu, rhs, level, config, mask, boundary_points):
    # Euler update of the interior, boundary data at t_{level+1}
    grid = config.grid
    new = values.copy()
    with np.errstate(over='ignore', invalid='ignore'):
        if grid.d == 1:
            new[1:-1] = values[1:-1] + grid.dt * (Fu - rhs)
        else:
            new[1:-1, 1:-1] = values[1:-1, 1:-1] + grid.dt * (Fu - rhs)
    new[mask] = boundary_value(config.boundary, boundary_points,
                               grid.times[level + 1], config.params)
    _check_finite(new, level + 1)
    return new


def step(values, level, config, mode='source'):
    """One explicit Euler step from level k to level k + 1.

    Parameters:
    -----------
    values: np.ndarray
        Spatial values at level k, shape `grid.shape`.
    level: int
        k, indexing `config.grid.times`.
    config: SolveConfig
    mode: str, default 'source'
        Right-hand side: 'source' (the penalized equation), 'zero' (upper
        barrier) or 'bound' (lower barrier, constant `source_bound`).

    Returns:
    --------
    new_values: np.ndarray
        Interior: u + dt (F(x, t_k, D^2 u) - rhs(u)); boundary from
        `boundary_value` at t_{k+1}.
    """
    if mode not in RHS_MODES:
        raise ValueError(f"Unknown right-hand side '{mode}'. Pick from {RHS_MODES}.")
    grid = config.grid
    with np.errstate(over='ignore', invalid='ignore'):
        Fu, rhs = _terms(values, grid.times[level], config, mode, grid.interior_mesh())
    mask = grid.boundary_mask()
    return _advance(values, Fu, rhs, level, config, mask, grid.mesh()[mask])


def initial_values(config):
    grid = config.grid
    return np.asarray(
        boundary_value(config.boundary, grid.mesh(), grid.times[0], config.params),
        dtype=float,
    ).reshape(grid.shape)


def _evolve(config, mode):
    grid = config.grid
    times = grid.times
    dt = grid.dt
    points = grid.interior_mesh()
    mask = grid.boundary_mask()
    boundary_points = grid.mesh()[mask]
    store = set(int(k) for k in grid.stored_levels)

    logger.info('Evolving %s with rhs=%s: %d steps, dt=%.3e', config, mode,
                grid.n_steps, dt)
    start = time.perf_counter()

    u = initial_values(config)
    _check_finite(u, 0)
    stored = [u.copy()]
    residuals = np.empty(grid.n_steps)
    lo, hi = u.min(), u.max()
    prev = None

    with np.errstate(over='ignore', invalid='ignore'):
        for k in range(grid.n_steps + 1):
            Fu, rhs = _terms(u, times[k], config, mode, points)
            u_int = _interior(u)
            if prev is not None:
                residuals[k - 1] = np.abs(Fu - (u_int - prev) / dt - rhs).max()
            if k == grid.n_steps:
                break

            prev = u_int.copy()
            u = _advance(u, Fu, rhs, k, config, mask, boundary_points)

            lo = min(lo, u.min())
            hi = max(hi, u.max())
            if k + 1 in store:
                stored.append(u.copy())
            if (k + 1) % 10000 == 0:
                logger.debug('Level %d/%d, t=%.4f, max residual %.3e',
                             k + 1, grid.n_steps, times[k + 1], residuals[k])

    wall_time = time.perf_counter() - start
    logger.info('Finished in %.2fs; min %.3e, max %.3e', wall_time, lo, hi)

    return SolveResult(
        trajectory=GridFunction(grid, np.stack(stored)),
        dt=dt,
        residuals=residuals,
        min_value=float(lo),
        max_value=float(hi),
        wall_time=wall_time,
        n_steps=grid.n_steps,
    )


def solve(config):
    """Runs the scheme from t = -T to t = 0.

    Returns:
    --------
    result: SolveResult
        Deterministic for a fixed config.
    """
    return _evolve(config, 'source')


def barrier_upper(config):
    """Solution of F(x, t, D^2 u) - u_t = 0 with the same data."""
    return _evolve(config, 'zero').trajectory


def barrier_lower(config):
    """Solution of F(x, t, D^2 u) - u_t = source_bound with the same data."""
    return _evolve(config, 'bound').trajectory


def sandwich_check(u_eps, lower, upper, tol=1e-6):
    """Checks lower - tol <= u_eps <= upper + tol at every stored node.

    Returns:
    --------
    report: CheckReport
        `worst` is the largest violation (positive means out of order).
    """
    check_same_grid(u_eps, lower, upper)
    below = lower.values - u_eps.values
    above = u_eps.values - upper.values

    if below.max() >= above.max():
        side, gap = 'lower', below
    else:
        side, gap = 'upper', above
    idx = np.unravel_index(np.argmax(gap), gap.shape)
    worst = float(gap[idx])

    return CheckReport(
        name='sandwich',
        passed=worst <= tol,
        worst=worst,
        tolerance=tol,
        witness={
            'side': side,
            'level': int(idx[0]),
            'node': [int(i) for i in idx[1:]],
            't': float(u_eps.times[idx[0]]),
        },
    )


def pde_residual(gf, operator, rhs):
    """|F(x, t, D^2 u) - u_t - rhs(u)| at interior nodes, with u_t the
    backward difference between consecutive stored levels.

    Parameters:
    -----------
    gf: GridFunction
        At least two stored levels.
    operator: OperatorSpec or RescaledOperator
        Anything with `apply(points, t, H)`.
    rhs: callable
        Maps interior values of one level (and its time) to the
        right-hand side.

    Returns:
    --------
    residual: GridFunction
        At the stored times after the first; boundary nodes are 0.
    """
    if len(gf) < 2:
        raise ValueError('Residuals need a trajectory with at least 2 levels.')
    grid = gf.grid
    points = grid.interior_mesh()
    out = np.zeros((len(gf) - 1,) + grid.shape)
    for k in range(1, len(gf)):
        t = gf.times[k]
        u = gf[k]
        Fu = operator.apply(points, t, hessian_field(u, grid.h))
        ut = (_interior(u) - _interior(gf[k - 1])) / (t - gf.times[k - 1])
        value = np.abs(Fu - ut - rhs(_interior(u), t))
        if grid.d == 1:
            out[k - 1, 1:-1] = value
        else:
            out[k - 1, 1:-1, 1:-1] = value

    return GridFunction(grid, out, gf.times[1:])


def residual(gf, config):
    """Residual of the penalized equation for a stored trajectory."""
    return pde_residual(gf, config.spec, lambda u, t: source(u, config.params))
