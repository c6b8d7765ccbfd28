"""
Numerical checks of the structural identities behind the estimates: the
power transform v = u^((2-gamma)/2) and the singular equation it solves,
the scaling v(k x, k^2 t)/k^theta, the comparison principle for Pucci
equations with a quadratic gradient term, and the quadratic barriers that
control time oscillations.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .base import CheckReport
from .estimator import fit_exponent
from .grid import GridFunction, gradient_field, hessian_field, make_grid
from .operators import (EllipticityParams, OperatorSpec, _pucci, alpha_of_gamma,
                        apply_F, rescaled_operator, source)
from .solver import _interior, pde_residual, residual
from .util import check_finite_positive, check_same_grid

logger = logging.getLogger(__name__)


###################
# Types
###################

@dataclass(frozen=True)
class GeneralEqSpec:
    """The singular equation F(x,t, D^2 v + delta v^-1 grad v (x) grad v) - v_t = f v^-1.

    Parameters:
    -----------
    operator: OperatorSpec
    delta: float, default 0.0
        Gradient-term coefficient, >= 0.
    f: float or GridFunction, default 0.0
        Source field; a GridFunction must be stored at the same levels as
        the fields it is used with.
    """
    operator: OperatorSpec
    delta: float = 0.0
    f: object = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError(f'Need delta >= 0, found {self.delta}.')
        if not isinstance(self.f, GridFunction) and not np.isfinite(self.f):
            raise ValueError('Source field f must be finite.')

    @property
    def f_inf(self):
        if isinstance(self.f, GridFunction):
            return float(np.abs(self.f.values).max())
        return abs(float(self.f))

    def f_at(self, level):
        if isinstance(self.f, GridFunction):
            return _interior(self.f[level])
        return float(self.f)


@dataclass(frozen=True)
class RescaleParams:
    """Scaling v -> v(k x, k^2 t)/k^theta with dyadic k = 2^-m."""
    kappa: float
    theta: float = 0.0

    def __post_init__(self):
        check_finite_positive(self.kappa, 'kappa')
        if self.theta < 0:
            raise ValueError(f'Need theta >= 0, found {self.theta}.')

    @property
    def m(self):
        """m with kappa = 2^-m; raises unless kappa is dyadic."""
        m = -np.log2(self.kappa)
        if m < -1e-12 or abs(m - round(m)) > 1e-12:
            raise ValueError(
                f'kappa must be 2^-m for an integer m >= 0, found {self.kappa}.'
            )
        return int(round(m))


@dataclass(frozen=True)
class TimeBarrierParams:
    """Constants of the barriers h+-(x,t) = v0 +- L +- K|x|^2 +- Kbar (t - tau1)."""
    L: float
    K: float
    Kbar: float
    c1: float = 0.0
    c2: float = 0.0
    M: float = 0.0
    n: int = 1
    Lam: float = 1.0

    def __post_init__(self):
        if not self.L > 1:
            raise ValueError(f'Need L > 1, found L={self.L}.')
        check_finite_positive(self.K, 'K')
        check_finite_positive(self.Kbar, 'Kbar')
        if self.c1 < 0 or self.c2 < 0 or self.M < 0:
            raise ValueError('Need c1, c2, M >= 0.')

    @classmethod
    def canonical(cls, L, c1=0.0, c2=0.0, M=0.0, n=1, Lam=1.0):
        """K = 2L and Kbar = 2 n Lam K + 4 c1 K^2 + M."""
        K = 2 * L
        Kbar = 2 * n * Lam * K + 4 * c1 * K**2 + M
        return cls(L, K, Kbar, c1, c2, M, n, Lam)

    @property
    def is_canonical(self):
        Kbar = 2 * self.n * self.Lam * self.K + 4 * self.c1 * self.K**2 + self.M
        return bool(np.isclose(self.Kbar, Kbar, rtol=1e-12, atol=0))


###################
# Power transform
###################

def transform_v(u, gamma, tol=0.0):
    """v = u^((2-gamma)/2), so that v^(1+alpha) = u.

    Values in [-tol, 0) are taken as 0; anything more negative is an
    error.
    """
    alpha_of_gamma(gamma)
    low = u.values.min()
    if low < -tol:
        idx = np.unravel_index(np.argmin(u.values), u.values.shape)
        raise ValueError(
            f'Cannot transform a negative field: u = {low:.3e} at level '
            f'{idx[0]}, node {tuple(int(i) for i in idx[1:])}.'
        )
    power = (2 - gamma) / 2
    return u.map(lambda a: np.maximum(a, 0)**power)


ANALYTIC_CATALOG = {
    'constant': (1, lambda x, t: np.full(x.shape[:-1], 2.0)),
    'sine': (1, lambda x, t: 2 + np.sin(x[..., 0])),
    'sine_cos': (1, lambda x, t: 2 + np.sin(x[..., 0]) * np.cos(t)),
    'exp_xy': (2, lambda x, t: np.exp(x[..., 0] * x[..., 1])),
}


def _stencil(point, h):
    point = np.atleast_1d(np.asarray(point, dtype=float))
    d = len(point)
    offsets = np.arange(-1, 2) * h
    if d == 1:
        return (point[0] + offsets)[:, None]
    X, Y = np.meshgrid(point[0] + offsets, point[1] + offsets, indexing='ij')
    return np.stack([X, Y], axis=-1)


def transform_identity_residual(u_analytic, point, h, gamma=0.5, t=0.0):
    """Frobenius norm of the difference of the two sides of

        D^2 v + alpha v^-1 grad v (x) grad v = (1/(1+alpha)) v^-1 u^(1-gamma) D^2 u,

    v = u^((2-gamma)/2), both sides by central differences of step h at
    one point. The difference is O(h^2).

    Parameters:
    -----------
    u_analytic: str or callable
        A name from ANALYTIC_CATALOG, or f(x, t) with x of shape (..., d).
    point: float or tuple of float
        Where to evaluate.
    h: float
        Stencil step.
    gamma: float, default 0.5
        In [0, 1); gamma = 0 makes the identity a tautology.
    t: float, default 0.0
    """
    if not 0 <= gamma < 1:
        raise ValueError(f'Need 0 <= gamma < 1, found {gamma}.')
    check_finite_positive(h, 'h')
    func = ANALYTIC_CATALOG[u_analytic][1] if isinstance(u_analytic, str) else u_analytic

    stencil = _stencil(point, h)
    u = np.asarray(func(stencil, t), dtype=float)
    if np.any(u <= 0):
        raise ValueError('The analytic function must be positive on the stencil.')
    alpha = gamma / (2 - gamma)
    v = u**((2 - gamma) / 2)

    center = (1,) * u.ndim
    grad_v = gradient_field(v, h).reshape(-1)
    lhs = hessian_field(v, h).reshape(len(grad_v), -1) \
        + alpha / v[center] * np.outer(grad_v, grad_v)
    rhs = hessian_field(u, h).reshape(len(grad_v), -1) \
        * u[center]**(1 - gamma) / v[center] / (1 + alpha)

    return float(np.linalg.norm(lhs - rhs))


def identity_convergence_order(u_analytic, point, hs=(0.02, 0.01, 0.005),
                               gamma=0.5, t=0.0):
    """Order of `transform_identity_residual` in h, fitted over `hs`."""
    residuals = [transform_identity_residual(u_analytic, point, h, gamma, t)
                 for h in hs]
    return fit_exponent(hs, residuals, quantity='identity_residual')


###################
# Singular equation
###################

def _transformed_operator_terms(v_level, h, delta):
    H = hessian_field(v_level, h)
    if delta:
        g = gradient_field(v_level, h)
        H = H + delta / _interior(v_level)[..., None, None] * (g[..., :, None] * g[..., None, :])
    return H


def _check_positive(v, floor):
    interior = np.stack([_interior(v[k]) for k in range(len(v))])
    if floor is None and np.any(interior <= 0):
        raise ValueError('v must be positive at every interior node.')


def implied_source(v, spec, delta, floor=None):
    """f = v (F(x,t, D^2 v + delta v^-1 grad v (x) grad v) - v_t) at interior
    nodes, with v_t the backward difference of stored levels.

    Nodes with v <= floor (and boundary nodes) are reported as 0.
    """
    _check_positive(v, floor)
    grid = v.grid
    points = grid.interior_mesh()
    out = np.zeros((len(v) - 1,) + grid.shape)
    for k in range(1, len(v)):
        level = v[k]
        v_int = _interior(level)
        keep = v_int > (0.0 if floor is None else floor)
        with np.errstate(divide='ignore', invalid='ignore'):
            H = _transformed_operator_terms(level, grid.h, delta)
            Fv = apply_F(spec, points, v.times[k], H)
            vt = (v_int - _interior(v[k - 1])) / (v.times[k] - v.times[k - 1])
            f = np.where(keep, v_int * (Fv - vt), 0.0)
        if grid.d == 1:
            out[k - 1, 1:-1] = f
        else:
            out[k - 1, 1:-1, 1:-1] = f

    return GridFunction(grid, out, v.times[1:])


def general_eq_residual(v, geq, floor=None):
    """|F(x,t, D^2 v + delta v^-1 grad v (x) grad v) - v_t - f v^-1| at
    interior nodes, for stored levels after the first.
    """
    _check_positive(v, floor)
    grid = v.grid
    points = grid.interior_mesh()
    out = np.zeros((len(v) - 1,) + grid.shape)
    for k in range(1, len(v)):
        level = v[k]
        v_int = _interior(level)
        keep = v_int > (0.0 if floor is None else floor)
        with np.errstate(divide='ignore', invalid='ignore'):
            H = _transformed_operator_terms(level, grid.h, geq.delta)
            Fv = apply_F(geq.operator, points, v.times[k], H)
            vt = (v_int - _interior(v[k - 1])) / (v.times[k] - v.times[k - 1])
            value = np.where(keep, np.abs(Fv - vt - geq.f_at(k) / v_int), 0.0)
        if grid.d == 1:
            out[k - 1, 1:-1] = value
        else:
            out[k - 1, 1:-1, 1:-1] = value

    return GridFunction(grid, out, v.times[1:])


###################
# Scaling
###################

def rescaled_source_exponent(theta, gamma):
    """e(theta, gamma) = theta (gamma - 1) + 2 - theta; zero at
    theta = 1 + alpha.
    """
    return theta * (gamma - 1) + 2 - theta


def rescaled_epsilon(eps, kappa, theta, gamma):
    """eps k^(-theta/(1+alpha)), so that B_eps(k^theta s) = B_(rescaled eps)(s)."""
    return eps * kappa**(-theta / (1 + alpha_of_gamma(gamma)))


def rescale_field(v, rp):
    """v_k(x, t) = v(k x, k^2 t)/k^theta on the same box, by exact
    resampling.

    With k = 2^-m the new grid has (N-1)k + 1 nodes of spacing h/k,
    and k x falls on the original nodes around the center. Stored times
    become t/k^2.
    """
    m = rp.m
    grid = v.grid
    kappa = rp.kappa
    cells = (grid.N - 1) * kappa
    if abs(cells - round(cells)) > 1e-9 or round(cells) < 2:
        raise ValueError(
            f'kappa={kappa} does not fit the grid: (N-1) kappa must be an integer >= 2.'
        )
    new_N = int(round(cells)) + 1
    offset = (kappa - 1) * grid.a / grid.h
    if abs(offset - round(offset)) > 1e-9:
        raise ValueError('Rescaled nodes do not fall on the grid; need a box '
                         'symmetric about 0 with (1 - kappa)(N - 1)/2 an integer.')
    start = int(round(offset))
    if start < 0 or start + new_N > grid.N:
        raise ValueError('The scaled box kappa [a, b] must lie inside [a, b].')
    window = (slice(None),) + (slice(start, start + new_N),) * grid.d

    new_grid = make_grid(grid.d, grid.a, grid.b, new_N, grid.T / kappa**2,
                         grid.dt / kappa**2)
    logger.debug('Rescaled by kappa=2^-%d: N %d -> %d', m, grid.N, new_N)

    return GridFunction(new_grid, v.values[window] / kappa**rp.theta,
                        v.times / kappa**2)


def rescaled_residual(v_kappa, config, rp):
    """Residual of v_k in F_k(x,t, D^2 v) - v_t = k^e B_eps'(v) v^(gamma-1),
    with F_k from `rescaled_operator`, e = e(theta, gamma) and eps' from
    `rescaled_epsilon`.
    """
    params = config.params
    eps = rescaled_epsilon(params.eps, rp.kappa, rp.theta, params.gamma)
    rescaled = params.with_eps(eps)
    factor = rp.kappa**rescaled_source_exponent(rp.theta, params.gamma)
    operator = rescaled_operator(config.spec, rp.kappa, rp.theta)

    return pde_residual(v_kappa, operator,
                        lambda u, t: factor * source(u, rescaled))


def rescale_residual_check(u, config, kappa=0.5, theta=None, factor=2.0):
    """Checks that the residual of the rescaled trajectory in the rescaled
    equation stays within `factor` times the residual of `u` itself.

    theta defaults to 1 + alpha, where the source exponent vanishes.
    """
    if theta is None:
        theta = 1 + config.params.alpha
    rp = RescaleParams(kappa, theta)
    baseline = float(residual(u, config).values.max())
    rescaled = float(rescaled_residual(rescale_field(u, rp), config, rp).values.max())
    bound = factor * baseline + 1e-12

    return CheckReport(
        name='rescale_residual',
        passed=rescaled <= bound,
        worst=rescaled - bound,
        tolerance=0.0,
        witness={'kappa': kappa, 'theta': theta, 'baseline': baseline,
                 'rescaled': rescaled},
    )


###################
# Comparison
###################

def _boundary_track(gf, mask):
    """Boundary values of a field as a function of time (piecewise linear
    between stored levels, constant for a single level).
    """
    data = gf.values[:, mask]
    times = gf.times
    if len(times) == 1:
        return lambda t: data[0]

    def track(t):
        return np.array([np.interp(t, times, data[:, j]) for j in range(data.shape[1])])
    return track


def comparison_trial(v_sub, v_super, c=0.0, M_const=0.0, sign='minus',
                     lam=1.0, Lam=1.0, T=None, safety=0.5, tol=1e-8):
    """Evolves two data sets in lockstep under

        M^+-(D^2 v) + c |grad v|^2 - v_t + M_const = 0

    and checks that their order is kept.

    Parameters:
    -----------
    v_sub, v_super: GridFunction
        Parabolic boundary data: level 0 is the initial level, the
        boundary nodes of the stored levels give the lateral data
        (interpolated linearly in time). Needs v_sub <= v_super there.
    c: float, default 0.0
        Gradient coefficient, >= 0.
    M_const: float, default 0.0
    sign: str, default 'minus'
        'minus' or 'plus' Pucci operator.
    lam, Lam: float, default 1.0
    T: float, default None
        Horizon; defaults to the span of the stored times, or the grid's
        T for single-level data.
    safety: float, default 0.5
    tol: float, default 1e-8

    Returns:
    --------
    report: CheckReport
        `worst` is max(v_sub - v_super) over all computed levels.
    """
    if sign not in ('minus', 'plus'):
        raise ValueError(f"sign must be 'minus' or 'plus', found {sign!r}.")
    if c < 0:
        raise ValueError(f'Need c >= 0, found {c}.')
    check_same_grid(v_sub, v_super)
    EllipticityParams(lam, Lam)

    grid = v_sub.grid
    mask = grid.boundary_mask()
    if np.any(v_sub[0] > v_super[0]) or np.any(v_sub.values[:, mask] > v_super.values[:, mask]):
        raise ValueError('Data are not ordered on the parabolic boundary '
                         '(need v_sub <= v_super).')

    if T is None:
        span = v_sub.times[-1] - v_sub.times[0]
        T = span if span > 0 else grid.T
    t0 = -T
    sub_track = _boundary_track(v_sub, mask)
    super_track = _boundary_track(v_super, mask)

    diffusion = 2 * grid.d * Lam / grid.h**2
    a, b = v_sub[0].copy(), v_super[0].copy()
    t = t0
    worst, witness, steps = float((a - b).max()), {'t': t0}, 0

    def rate(u):
        Du = _pucci(hessian_field(u, grid.h), lam, Lam, sign)
        g = gradient_field(u, grid.h)
        return Du + c * (g**2).sum(axis=-1) + M_const

    while t < 0 - 1e-14:
        G = max(np.abs(gradient_field(a, grid.h)).max(),
                np.abs(gradient_field(b, grid.h)).max())
        if c * G * grid.h > lam:
            logger.warning('Grid Peclet number %.3g exceeds lam; the scheme '
                           'is not monotone here', c * G * grid.h)
        dt = min(safety / (diffusion + 2 * c * G / grid.h), -t)

        new_a, new_b = a.copy(), b.copy()
        if grid.d == 1:
            new_a[1:-1] += dt * rate(a)
            new_b[1:-1] += dt * rate(b)
        else:
            new_a[1:-1, 1:-1] += dt * rate(a)
            new_b[1:-1, 1:-1] += dt * rate(b)
        t = t + dt
        new_a[mask] = sub_track(t)
        new_b[mask] = super_track(t)
        a, b = new_a, new_b
        steps += 1

        gap = a - b
        k = np.unravel_index(np.argmax(gap), gap.shape)
        if gap[k] > worst:
            worst = float(gap[k])
            witness = {'t': t, 'node': [int(i) for i in k], 'step': steps}

    return CheckReport(
        name='comparison',
        passed=worst <= tol,
        worst=worst,
        tolerance=tol,
        witness=dict(witness, sign=sign, c=c, M_const=M_const, steps=steps),
    )


def random_comparison_trials(n=50, seed=0, N=129, T=0.05, lam=1.0, Lam=2.0):
    """Randomized ordered-data comparison trials in 1D on [-1, 1], cycling
    through both Pucci signs, c in {0, 0.5} and M_const in {0, 1}.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(1, -1.0, 1.0, N, T, T)
    x = grid.coords()
    combos = [(sign, c, M) for sign in ('minus', 'plus')
              for c in (0.0, 0.5) for M in (0.0, 1.0)]

    reports = []
    for trial in range(n):
        sign, c, M_const = combos[trial % len(combos)]
        freq = rng.integers(1, 4, size=2)
        amp = rng.uniform(-1, 1, size=2)
        base = amp[0] * np.sin(freq[0] * np.pi * x) + amp[1] * np.cos(freq[1] * np.pi * x / 2)
        lift = rng.uniform(0, 0.5) + rng.uniform(0, 0.5) * (1 + np.sin(np.pi * x * rng.uniform(1, 3)))
        sub = GridFunction(grid, base[None, :], times=[-T])
        sup = GridFunction(grid, (base + lift)[None, :], times=[-T])
        reports.append(comparison_trial(sub, sup, c, M_const, sign, lam, Lam, T=T))

    return reports


###################
# Time barriers
###################

def time_barrier(v0, tbp, tau1, grid, center=None):
    """Barriers h+-(x, t) = v0 +- L +- K|x - center|^2 +- Kbar (t - tau1) on
    the stored levels t >= tau1.

    Returns:
    --------
    h_minus, h_plus: GridFunction
    """
    times = grid.stored_times
    times = times[times >= tau1 - 1e-12]
    if len(times) == 0:
        raise ValueError(f'No stored level at or after tau1={tau1}.')
    if center is None:
        center = np.full(grid.d, (grid.a + grid.b) / 2)
    r2 = ((grid.mesh() - np.asarray(center, dtype=float))**2).sum(axis=-1)
    dt = (times - tau1)[:, None] if grid.d == 1 else (times - tau1)[:, None, None]

    spread = tbp.L + tbp.K * r2[None] + tbp.Kbar * dt
    return (GridFunction(grid, v0 - spread, times),
            GridFunction(grid, v0 + spread, times))


def time_barrier_params(geq, v_sup, L):
    """Canonical barrier constants for the singular equation in {v > 1}:
    c1 = delta Lam, c2 = delta lam/||v||, M = ||f||.
    """
    spec = geq.operator
    return TimeBarrierParams.canonical(
        L,
        c1=geq.delta * spec.Lam,
        c2=geq.delta * spec.lam / v_sup,
        M=geq.f_inf,
        n=spec.d,
        Lam=spec.Lam,
    )


def kappa0(L, M, n, Lam, c1):
    """1/4 min{1, 2L/(M + 4 n Lam L + 16 c1 L^2)}, for L > 1."""
    if not L > 1:
        raise ValueError(f'Need L > 1, found L={L}.')
    return 0.25 * min(1.0, 2 * L / (M + 4 * n * Lam * L + 16 * c1 * L**2))


def kappa0_thm(C, f_inf, n, Lam, delta):
    """1/4 min{1, 8C/(||f|| + 16 n Lam C + 64 delta Lam C^2)}."""
    check_finite_positive(C, 'C')
    return 0.25 * min(1.0, 8 * C / (f_inf + 16 * n * Lam * C + 64 * delta * Lam * C**2))


def holder_time_constant(C, mu, kappa0_value):
    """C* = 8C (2/sqrt(kappa0))^mu, the constant of the temporal Hoelder bound."""
    return 8 * C * (2 / np.sqrt(kappa0_value))**mu


def time_oscillation_check(v, spec, delta=0.0, f_inf=1.0, center=None, tol=1e-6):
    """Checks sup over t in (-kappa0, 0] of |v(center, 0) - v(center, t)| <= 8L.

    L is the largest oscillation of v over the unit ball around the
    center (clipped to the box) among the stored levels. When L <= 1 the
    check runs on w = s v with s = 2/L, which solves the same singular
    equation with source s^2 f, so L becomes 2 and M = s^2 f_inf; the drift
    bound 8L for w is 8 times the measured oscillation for v, so a field
    with no oscillation must not drift at all. kappa0 uses c1 = delta Lam.
    The witness also records whether w stays between the barriers h+- with
    tau1 = -kappa0 (not part of the verdict).
    """
    grid = v.grid
    if center is None:
        center = grid.nearest_node([(grid.a + grid.b) / 2] * grid.d)
    center = grid._as_node(center)
    coords = grid.node_coordinates(center)
    ball = np.linalg.norm(grid.mesh() - coords, axis=-1) <= 1 + 1e-9 * grid.h

    inside = v.values[:, ball]
    measured = float((inside.max(axis=1) - inside.min(axis=1)).max())
    if measured > 1:
        scale, L = 1.0, measured
    else:
        scale, L = (2 / measured if measured > 0 else 2.0), 2.0
    M = scale**2 * f_inf
    k0 = kappa0(L, M, grid.d, spec.Lam, delta * spec.Lam)

    # 8L for w is 8 measured for v
    series = v[(slice(None),) + center]
    recent = v.times > -k0
    drift = float(np.abs(series[-1] - series[recent]).max())
    bound = 8 * measured

    w = scale * v.values

    tbp = TimeBarrierParams.canonical(L, c1=delta * spec.Lam, M=M,
                                      n=grid.d, Lam=spec.Lam)
    levels = np.flatnonzero(v.times >= -k0 - 1e-12)
    tau1 = float(v.times[levels[0]])
    w0 = float(w[(levels[0],) + center])
    r2 = ((grid.mesh() - coords)**2).sum(axis=-1)
    dt = v.times[levels] - tau1
    spread = tbp.L + tbp.K * r2[None] + tbp.Kbar * dt.reshape((-1,) + (1,) * grid.d)
    window = w[levels][:, ball]
    held = bool(np.all(window <= (w0 + spread)[:, ball] + tol)
                and np.all(window >= (w0 - spread)[:, ball] - tol))

    return CheckReport(
        name='time_oscillation',
        passed=drift <= bound + tol,
        worst=drift - bound,
        tolerance=tol,
        witness={'L': L, 'measured_L': measured, 'scale': scale, 'kappa0': k0,
                 'drift': drift, 'barrier_sandwich': held},
    )
