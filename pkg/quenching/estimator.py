"""
Measurements on discrete fields: oscillations over intrinsic cylinders,
Hoelder quotients in space and time, gradient-to-power ratios, free
boundary detection and growth, and log-log exponent fits.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import linregress

from .base import CheckReport, _to_builtin
from .grid import (Cylinder, cylinder_mask, discrete_gradient, gradient_field,
                   locate_center)
from .solver import exact_profile
from .util import check_open_unit


###################
# Exponent fits
###################

@dataclass
class ExponentFit:
    """A log-log least-squares fit log(values) = slope log(radii) + intercept.

    `passed` is None unless both a reference exponent and a tolerance were
    given.
    """
    quantity: str
    radii: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    r2: float
    reference: float = None
    tolerance: float = None
    center: tuple = None
    excluded: int = 0

    @property
    def constant(self):
        """exp(intercept), the fitted C in values ~ C radii^slope."""
        return float(np.exp(self.intercept))

    @property
    def passed(self):
        if self.reference is None or self.tolerance is None:
            return None
        return bool(abs(self.slope - self.reference) <= self.tolerance)

    def to_dict(self):
        return _to_builtin({
            'quantity': self.quantity,
            'center': self.center,
            'radii': self.radii,
            'values': self.values,
            'slope': self.slope,
            'intercept': self.intercept,
            'r2': self.r2,
            'reference': self.reference,
            'pass': self.passed,
            'excluded': self.excluded,
        })


def fit_exponent(radii, values, reference=None, tolerance=None, quantity='',
                 center=None):
    """Fits the exponent of a power law values ~ C radii^slope.

    Parameters:
    -----------
    radii: array-like
        Positive radii.
    values: array-like
        Measured values; nonpositive or non-finite entries are excluded
        and counted.
    reference: float, default None
        Expected exponent, recorded with the fit.
    tolerance: float, default None
        Allowed |slope - reference| for the fit to pass.
    quantity: str, default ''
        Name of what was measured.
    center: tuple, default None
        Where it was measured.

    Returns:
    --------
    fit: ExponentFit

    Examples:
    ---------
    >>> radii = np.array([1/4, 1/8, 1/16, 1/32])
    >>> qn.fit_exponent(radii, radii**(4/3)).slope
    1.3333333333333333
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.shape != values.shape:
        raise ValueError('radii and values must have the same length.')
    if np.any(radii <= 0):
        raise ValueError('All radii must be positive.')

    usable = np.isfinite(values) & (values > 0)
    if usable.sum() < 3:
        raise ValueError(
            f'Need at least 3 positive values to fit an exponent, found {usable.sum()}.'
        )
    x = np.log(radii[usable])
    y = np.log(values[usable])
    result = linregress(x, y)

    ss_tot = ((y - y.mean())**2).sum()
    if ss_tot == 0:
        r2 = 1.0
    else:
        ss_res = ((y - (result.slope * x + result.intercept))**2).sum()
        r2 = 1 - ss_res / ss_tot

    return ExponentFit(
        quantity=quantity,
        radii=radii,
        values=values,
        slope=float(result.slope),
        intercept=float(result.intercept),
        r2=float(r2),
        reference=reference,
        tolerance=tolerance,
        center=center,
        excluded=int((~usable).sum()),
    )


def dyadic_radii(grid, count=4):
    """Grid-aligned radii rho = 2^-m (b - a)/2, m >= 1, with rho >= 4h.

    Returns the `count` smallest admissible radii in descending order, or
    all of them if fewer exist (at least 3 are required).
    """
    half = (grid.b - grid.a) / 2
    radii = []
    m = 1
    while half * 2.0**-m >= 4 * grid.h - 1e-12:
        radii.append(half * 2.0**-m)
        m += 1
    if len(radii) < 3:
        raise ValueError(
            f'Grid too coarse for 3 dyadic radii >= 4h (h={grid.h}).'
        )
    return np.array(radii[-count:])


###################
# Oscillations
###################

def _center_of(gf, cyl):
    node, level = locate_center(gf.grid, cyl, gf.times)
    return node, level, gf[(level,) + node]


def oscillation(gf, cyl):
    """sup over G_rho(y, s) of |u - u(y, s)|; the center must be a node
    and a stored level.
    """
    levels, mask = cylinder_mask(gf.grid, cyl, gf.times)
    _, _, center_value = _center_of(gf, cyl)
    inside = gf[levels][:, mask]

    return float(np.abs(inside - center_value).max())


def plane_oscillation(gf, cyl, gradient=None):
    """sup over G_rho(y, s) of |u(x,t) - u(y,s) - grad u(y,s).(x - y)|.

    The gradient defaults to `discrete_gradient` at the center, which then
    must not be a boundary node.
    """
    node, level, center_value = _center_of(gf, cyl)
    if gradient is None:
        gradient = discrete_gradient(gf, node, level)
    gradient = np.atleast_1d(np.asarray(gradient, dtype=float))

    levels, mask = cylinder_mask(gf.grid, cyl, gf.times)
    offsets = gf.grid.mesh()[mask] - np.array(cyl.center)
    plane = offsets @ gradient
    inside = gf[levels][:, mask]

    return float(np.abs(inside - center_value - plane[None, :]).max())


def _inner_mask(grid):
    """Nodes of the inner half-domain (the box of half the side length)."""
    mid = (grid.a + grid.b) / 2
    quarter = (grid.b - grid.a) / 4
    inside = np.abs(grid.mesh() - mid) <= quarter + 1e-9 * grid.h
    return inside.all(axis=-1)


def spatial_holder_quotient(v, mu, level=-1):
    """max |v(x,t) - v(y,t)|/|x - y|^mu over node pairs of the inner
    half-domain, at one stored level.
    """
    check_open_unit(mu, 'mu')
    mask = _inner_mask(v.grid)
    points = v.grid.mesh()[mask]
    values = v[v.level_index(level)][mask]

    best = 0.0
    for i in range(len(values) - 1):
        dist = np.linalg.norm(points[i + 1:] - points[i], axis=-1)
        quotient = np.abs(values[i + 1:] - values[i]) / dist**mu
        best = max(best, float(quotient.max()))

    return best


def temporal_holder_quotient(v, mu, node=None, kappa0=None):
    """max |v(x,t) - v(x,s)|/|t - s|^(mu/2) over stored level pairs with
    t, s in (-kappa0/2, 0], at a fixed node.

    Parameters:
    -----------
    v: GridFunction
    mu: float
        In (0, 1).
    node: tuple of int, default None
        Node in the inner half-domain; defaults to the grid center.
    kappa0: float, default None
        From `verification.kappa0_thm`; None uses every stored level.
    """
    check_open_unit(mu, 'mu')
    grid = v.grid
    if node is None:
        node = grid.nearest_node([(grid.a + grid.b) / 2] * grid.d)
    node = grid._as_node(node)
    if not _inner_mask(grid)[node]:
        raise ValueError(f'Node {node} is outside the inner half-domain.')

    times = v.times
    keep = np.ones(len(times), dtype=bool)
    if kappa0 is not None:
        keep = times > -kappa0 / 2
    t = times[keep]
    series = v[(slice(None),) + node][keep]
    if len(t) < 2:
        return 0.0

    dt = np.abs(t[:, None] - t[None, :])
    dv = np.abs(series[:, None] - series[None, :])
    off = dt > 0
    return float((dv[off] / dt[off]**(mu / 2)).max())


def gradient_bound_ratio(u, theta, floor, level=-1):
    """max |grad u|^2/u^theta over interior nodes of the inner half-domain
    with u > floor.

    Parameters:
    -----------
    u: GridFunction
    theta: float
        0 < theta < gamma.
    floor: float
        Excludes the penalization layer; use `params.tau_high`.
    level: int, default -1
    """
    if not theta > 0:
        raise ValueError(f'Need theta > 0, found {theta}.')
    grid = u.grid
    values = u[u.level_index(level)]
    grad = gradient_field(values, grid.h)
    inner = _inner_mask(grid)
    if grid.d == 1:
        values_int, inner = values[1:-1], inner[1:-1]
    else:
        values_int, inner = values[1:-1, 1:-1], inner[1:-1, 1:-1]

    keep = inner & (values_int > floor)
    if not np.any(keep):
        raise ValueError(f'No interior node with u > {floor} in the inner half-domain.')
    ratio = (grad**2).sum(axis=-1)[keep] / values_int[keep]**theta

    return float(ratio.max())


###################
# Free boundary
###################

@dataclass
class FreeBoundarySet:
    """Nodes of the discrete free boundary of {u > tau}, per stored level.

    `nodes[k]` holds every node with an axis neighbor across the threshold
    (either side); `zero[k]` only those with u <= tau.
    """
    tau: float
    nodes: dict = field(default_factory=dict)
    zero: dict = field(default_factory=dict)

    def zero_side(self, level=-1):
        key = sorted(self.nodes)[level] if level < 0 else level
        return self.zero[key]

    def is_empty(self, level=-1):
        return len(self.zero_side(level)) == 0

    def nearest(self, grid, point=None, level=-1):
        """Zero-side node closest to `point` (default the grid center)."""
        zero = self.zero_side(level)
        if len(zero) == 0:
            raise ValueError('No free boundary node at this level.')
        if point is None:
            point = [(grid.a + grid.b) / 2] * grid.d
        coords = grid.a + zero * grid.h
        k = int(np.argmin(np.linalg.norm(coords - np.asarray(point), axis=-1)))
        return tuple(int(i) for i in zero[k])

    def to_df(self):
        rows = []
        for level, nodes in self.nodes.items():
            zero = {tuple(n) for n in self.zero[level]}
            for node in nodes:
                rows.append({'level': level, 'node': tuple(int(i) for i in node),
                             'zero_side': tuple(node) in zero})
        return pd.DataFrame(rows, columns=['level', 'node', 'zero_side'])


def detect_free_boundary(u, tau, levels=None):
    """Nodes where u <= tau next to u > tau (or the reverse), along each
    axis, for every stored level (or the given ones).
    """
    if not tau > 0:
        raise ValueError(f'Need a threshold tau > 0, found {tau}.')
    if levels is None:
        levels = range(len(u))

    fb = FreeBoundarySet(tau=tau)
    for level in levels:
        level = u.level_index(level)
        above = u[level] > tau
        boundary = np.zeros_like(above)
        for axis in range(u.grid.d):
            lo = [slice(None)] * u.grid.d
            hi = [slice(None)] * u.grid.d
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            change = above[tuple(lo)] != above[tuple(hi)]
            boundary[tuple(lo)] |= change
            boundary[tuple(hi)] |= change
        fb.nodes[level] = np.argwhere(boundary)
        fb.zero[level] = np.argwhere(boundary & ~above)

    return fb


def fb_growth(u, fb_point, radii, reference, level=-1, tolerance=None):
    """Fits sup over G_rho(fb_point) of u against rho.

    Parameters:
    -----------
    u: GridFunction
    fb_point: tuple of int
        A free boundary node, e.g. from `FreeBoundarySet.nearest`.
    radii: array-like
        Radii, each cylinder inside the grid.
    reference: float
        Expected exponent, 1 + alpha.
    level: int, default -1
        Level of the cylinders' top.
    tolerance: float, default None

    Returns:
    --------
    fit: ExponentFit
    """
    grid = u.grid
    k = u.level_index(level)
    center = tuple(float(c) for c in grid.node_coordinates(fb_point))
    sups = []
    for rho in radii:
        levels, mask = cylinder_mask(grid, Cylinder(center, u.times[k], rho), u.times)
        sups.append(float(u[levels][:, mask].max()))

    return fit_exponent(radii, sups, reference=reference, tolerance=tolerance,
                        quantity='fb_growth', center=center)


###################
# Growth and Lipschitz bounds
###################

def lipschitz_constant(u, center, radii, level=-1):
    """Measured C in sup over G_r of |u - u(center)| <= C r.

    Returns:
    --------
    constant: float
        max over radii of oscillation(r)/r.
    fit: ExponentFit
        Oscillations against radii, reference exponent 1.
    """
    grid = u.grid
    coords = tuple(float(c) for c in grid.node_coordinates(center))
    s = u.times[u.level_index(level)]
    osc = np.array([oscillation(u, Cylinder(coords, s, r)) for r in radii])
    radii = np.asarray(radii, dtype=float)
    fit = fit_exponent(radii, osc, reference=1.0, quantity='lipschitz',
                       center=coords)

    return float((osc / radii).max()), fit


def growth_bound_check(u, params, mu, radii, center=None, holder_constant=None,
                       level=-1):
    """Checks sup over G_r of u <= (C r^mu + u(center)^(1/(1+alpha)))^(1+alpha)
    at each radius.

    C is the Hoelder constant of v = u^((2-gamma)/2) unless given: the
    spatial quotient on the inner half-domain at the top level plus the
    temporal quotient at the center. Earlier levels away from the center
    enter neither, so the bound can fail there.
    """
    grid = u.grid
    if center is None:
        center = grid.nearest_node([(grid.a + grid.b) / 2] * grid.d)
    coords = tuple(float(c) for c in grid.node_coordinates(center))
    k = u.level_index(level)
    s = u.times[k]
    p = 1 + params.alpha
    radii = np.asarray(radii, dtype=float)

    if holder_constant is None:
        v = u.map(lambda a: np.maximum(a, 0)**(1 / p))
        holder_constant = (spatial_holder_quotient(v, mu, level=k)
                           + temporal_holder_quotient(v, mu, node=center))

    u0 = max(u[(k,) + tuple(center)], 0.0)
    sups, bounds = [], []
    for r in radii:
        levels, mask = cylinder_mask(grid, Cylinder(coords, s, r), u.times)
        sups.append(float(u[levels][:, mask].max()))
        bounds.append(float((holder_constant * r**mu + u0**(1 / p))**p))
    sups, bounds = np.array(sups), np.array(bounds)
    gap = sups - bounds
    tol = 1e-10 * (1 + bounds.max())

    return CheckReport(
        name='growth',
        passed=bool(np.all(gap <= tol)),
        worst=float(gap.max()),
        tolerance=tol,
        witness={'center': coords, 'radii': radii, 'sup': sups, 'bound': bounds,
                 'holder_constant': holder_constant, 'mu': mu},
    )


def profile_error(u, gamma, x0=0.0, offset=0.0, level=-1):
    """Sup-norm distance of one level to the exact profile (plus `offset`,
    e.g. the positivity shift), along the first coordinate.
    """
    x = u.grid.mesh()[..., 0]
    target = exact_profile(x, gamma, x0) + offset
    return float(np.abs(u[u.level_index(level)] - target).max())
