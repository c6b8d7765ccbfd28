"""
Visualization functions for GridFunctions, exponent fits and sweep
tables. Plots are holoviews objects; `save_svg` writes them as static
SVG files through the matplotlib backend.
"""

import numpy as np

import holoviews as hv
hv.extension('matplotlib')

from .solver import exact_profile


class Colors():
    """Mild color palette."""
    blue = '#3E94FA'
    green = '#8DED81'
    orange = '#E18409'
    gray = '#9A9A9A'


# Plots that take a GridFunction first; these are also set as methods
FIELD_PLOTS = ('plot_profile', 'plot_snapshot')


def _line(gf, level):
    """x coordinates and values of one level (the middle row in 2D)."""
    grid = gf.grid
    values = gf[gf.level_index(level)]
    if grid.d == 2:
        values = values[:, grid.N // 2]
    return grid.coords(), values


def plot_profile(gf, level=-1, gamma=None, x0=0.0, offset=0.0, title=None,
                 plot_opts=None):
    """Plots one level of a field along x.

    Parameters:
    -----------
    gf: GridFunction
    level: int, default -1
        Stored level; in 2D the middle row is shown.
    gamma: float, default None
        If given, overlays the exact profile with free boundary at `x0`
        (plus `offset`).
    x0: float, default 0.0
    offset: float, default 0.0
    title: string, default None
    plot_opts: dict, default None
        Holoviews opts for the field curve.

    Returns:
    --------
    p: Holoviews plot
    """
    if plot_opts is None:
        plot_opts = {}
    x, values = _line(gf, level)
    t = gf.times[gf.level_index(level)]

    opts = {'color': Colors.blue, 'xlabel': 'x', 'ylabel': 'u'}
    opts.update(plot_opts)
    p = hv.Curve((x, values), 'x', 'u', label=f't = {t:.3g}').opts(**opts)

    if gamma is not None:
        profile = exact_profile(x, gamma, x0) + offset
        p = p * hv.Curve((x, profile), 'x', 'u', label='exact profile').opts(
            color=Colors.orange, linestyle='dashed'
        )
        p = p.opts(title=title or '')

    elif title is not None:
        p = p.opts(title=title)

    return p


def plot_snapshot(gf, level=-1, cmap='viridis', plot_opts=None):
    """Heat map of one level (2D) or of the whole space-time history (1D)."""
    if plot_opts is None:
        plot_opts = {}
    grid = gf.grid
    if grid.d == 1:
        bounds = (grid.a, gf.times[0], grid.b, gf.times[-1])
        img = hv.Image(gf.values[::-1], bounds=bounds, kdims=['x', 't'], vdims=['u'])
    else:
        values = gf[gf.level_index(level)].T[::-1]
        bounds = (grid.a, grid.a, grid.b, grid.b)
        img = hv.Image(values, bounds=bounds, kdims=['x', 'y'], vdims=['u'])

    opts = {'cmap': cmap, 'colorbar': True}
    opts.update(plot_opts)
    return img.opts(**opts)


def plot_fit(fit, title=None):
    """Log-log plot of an ExponentFit: measured values, the fitted line
    and, when present, a reference-slope guide through the largest radius.
    """
    radii = np.asarray(fit.radii)
    values = np.asarray(fit.values)
    usable = values > 0
    r, v = radii[usable], values[usable]

    points = hv.Scatter((r, v), 'radius', fit.quantity or 'value',
                        label='measured').opts(color=Colors.blue, s=40,
                                               logx=True, logy=True)
    fitted = hv.Curve((r, np.exp(fit.intercept) * r**fit.slope),
                      'radius', fit.quantity or 'value',
                      label=f'slope {fit.slope:.3f}').opts(
        color=Colors.blue, logx=True, logy=True
    )
    p = points * fitted

    if fit.reference is not None:
        k = int(np.argmax(r))
        guide = v[k] * (r / r[k])**fit.reference
        p = p * hv.Curve((r, guide), 'radius', fit.quantity or 'value',
                         label=f'reference {fit.reference:.3f}').opts(
            color=Colors.gray, linestyle='dashed', logx=True, logy=True
        )

    return p.opts(title=title or fit.quantity)


def plot_sweep(table, column, title=None):
    """A sweep-table column against eps on log axes."""
    p = hv.Curve((table['eps'], table[column]), 'eps', column).opts(
        color=Colors.green, logx=True
    )
    p = p * hv.Scatter((table['eps'], table[column]), 'eps', column).opts(
        color=Colors.green, s=30, logx=True
    )
    return p.opts(title=title or column)


def save_svg(p, path):
    """Writes a plot as a static SVG file (the '.svg' suffix is added by
    holoviews when missing).
    """
    path = str(path)
    if path.endswith('.svg'):
        path = path[:-4]
    hv.save(p, path, fmt='svg', backend='matplotlib')
