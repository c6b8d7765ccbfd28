import numpy as np
import pandas as pd

import holoviews as hv

import quenching as qn

import pytest


def small_field():
    grid = qn.make_grid(1, -1, 1, 17, 0.5, 0.25)
    return qn.GridFunction.from_function(grid, lambda x, t: qn.exact_profile(x[..., 0], 0.5) - t)


def test_plot_methods():
    gf = small_field()

    for plot in qn.viz.FIELD_PLOTS:
        assert hasattr(gf, plot)

    with pytest.raises(AttributeError):
        gf.plot_fit

def test_plot_profile_method():
    gf = small_field()
    p = gf.plot_profile(gamma=0.5)
    assert isinstance(p, hv.Overlay)

    p = gf.plot_profile()
    assert isinstance(p, hv.Curve)

def test_plot_snapshot_method():
    gf = small_field()
    assert isinstance(gf.plot_snapshot(), hv.Image)

def test_as_grid_function():
    gf = small_field()
    df = gf.to_df()
    assert isinstance(df, pd.DataFrame)

    read = df.as_grid_function(gf.grid)
    assert isinstance(read, qn.GridFunction)
    assert np.array_equal(read.values, gf.values)

def test_save_svg(tmp_path):
    gf = small_field()
    fit = qn.fit_exponent([1/4, 1/8, 1/16], [1.0, 0.4, 0.16], reference=4/3,
                          quantity='fb_growth')

    qn.viz.save_svg(gf.plot_profile(gamma=0.5), tmp_path / 'profile.svg')
    qn.viz.save_svg(qn.viz.plot_fit(fit), tmp_path / 'fit')

    assert (tmp_path / 'profile.svg').exists()
    assert (tmp_path / 'fit.svg').exists()
