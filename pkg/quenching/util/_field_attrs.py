from functools import wraps

try:
    import pandas_flavor as pf
except ImportError:
    pf = None

import quenching as qn

# For placing viz plot methods on GridFunction
def _get_viz_attr(gf, plot):
    attr = getattr(qn.viz, plot)
    @wraps(attr)
    def wrapper(*args, **kwargs):
        return attr(gf, *args, **kwargs)

    return plot, wrapper

def _set_viz_attrs(gf):
    for plot in qn.viz.FIELD_PLOTS:
        attr_pair = _get_viz_attr(gf, plot)
        setattr(gf, *attr_pair)


# pandas_flavor (pf) lets a tidy fields table come back as a GridFunction
if pf is not None:
    @pf.register_dataframe_method
    def as_grid_function(df, grid):
        """Adds a method .as_grid_function() to wrap a fields table as
        qn.GridFunction on `grid`.
        """
        return qn.parsers.fields_to_grid_function(df, grid)
