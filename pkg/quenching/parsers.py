"""
Tools for reading experiment configs and field tables back into
quenching objects.
"""

import copy
from dataclasses import dataclass

import numpy as np
import pandas as pd
import yaml

from .grid import GridFunction, make_grid
from .operators import PenalizationParams, make_operator
from .solver import BoundaryData, SolveConfig
from .util import check_config


@dataclass
class ExperimentConfig:
    """A validated experiment configuration, one dict per section, with
    every default filled in.
    """
    experiment: dict
    grid: dict
    operator: dict
    penalization: dict
    boundary: dict
    estimator: dict
    output: dict

    @property
    def name(self):
        return self.experiment['name']

    @property
    def eps_values(self):
        return list(self.penalization['eps'])

    def to_dict(self):
        """Fully-defaulted echo of the config; itself a valid config."""
        return copy.deepcopy({
            'experiment': self.experiment,
            'grid': self.grid,
            'operator': self.operator,
            'penalization': self.penalization,
            'boundary': self.boundary,
            'estimator': self.estimator,
            'output': self.output,
        })

    def params(self, eps):
        pen = self.penalization
        return PenalizationParams(pen['gamma'], pen['sigma0'], eps)

    def solve_config(self, eps, N=None):
        """SolveConfig for one eps; `N` overrides the nodes per axis (used
        for refinement studies).
        """
        g = self.grid
        N = g['N'] if N is None else N
        grid = make_grid(g['d'], g['a'], g['b'], N, g['T'], g['T'],
                         max_stored_levels=g['max_stored_levels'])
        op = self.operator
        spec = make_operator(
            op['variant'], op['lam'], op['Lam'], op['coefficients'],
            op['amplitude'], op['modulus'], op['modulus_K'], d=g['d'],
            domain=(g['a'], g['b']), grid=grid,
        )
        boundary = BoundaryData(**self.boundary)

        return SolveConfig(grid, spec, self.params(eps), boundary)


def parse_config(raw):
    """Validates a config mapping and returns an ExperimentConfig."""
    return ExperimentConfig(**check_config(raw))


def load_config(path):
    """Reads a YAML experiment config.

    Parameters:
    -----------
    path: str or Path
        YAML file with the sections experiment, grid, operator,
        penalization, boundary, estimator, output.

    Returns:
    --------
    config: ExperimentConfig
    """
    with open(path, 'r') as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f'Could not parse config file {path}: {e}')

    return parse_config(raw)


def fields_to_grid_function(df, grid):
    """Rebuilds a GridFunction from a tidy fields table (the layout of
    `GridFunction.to_df`).
    """
    index_cols = ['i', 'j'][:grid.d]
    for col in ['level', 't', *index_cols, 'u']:
        if col not in df.columns:
            raise ValueError(
                f'Could not find column "{col}" in the fields table.'
            )

    df = df.sort_values(['level', *index_cols])
    n_levels = df['level'].nunique()
    n_nodes = int(np.prod(grid.shape))
    if len(df) != n_levels * n_nodes:
        raise ValueError(
            f'Fields table has {len(df)} rows, expected {n_levels} levels x '
            f'{n_nodes} nodes.'
        )
    times = df.groupby('level', sort=True)['t'].first().to_numpy()
    values = df['u'].to_numpy().reshape((n_levels,) + grid.shape)

    return GridFunction(grid, values, times)


def read_fields(path, grid):
    """Reads a fields.csv written by `GridFunction.to_csv`."""
    df = pd.read_csv(path, float_precision='round_trip')
    return fields_to_grid_function(df, grid)
