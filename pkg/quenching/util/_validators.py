import math

import numpy as np


def check_finite_positive(value, name):
    """Checks that a scalar is a finite, strictly positive number.
    Passes silently, otherwise raises error.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise TypeError(
            f"Your {name} must be a number, found type {type(value)}."
        )
    if not math.isfinite(value) or value <= 0:
        raise ValueError(
            f"Your {name} must be a finite positive number, found {value}."
        )


def check_open_unit(value, name):
    """Checks that a scalar lies in the open interval (0, 1)."""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise TypeError(
            f"Your {name} must be a number, found type {type(value)}."
        )
    if not (0 < value < 1):
        raise ValueError(
            f"Your {name} must lie strictly between 0 and 1, found {value}."
        )


def check_symmetric(M, name='matrix'):
    """Checks that a square matrix is finite and symmetric.

    Returns the matrix as a 2D float array.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(
            f"Your {name} must be square, found shape {M.shape}."
        )
    if M.shape[0] not in (1, 2):
        raise ValueError(
            f"Only 1x1 and 2x2 matrices are supported, found {M.shape}."
        )
    if not np.all(np.isfinite(M)):
        raise ValueError(f"Your {name} contains non-finite entries.")

    scale = 1 + np.abs(M).max()
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValueError(
            f"Your {name} is not symmetric:\n{M}"
        )

    return M


def check_same_grid(*fields):
    """Checks that every field lives on the same spatial grid with the
    same stored times.
    """
    first = fields[0]
    for other in fields[1:]:
        if other.grid.spatial_key() != first.grid.spatial_key():
            raise ValueError(
                'Fields live on different spatial grids: '
                f'{first.grid} vs {other.grid}.'
            )
        if (len(other.times) != len(first.times)
                or not np.allclose(other.times, first.times, rtol=0, atol=1e-12)):
            raise ValueError(
                'Fields are stored at different time levels.'
            )


# Acceptable configuration sections and keys, with their defaults
CONFIG_SCHEMA = {
    'experiment': {
        'name': 'experiment',
    },
    'grid': {
        'd': 1,
        'a': -1.0,
        'b': 1.0,
        'N': 129,
        'T': 0.5,
        'max_stored_levels': 257,
    },
    'operator': {
        'variant': 'linear',
        'lam': 1.0,
        'Lam': 1.0,
        'coefficients': 'identity',
        'amplitude': 0.5,
        'modulus': 'zero',
        'modulus_K': 0.0,
    },
    'penalization': {
        'gamma': 0.5,
        'sigma0': 0.1,
        'eps': [0.1],
    },
    'boundary': {
        'preset': 'positive_constant',
        'shift': False,
        'value': 1.0,
        'x0': 0.0,
    },
    'estimator': {
        'measurements': ['sandwich', 'fb_growth', 'gradient', 'lipschitz',
                         'plane', 'holder', 'time_oscillation', 'growth'],
        'radii_count': 4,
        'mu': 0.9,
        'theta': None,
        'beta_reference': None,
        'slope_tolerance': 0.07,
        'profile_tolerance': 0.02,
        'sandwich_tolerance': 1e-6,
    },
    'output': {
        'directory': 'results',
    },
}

VARIANTS = ('pucci_minus', 'pucci_plus', 'linear')
COEFFICIENT_PRESETS = ('identity', 'sine', 'constant')
MODULUS_PRESETS = ('zero', 'linear')
BOUNDARY_PRESETS = ('positive_constant', 'bump', 'exact_profile', 'zero')
MEASUREMENTS = tuple(CONFIG_SCHEMA['estimator']['measurements'])


def _config_error(section, key, message):
    return ValueError(f"Config key '{section}.{key}': {message}")


def check_config(raw):
    """Checks that all configuration entries are specified correctly
    and fills in defaults.

    Returns a new nested dict with every section and key present.
    """
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError(
            'Config should be a mapping of sections, following the form '
            '{section: {key: value}}.'
        )

    unknown = set(raw) - set(CONFIG_SCHEMA)
    if unknown:
        raise ValueError(
            f"Unknown config section(s) {sorted(unknown)}. "
            f"Acceptable sections are {list(CONFIG_SCHEMA)}."
        )

    config = {}
    for section, defaults in CONFIG_SCHEMA.items():
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise ValueError(
                f"Config section '{section}' must be a mapping of keys to values."
            )
        unknown = set(given) - set(defaults)
        if unknown:
            key = sorted(unknown)[0]
            raise _config_error(
                section, key,
                f"not a recognized key. Acceptable keys are {list(defaults)}."
            )
        merged = dict(defaults)
        merged.update(given)
        config[section] = merged

    # Grid
    grid = config['grid']
    if grid['d'] not in (1, 2):
        raise _config_error('grid', 'd', f"must be 1 or 2, found {grid['d']}.")
    for key in ('a', 'b', 'T'):
        if not isinstance(grid[key], (int, float)) or isinstance(grid[key], bool):
            raise _config_error('grid', key, f"must be a number, found {grid[key]!r}.")
    if not grid['a'] < grid['b']:
        raise _config_error('grid', 'b', 'must be larger than grid.a.')
    if not isinstance(grid['N'], int) or grid['N'] < 3:
        raise _config_error('grid', 'N', f"must be an integer >= 3, found {grid['N']!r}.")
    if grid['T'] <= 0:
        raise _config_error('grid', 'T', f"must be positive, found {grid['T']}.")
    if grid['max_stored_levels'] is not None and (
            not isinstance(grid['max_stored_levels'], int)
            or grid['max_stored_levels'] < 2):
        raise _config_error('grid', 'max_stored_levels', 'must be an integer >= 2.')

    # Operator
    op = config['operator']
    if op['variant'] not in VARIANTS:
        raise _config_error('operator', 'variant',
                            f"must be one of {VARIANTS}, found {op['variant']!r}.")
    if op['coefficients'] not in COEFFICIENT_PRESETS:
        raise _config_error('operator', 'coefficients',
                            f"must be one of {COEFFICIENT_PRESETS}.")
    if op['modulus'] not in MODULUS_PRESETS:
        raise _config_error('operator', 'modulus',
                            f"must be one of {MODULUS_PRESETS}.")
    if not 0 < op['lam'] <= op['Lam']:
        raise _config_error('operator', 'lam', 'must satisfy 0 < lam <= Lam.')

    # Penalization
    pen = config['penalization']
    gamma = pen['gamma']
    if isinstance(gamma, bool) or not isinstance(gamma, (int, float)) or not 0 < gamma < 1:
        raise _config_error('penalization', 'gamma',
                            f"must lie strictly between 0 and 1, found {gamma!r}.")
    if not 0 < pen['sigma0'] < 1:
        raise _config_error('penalization', 'sigma0', 'must lie strictly between 0 and 1.')
    eps = pen['eps']
    if not isinstance(eps, (list, tuple)):
        eps = [eps]
    if len(eps) == 0:
        raise _config_error('penalization', 'eps', 'must contain at least one value.')
    for value in eps:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
            raise _config_error('penalization', 'eps',
                                f"values must be positive numbers, found {value!r}.")
    pen['eps'] = [float(value) for value in eps]

    # Boundary
    bnd = config['boundary']
    if bnd['preset'] not in BOUNDARY_PRESETS:
        raise _config_error('boundary', 'preset',
                            f"must be one of {BOUNDARY_PRESETS}, found {bnd['preset']!r}.")
    if not isinstance(bnd['shift'], bool):
        raise _config_error('boundary', 'shift', 'must be true or false.')

    # Estimator
    est = config['estimator']
    measurements = est['measurements']
    if not isinstance(measurements, (list, tuple)):
        measurements = [measurements]
    bad = [m for m in measurements if m not in MEASUREMENTS]
    if bad:
        raise _config_error('estimator', 'measurements',
                            f"unknown measurement(s) {bad}. Pick from {MEASUREMENTS}.")
    est['measurements'] = list(measurements)
    if not isinstance(est['radii_count'], int) or est['radii_count'] < 3:
        raise _config_error('estimator', 'radii_count', 'must be an integer >= 3.')
    if not 0 < est['mu'] < 1:
        raise _config_error('estimator', 'mu', 'must lie strictly between 0 and 1.')
    if est['theta'] is not None and not 0 < est['theta'] < gamma:
        raise _config_error('estimator', 'theta',
                            f"must satisfy 0 < theta < gamma = {gamma}.")

    return config
