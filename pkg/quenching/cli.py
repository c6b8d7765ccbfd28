"""
Command-line experiment runner.

    quenching run <config.yaml>      solve + checks for every eps
    quenching sweep <config.yaml>    the same plus the cross-eps table
    quenching report <dir>           aggregate pass/fail of report.json files
    quenching selfcheck              operator and penalization property suites

Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 numerical
blow-up.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import viz
from .base import CheckReport, summarize
from .estimator import (detect_free_boundary, dyadic_radii, fb_growth, fit_exponent,
                        gradient_bound_ratio, growth_bound_check, lipschitz_constant,
                        plane_oscillation, profile_error, spatial_holder_quotient,
                        temporal_holder_quotient)
from .grid import Cylinder
from .operators import (check_continuity, check_homogeneity, check_uniform_parabolicity,
                        beta_eps, bump, make_operator, PenalizationParams, source,
                        source_bound)
from .parsers import load_config, parse_config
from .solver import SchemeBlowUp, barrier_lower, barrier_upper, sandwich_check, solve
from .verification import (holder_time_constant, identity_convergence_order, implied_source,
                           kappa0_thm, random_comparison_trials, rescale_residual_check,
                           rescaled_source_exponent, time_oscillation_check, transform_v)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


def _write_json(obj, path):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=2)
        f.write('\n')


def _center_node(grid):
    return grid.nearest_node([(grid.a + grid.b) / 2] * grid.d)


def _bulk_node(grid):
    return grid.nearest_node([grid.a + 3 * (grid.b - grid.a) / 4] * grid.d)


def _or_nan(value):
    return np.nan if value is None else value


def _check(name, passed, worst, tolerance=0.0, **witness):
    return CheckReport(name, bool(passed), float(worst), tolerance, witness)


###################
# One eps
###################

def run_single(config_dict, eps, out_dir):
    """Solves one eps, runs the measurement battery and writes fields.csv,
    report.json, metadata.json and plots/*.svg into `out_dir`.

    Returns:
    --------
    report: dict
        The content of report.json.
    final: np.ndarray
        The t = 0 level of the solution.
    """
    started = datetime.now(timezone.utc)
    config = parse_config(config_dict)
    est = config.estimator
    bnd = config.boundary
    measurements = est['measurements']
    profile_run = bnd['preset'] == 'exact_profile'

    sc = config.solve_config(eps)
    grid, params, spec = sc.grid, sc.params, sc.spec
    logger.info('Running %s at eps=%g', config.name, eps)

    result = solve(sc)
    u = result.trajectory
    checks, asserted, fits, measures = [], set(), [], {}

    # Solver invariants
    mask = grid.boundary_mask()
    data_sup = max(u[0].max(), u.values[:, mask].max())
    checks.append(_check('uniform_bound', result.max_value <= data_sup + 1e-10,
                         result.max_value - data_sup, 1e-10))
    asserted.add('uniform_bound')
    if min(u[0].min(), u.values[:, mask].min()) >= 0:
        checks.append(_check('nonnegativity', result.min_value >= -1e-10,
                             -result.min_value, 1e-10))
        asserted.add('nonnegativity')

    if 'sandwich' in measurements:
        upper = barrier_upper(sc)
        lower = barrier_lower(sc)
        checks.append(sandwich_check(u, lower, upper, est['sandwich_tolerance']))
        asserted.add('sandwich')

    if profile_run:
        offset = params.scale if bnd['shift'] else 0.0
        error = profile_error(u, params.gamma, bnd['x0'], offset)
        checks.append(_check('profile', error <= est['profile_tolerance'], error,
                             est['profile_tolerance']))
        asserted.add('profile')
        measures['profile_error'] = error

    uses_radii = {'fb_growth', 'lipschitz', 'plane', 'growth'} & set(measurements)
    radii = dyadic_radii(grid, est['radii_count']) if uses_radii else None
    center = _center_node(grid)

    if 'fb_growth' in measurements:
        fb = detect_free_boundary(u, params.tau_low, levels=[-1])
        node = None
        if profile_run:
            # Growth is measured at the free boundary of the limit profile;
            # the detected one can drift with the leak below tau_low.
            target = [bnd['x0']] + [(grid.a + grid.b) / 2] * (grid.d - 1)
            node = grid.nearest_node(target)
            if not fb.is_empty():
                detected = grid.node_coordinates(fb.nearest(grid, target))
                measures['fb_offset'] = float(np.linalg.norm(
                    detected - grid.node_coordinates(node)))
        elif not fb.is_empty():
            node = fb.nearest(grid)

        tolerance = est['slope_tolerance'] if profile_run else None
        reason = None
        if node is None:
            reason = 'no free boundary at t = 0'
        else:
            try:
                fits.append(fb_growth(u, node, radii, 1 + params.alpha,
                                      tolerance=tolerance))
            except ValueError as e:
                reason = str(e)
        if reason is not None:
            logger.warning('Free boundary growth not measured: %s', reason)
            if profile_run:
                checks.append(_check('fb_growth', False, np.inf, tolerance,
                                     reason=reason))
                asserted.add('fb_growth')

    if 'gradient' in measurements:
        theta = est['theta'] if est['theta'] is not None else params.gamma / 2
        try:
            measures['gradient_ratio'] = gradient_bound_ratio(u, theta, params.tau_high)
        except ValueError as e:
            logger.warning('Gradient ratio skipped: %s', e)
            measures['gradient_ratio'] = None

    if 'lipschitz' in measurements:
        refine = (grid.N - 1) % 2 == 0
        lip_radii = radii
        if refine:
            coarse = config.solve_config(eps, N=(grid.N - 1) // 2 + 1)
            try:
                lip_radii = dyadic_radii(coarse.grid, est['radii_count'])
            except ValueError:
                logger.info('Coarse grid too small for a refinement check')
                refine = False
        constant, fit = lipschitz_constant(u, center, lip_radii)
        fits.append(fit)
        measures['lipschitz'] = constant
        if refine:
            u_coarse = solve(coarse).trajectory
            coarse_constant, _ = lipschitz_constant(u_coarse, _center_node(coarse.grid),
                                                    lip_radii)
            drift = abs(constant - coarse_constant) / max(constant, 1e-300)
            measures['lipschitz_coarse'] = coarse_constant
            checks.append(_check('lipschitz_refinement', drift <= 0.25, drift, 0.25,
                                 fine=constant, coarse=coarse_constant))
            if profile_run:
                asserted.add('lipschitz_refinement')

    if 'plane' in measurements:
        node = _bulk_node(grid)
        coords = tuple(float(c) for c in grid.node_coordinates(node))
        if est['beta_reference'] is not None:
            reference = 1 + est['beta_reference']
        elif spec.variant == 'linear':
            reference = 1 + min(params.alpha, 1.0)
        else:
            reference = None
        try:
            values = [plane_oscillation(u, Cylinder(coords, 0.0, r)) for r in radii]
            fits.append(fit_exponent(radii, values, reference, quantity='plane',
                                     center=coords))
        except ValueError as e:
            logger.warning('Plane oscillation skipped: %s', e)

    if 'holder' in measurements or 'time_oscillation' in measurements:
        v = transform_v(u, params.gamma, tol=1e-10)
        floor = params.tau_high**((2 - params.gamma) / 2)
        f = implied_source(v, spec, params.alpha, floor=floor)
        f_inf = float(np.abs(f.values).max())
        checks.append(_check('implied_source', f_inf <= 1.0, f_inf, 1.0))
        measures['implied_source_max'] = f_inf

        if 'holder' in measurements:
            mu = est['mu']
            spatial = spatial_holder_quotient(v, mu)
            C = float(v.values.max()) if v.values.max() > 0 else 1.0
            k0 = kappa0_thm(C, f_inf, grid.d, spec.Lam, params.alpha)
            measures.update({
                'holder_space': spatial,
                'holder_time': temporal_holder_quotient(v, mu, kappa0=k0),
                'kappa0_thm': k0,
                'holder_time_constant': holder_time_constant(C, mu, k0),
            })

        if 'time_oscillation' in measurements:
            checks.append(time_oscillation_check(v, spec, delta=params.alpha,
                                                 f_inf=f_inf))
            asserted.add('time_oscillation')

    if 'growth' in measurements:
        try:
            checks.append(growth_bound_check(u, params, est['mu'], radii, center))
            asserted.add('growth')
        except ValueError as e:
            logger.warning('Growth bound skipped: %s', e)

    check_records = []
    for check in checks:
        record = check.to_dict()
        record['asserted'] = check.name in asserted
        check_records.append(record)

    passed = all(c.passed for c in checks if c.name in asserted) \
        and all(fit.passed is not False for fit in fits)

    report = {
        'name': config.name,
        'eps': eps,
        'config': config.to_dict(),
        'diagnostics': result.diagnostics(),
        'checks': check_records,
        'fits': [fit.to_dict() for fit in fits],
        'measurements': measures,
        'pass': bool(passed),
    }

    # Files
    out_dir = Path(out_dir)
    (out_dir / 'plots').mkdir(parents=True, exist_ok=True)
    u.to_csv(out_dir / 'fields.csv')
    _write_json(report, out_dir / 'report.json')

    gamma = params.gamma if profile_run else None
    offset = params.scale if bnd['shift'] else 0.0
    viz.save_svg(viz.plot_profile(u, gamma=gamma, x0=bnd['x0'], offset=offset,
                                  title=f'eps = {eps:g}'),
                 out_dir / 'plots' / 'profile.svg')
    for fit in fits:
        viz.save_svg(viz.plot_fit(fit), out_dir / 'plots' / f'{fit.quantity}.svg')

    finished = datetime.now(timezone.utc)
    _write_json({
        'started': started.isoformat(),
        'finished': finished.isoformat(),
        'wall_time': (finished - started).total_seconds(),
        'solver_wall_time': result.wall_time,
    }, out_dir / 'metadata.json')

    logger.info('eps=%g: %s', eps, 'pass' if passed else 'FAIL')
    return report, u.final


def _run_all(config, out_root, threads=1):
    eps_list = config.eps_values
    config_dict = config.to_dict()
    dirs = [Path(out_root) / config.name / f'eps_{eps:g}' for eps in eps_list]

    if threads > 1 and len(eps_list) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_single, [config_dict] * len(eps_list),
                                 eps_list, dirs))
    return [run_single(config_dict, eps, d) for eps, d in zip(eps_list, dirs)]


def _out_root(config, out):
    return Path(out) if out is not None else Path(config.output['directory'])


def run(config_path, out=None, threads=1):
    """Runs every eps of a config.

    Returns:
    --------
    summary: dict
        'name', 'pass' and the per-eps 'runs' reports.
    """
    config = load_config(config_path)
    outputs = _run_all(config, _out_root(config, out), threads)
    reports = [report for report, _ in outputs]

    return {
        'name': config.name,
        'pass': all(r['pass'] for r in reports),
        'runs': reports,
    }


###################
# Sweeps
###################

def sweep_epsilon(config, out=None, threads=1):
    """Runs a descending eps sweep and tabulates its eps-uniformity.

    Parameters:
    -----------
    config: ExperimentConfig, dict or path
    out: str, default None
        Output root; defaults to the config's output directory.
    threads: int, default 1
        Worker processes, one eps each.

    Returns:
    --------
    table: pd.DataFrame
        One row per eps: fb_slope, gradient_ratio, lipschitz,
        sandwich_margin, profile_error, the drifts relative to the
        first eps and limit_gap (sup-norm change of the t = 0 field from
        the previous eps).
    report: dict
        Sweep-level report, also written to <out>/<name>/report.json.
    """
    if isinstance(config, dict):
        config = parse_config(config)
    elif not hasattr(config, 'eps_values'):
        config = load_config(config)

    eps_list = config.eps_values
    if len(eps_list) < 2:
        raise ValueError('An eps sweep needs at least 2 eps values.')
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f'eps values must be strictly descending, found {eps_list}.')

    root = _out_root(config, out)
    outputs = _run_all(config, root, threads)

    rows = []
    previous = None
    for (report, final), eps in zip(outputs, eps_list):
        fits = {fit['quantity']: fit for fit in report['fits']}
        checks = {check['name']: check for check in report['checks']}
        measures = report['measurements']
        rows.append({
            'eps': eps,
            'fb_slope': fits['fb_growth']['slope'] if 'fb_growth' in fits else np.nan,
            'gradient_ratio': _or_nan(measures.get('gradient_ratio')),
            'lipschitz': _or_nan(measures.get('lipschitz')),
            'sandwich_margin': checks['sandwich']['worst'] if 'sandwich' in checks else np.nan,
            'profile_error': _or_nan(measures.get('profile_error')),
            'limit_gap': np.nan if previous is None else float(np.abs(final - previous).max()),
            'pass': report['pass'],
        })
        previous = final

    table = pd.DataFrame(rows)
    table['fb_slope_drift'] = table['fb_slope'] - table['fb_slope'].iloc[0]
    table['gradient_drift'] = table['gradient_ratio'] / table['gradient_ratio'].iloc[0]
    table['lipschitz_drift'] = table['lipschitz'] / table['lipschitz'].iloc[0] - 1

    checks = []
    ratios = table['gradient_ratio'].dropna()
    if len(ratios) >= 2:
        spread = float(ratios.max() / ratios.min())
        checks.append(_check('gradient_uniformity', spread <= 2.0, spread, 2.0))

    report = {
        'name': config.name,
        'eps': eps_list,
        'config': config.to_dict(),
        'table': json.loads(table.to_json(orient='records')),
        'checks': [c.to_dict() for c in checks],
        'pass': bool(table['pass'].all() and all(c.passed for c in checks)),
    }

    exp_dir = root / config.name
    exp_dir.mkdir(parents=True, exist_ok=True)
    table.to_csv(exp_dir / 'sweep.csv', index=False, float_format='%.17g')
    _write_json(report, exp_dir / 'report.json')
    (exp_dir / 'plots').mkdir(exist_ok=True)
    for column in ('fb_slope', 'gradient_ratio', 'lipschitz'):
        if table[column].notna().all():
            viz.save_svg(viz.plot_sweep(table, column), exp_dir / 'plots' / f'{column}.svg')

    return table, report


###################
# Reports
###################

def report(results_dir):
    """Aggregates every report.json under a directory.

    Returns:
    --------
    table: pd.DataFrame
        One row per report: file, name, eps, pass.
    """
    results_dir = Path(results_dir)
    paths = sorted(results_dir.rglob('report.json'))
    if not paths:
        raise ValueError(f'No report.json found under {results_dir}.')

    rows = []
    for path in paths:
        try:
            with open(path, 'r') as f:
                content = json.load(f)
            rows.append({
                'file': str(path.relative_to(results_dir)),
                'name': content['name'],
                'eps': content.get('eps'),
                'pass': bool(content['pass']),
            })
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ValueError(f'Malformed report file {path}: {e}')

    return pd.DataFrame(rows, columns=['file', 'name', 'eps', 'pass'])


def format_report(table):
    n_pass = int(table['pass'].sum())
    return f"{table.to_string(index=False)}\n{n_pass}/{len(table)} pass"


###################
# Self check
###################

def selfcheck(seed=0):
    """Operator, penalization and structural property suites.

    Returns:
    --------
    records: list of CheckReport
    """
    records = []
    ops = [
        make_operator('pucci_minus', 1.0, 2.0),
        make_operator('pucci_plus', 1.0, 2.0),
        make_operator('linear', 1.0, 1.0),
        make_operator('pucci_minus', 0.5, 3.0, d=2),
        make_operator('linear', 0.5, 1.5, 'sine', 0.5, 'linear', np.pi * 0.5 * 2,
                      d=2, domain=(-1.0, 1.0)),
    ]
    for spec in ops:
        for check in (check_uniform_parabolicity, check_homogeneity, check_continuity):
            record = check(spec, 1000, seed)
            record.name = f'{record.name}[{spec.variant}, d={spec.d}]'
            records.append(record)

    for gamma in (0.25, 0.5, 0.75):
        params = PenalizationParams(gamma, 0.1, 0.1)
        s = np.linspace(-0.01, 2 * params.tau_high, 20001)
        B = beta_eps(s, params)
        steps = np.diff(B)
        records.append(_check(f'beta_monotone[gamma={gamma}]', steps.min() >= -1e-12,
                              -steps.min(), 1e-12))
        records.append(_check(f'beta_range[gamma={gamma}]',
                              B.min() >= 0 and B.max() <= gamma, B.max() - gamma))
        S = source(np.linspace(0, 1, 200001), params)
        bound = source_bound(params)
        records.append(_check(f'source_bound[gamma={gamma}]', S.max() <= bound,
                              S.max() - bound))

    theta = np.linspace(0, 1, 100001)
    mass = float(np.sum((bump(theta[1:]) + bump(theta[:-1])) / 2) * (theta[1] - theta[0]))
    records.append(_check('bump_mass', abs(mass - 1) <= 1e-8, abs(mass - 1), 1e-8))

    rng = np.random.default_rng(seed)
    gammas = rng.uniform(0.01, 0.99, size=100)
    exponents = np.abs([rescaled_source_exponent(1 + g / (2 - g), g) for g in gammas])
    records.append(_check('scaling_exponent', exponents.max() <= 1e-12,
                          exponents.max(), 1e-12))

    bump_run = parse_config({
        'grid': {'N': 129, 'T': 0.25},
        'penalization': {'gamma': 0.75, 'eps': [0.1]},
        'boundary': {'preset': 'bump'},
    }).solve_config(0.1)
    records.append(rescale_residual_check(solve(bump_run).trajectory, bump_run))

    for name, point in (('sine', 0.7), ('sine_cos', 0.7), ('exp_xy', (0.3, 0.5))):
        fit = identity_convergence_order(name, point, t=-0.3)
        records.append(_check(f'identity_order[{name}]', fit.slope >= 1.6,
                              fit.slope, 0.2))

    trials = random_comparison_trials(50, seed)
    worst = max(t.worst for t in trials)
    records.append(_check('comparison_trials', all(trials), worst, 1e-8,
                          failures=sum(not t for t in trials)))

    return records


###################
# Entry point
###################

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', default=None,
                        help='Output directory (overrides the config).')
    common.add_argument('--threads', type=int, default=1,
                        help='Worker processes for eps sweeps.')
    common.add_argument('--seed', type=int, default=0,
                        help='Seed for randomized suites.')
    common.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for debug output.')

    parser = argparse.ArgumentParser(
        prog='quenching',
        description='Penalized quenching problem: solver and estimate checks.',
    )
    verbs = parser.add_subparsers(dest='command', required=True)

    run_parser = verbs.add_parser('run', parents=[common], help='Run an experiment.')
    run_parser.add_argument('config', help='YAML experiment config.')

    sweep_parser = verbs.add_parser('sweep', parents=[common], help='Run an eps sweep.')
    sweep_parser.add_argument('config', help='YAML experiment config.')

    report_parser = verbs.add_parser('report', parents=[common],
                                     help='Summarize report.json files.')
    report_parser.add_argument('dir', help='Results directory.')

    verbs.add_parser('selfcheck', parents=[common], help='Run property suites.')

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')

    try:
        if args.command == 'run':
            summary = run(args.config, args.out, args.threads)
            for r in summary['runs']:
                print(f"{summary['name']} eps={r['eps']:g}: "
                      f"{'pass' if r['pass'] else 'FAIL'}")
            return EXIT_PASS if summary['pass'] else EXIT_FAIL

        if args.command == 'sweep':
            table, sweep_report = sweep_epsilon(args.config, args.out, args.threads)
            print(table.to_string(index=False))
            return EXIT_PASS if sweep_report['pass'] else EXIT_FAIL

        if args.command == 'report':
            table = report(args.dir)
            print(format_report(table))
            return EXIT_PASS if table['pass'].all() else EXIT_FAIL

        records = selfcheck(args.seed)
        table = summarize(records)
        print(format_report(table))
        return EXIT_PASS if table['pass'].all() else EXIT_FAIL

    except SchemeBlowUp as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, TypeError, OSError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
