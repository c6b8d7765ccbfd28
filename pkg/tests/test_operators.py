import numpy as np

import quenching as qn
from quenching.operators import (CoefficientField, bump_mass, source_derivative,
                                 sample_ellipticity_class)

import pytest


# Pucci operators
def test_pucci_diag():
    M = np.diag([1.0, -1.0])
    assert qn.pucci_minus(M, 1, 2) == pytest.approx(-1.0)
    assert qn.pucci_plus(M, 1, 2) == pytest.approx(1.0)

def test_pucci_scalar():
    assert qn.pucci_minus(3.0, 0.5, 2) == pytest.approx(1.5)
    assert qn.pucci_minus(-3.0, 0.5, 2) == pytest.approx(-6.0)

def test_pucci_duality():
    rng = np.random.default_rng(1)
    for _ in range(20):
        X = rng.normal(size=(2, 2))
        M = (X + X.T) / 2
        assert qn.pucci_plus(M, 0.5, 3) == pytest.approx(-qn.pucci_minus(-M, 0.5, 3))

def test_pucci_is_extremal():
    # tr(AM) over the ellipticity class lies between M^- and M^+
    rng = np.random.default_rng(2)
    A = sample_ellipticity_class(rng, 200, 2, 0.5, 2.0)
    M = np.array([[1.0, 2.0], [2.0, -3.0]])
    traces = np.einsum('kij,ji->k', A, M)

    assert traces.min() >= qn.pucci_minus(M, 0.5, 2.0) - 1e-12
    assert traces.max() <= qn.pucci_plus(M, 0.5, 2.0) + 1e-12

def test_nonsymmetric():
    with pytest.raises(ValueError):
        qn.pucci_minus(np.array([[1.0, 2.0], [0.0, 1.0]]), 1, 1)

def test_bad_ellipticity():
    with pytest.raises(ValueError):
        qn.make_operator('pucci_minus', 2.0, 1.0)

def test_unknown_variant():
    with pytest.raises(ValueError):
        qn.make_operator('isaacs')


# Catalog operators
def test_laplacian():
    spec = qn.make_operator('linear', d=2)
    M = np.array([[1.0, 5.0], [5.0, 2.0]])
    assert qn.evaluate_F(spec, (0.3, 0.1), 0.0, M) == pytest.approx(3.0)

def test_sine_coefficients():
    spec = qn.make_operator('linear', 0.5, 1.5, 'sine', amplitude=0.5)
    assert qn.evaluate_F(spec, 0.5, 0.0, 2.0) == pytest.approx(3.0)

def test_constant_coefficients():
    field = CoefficientField('constant', d=2, amplitude=0.25)
    A = field(np.zeros((1, 2)), 0.0)[0]
    assert A == pytest.approx(np.array([[1.0, 0.25], [0.25, 1.0]]))

def test_coefficients_outside_class():
    grid = qn.make_grid(1, -1, 1, 11, 1, 0.5)

    # 1 + 0.9 sin(pi x) leaves [0.5, 1.5]
    with pytest.raises(ValueError):
        qn.make_operator('linear', 0.5, 1.5, 'sine', amplitude=0.9, grid=grid)

def test_dimension_mismatch():
    spec = qn.make_operator('linear', d=1)
    with pytest.raises(ValueError):
        qn.evaluate_F(spec, 0.0, 0.0, np.eye(2))

@pytest.mark.parametrize('variant', ['pucci_minus', 'pucci_plus', 'linear'])
def test_structure_checks(variant):
    spec = qn.make_operator(variant, 1.0, 2.0 if variant != 'linear' else 1.0, d=2)

    assert qn.check_uniform_parabolicity(spec, 500, 0)
    assert qn.check_homogeneity(spec, 500, 0)
    assert qn.check_continuity(spec, 500, 0)

def test_continuity_with_modulus():
    spec = qn.make_operator('linear', 0.5, 1.5, 'sine', 0.5, 'linear', np.pi * 0.5,
                            domain=(-1.0, 1.0))
    assert qn.check_continuity(spec, 500, 0)

    # Without a modulus the x dependence is a violation
    spec = qn.make_operator('linear', 0.5, 1.5, 'sine', 0.5, domain=(-1.0, 1.0))
    report = qn.check_continuity(spec, 500, 0)
    assert not report
    assert report.worst < 0

def test_homogeneity_draws_zero():
    spec = qn.make_operator('pucci_minus', 1.0, 2.0)
    report = qn.check_homogeneity(spec, 10, 3)
    assert report.passed

def test_parabolicity_fails_on_planted_eigenvalue():
    # A = 2 Lam has left the class of the ellipticity constants
    ellipticity = qn.EllipticityParams(1.0, 1.0)
    field = CoefficientField('constant', d=1, matrix=[[2.0]])
    spec = qn.OperatorSpec('linear', ellipticity, field, d=1)

    report = qn.check_uniform_parabolicity(spec, 100, 0)
    assert not report
    assert report.worst < 0
    N = report.witness['N']
    # F(M + N) - F(M) = 2N against M^+-(N) = N
    assert report.worst == pytest.approx(-abs(N[0, 0]))
    assert set(report.witness) == {'x', 't', 'M', 'N'}

@pytest.mark.parametrize('check', [qn.check_uniform_parabolicity, qn.check_homogeneity,
                                   qn.check_continuity])
def test_structure_checks_need_samples(check):
    spec = qn.make_operator('pucci_minus', 1.0, 2.0)
    with pytest.raises(ValueError, match='sample_count'):
        check(spec, 0)

def test_rescaled_operator():
    spec = qn.make_operator('pucci_minus', 1.0, 2.0)
    F = qn.rescaled_operator(spec, 0.5, 0.0)

    # theta = 0: F_k(M) = k^2 F(k^-2 M) = F(M) by homogeneity
    assert F(0.0, 0.0, -1.0) == pytest.approx(qn.evaluate_F(spec, 0.0, 0.0, -1.0))


# Penalization
def test_alpha():
    params = qn.PenalizationParams(gamma=0.5, eps=0.1)
    assert params.alpha == pytest.approx(1 / 3)
    assert params.scale == pytest.approx(0.1**(4 / 3))
    assert params.tau_low == pytest.approx(0.1 * params.scale)
    assert params.tau_high == pytest.approx(1.1 * params.scale)

def test_bad_gamma():
    with pytest.raises(ValueError):
        qn.PenalizationParams(gamma=1.5)

    with pytest.raises(ValueError):
        qn.PenalizationParams(gamma=0.5, eps=0.0)

def test_bump_support():
    assert qn.bump(0.0) == 0
    assert qn.bump(1.0) == 0
    assert qn.bump(-0.5) == 0
    assert qn.bump(0.5) > 0

def test_bump_mass():
    assert bump_mass(-1.0) == 0
    assert bump_mass(1.0) == 1
    assert bump_mass(2.0) == 1
    # symmetric bump
    assert bump_mass(0.5) == pytest.approx(0.5, abs=1e-10)

def test_bump_mass_stays_in_unit_range():
    # The primitive is flat to ~1e-40 near both ends of the support
    z = np.linspace(0, 1, 200001)
    mass = bump_mass(z)
    assert mass.min() >= 0
    assert mass.max() <= 1
    assert np.diff(mass).min() >= 0

    params = qn.PenalizationParams(gamma=0.25, sigma0=0.1, eps=0.05)
    s = np.linspace(0, 2 * params.tau_high, 200001)
    assert qn.beta_eps(s, params).min() >= 0
    assert qn.source(s, params).min() >= 0

def test_beta_ramp():
    params = qn.PenalizationParams(gamma=0.5, sigma0=0.1, eps=0.1)
    assert qn.beta_eps(0.06, params) == 0.5
    assert qn.beta_eps(params.tau_low, params) == 0
    assert qn.beta_eps(0.0, params) == 0

    s = np.linspace(0, 2 * params.tau_high, 5001)
    B = qn.beta_eps(s, params)
    assert np.diff(B).min() >= -1e-12
    assert B.max() <= 0.5

def test_source_zero_below_layer():
    params = qn.PenalizationParams(gamma=0.5, eps=0.1)
    s = np.linspace(0, params.tau_low, 11)
    assert np.all(qn.source(s, params) == 0)
    assert qn.source(0.0, params) == 0

def test_source_bound():
    params = qn.PenalizationParams(gamma=0.75, sigma0=0.1, eps=0.05)
    s = np.linspace(0, 1, 100001)
    assert qn.source(s, params).max() <= qn.source_bound(params)

def test_source_above_layer():
    params = qn.PenalizationParams(gamma=0.5, eps=0.1)
    assert qn.source(0.5, params) == pytest.approx(0.5 * 0.5**-0.5)

def test_source_derivative():
    params = qn.PenalizationParams(gamma=0.5, eps=0.1)
    s = 0.5 * (params.tau_low + params.tau_high)
    h = 1e-7
    numeric = (qn.source(s + h, params) - qn.source(s - h, params)) / (2 * h)
    assert source_derivative(s, params) == pytest.approx(numeric, rel=1e-5)

def test_source_lipschitz_scaling():
    params = qn.PenalizationParams(gamma=0.5, eps=0.1)
    ratio = qn.source_lipschitz(params.with_eps(0.05)) / qn.source_lipschitz(params)
    assert ratio == pytest.approx(4.0, rel=1e-9)
