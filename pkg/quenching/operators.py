"""
Operators
---------
The catalog of fully nonlinear operators F(x, t, M) (Pucci extremal
operators and linear nondivergence operators tr(A(x,t) M)), the random
sampling checks of their structural assumptions, and the penalization
B_eps with the singular source B_eps(s) s^(gamma-1).
"""

import functools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .base import CheckReport
from .util import check_finite_positive, check_open_unit, check_symmetric
from .util._validators import VARIANTS, COEFFICIENT_PRESETS, MODULUS_PRESETS


###################
# Ellipticity
###################

@dataclass(frozen=True)
class Modulus:
    """Modulus of continuity from the preset catalog: 'zero' (w = 0) or
    'linear' (w(r) = K r).
    """
    kind: str = 'zero'
    K: float = 0.0

    def __post_init__(self):
        if self.kind not in MODULUS_PRESETS:
            raise ValueError(
                f"Modulus '{self.kind}' not recognized. Acceptable moduli "
                f"are {MODULUS_PRESETS}."
            )
        if not np.isfinite(self.K) or self.K < 0:
            raise ValueError(f'Modulus constant K must be >= 0, found {self.K}.')

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == 'zero':
            return np.zeros_like(r)
        return self.K * r


@dataclass(frozen=True)
class EllipticityParams:
    """Ellipticity constants 0 < lam <= Lam and the modulus w."""
    lam: float = 1.0
    Lam: float = 1.0
    modulus: Modulus = field(default_factory=Modulus)

    def __post_init__(self):
        check_finite_positive(self.lam, 'lam')
        check_finite_positive(self.Lam, 'Lam')
        if self.lam > self.Lam:
            raise ValueError(
                f'Need lam <= Lam, found lam={self.lam}, Lam={self.Lam}.'
            )
        r = np.linspace(0, 4, 65)
        w = self.modulus(r)
        if w[0] != 0 or np.any(np.diff(w) < 0):
            raise ValueError('Modulus must vanish at 0 and be nondecreasing.')


class CoefficientField():
    """Symmetric coefficient field A(x, t) of a linear operator.

    Parameters:
    -----------
    preset: str
        'identity' (A = I), 'sine' (A = (1 + amplitude sin(pi x_1)) I) or
        'constant' (A = `matrix`, or I + amplitude times the off-diagonal
        ones in 2D when no matrix is given).
    d: int
        Space dimension.
    amplitude: float, default 0.5
    matrix: array-like, default None
        Only for 'constant'.
    domain: tuple of float, default None
        (a, b) box the field is defined on; None for all of R^d.
    """

    def __init__(self, preset='identity', d=1, amplitude=0.5, matrix=None,
                 domain=None):
        if preset not in COEFFICIENT_PRESETS:
            raise ValueError(
                f"Coefficient preset '{preset}' not recognized. Acceptable "
                f"presets are {COEFFICIENT_PRESETS}."
            )
        self.preset = preset
        self.d = d
        self.amplitude = float(amplitude)
        self.domain = domain

        if preset == 'constant':
            if matrix is None:
                matrix = np.eye(d)
                if d == 2:
                    matrix = matrix + self.amplitude * (np.ones((2, 2)) - np.eye(2))
            matrix = check_symmetric(matrix, 'coefficient matrix')
            if matrix.shape != (d, d):
                raise ValueError(
                    f'Coefficient matrix must be {d}x{d}, found {matrix.shape}.'
                )
        self.matrix = matrix

    def __repr__(self):
        return f"CoefficientField('{self.preset}', d={self.d})"

    def _check_domain(self, x):
        if self.domain is None:
            return
        a, b = self.domain
        tol = 1e-12 * (1 + abs(a) + abs(b))
        if np.any(x < a - tol) or np.any(x > b + tol):
            raise ValueError(
                f'Coefficient field evaluated outside its domain [{a}, {b}]^{self.d}.'
            )

    def scale(self, x, t):
        """Scalar factor s(x, t) for the presets of the form s(x, t) I."""
        x = np.asarray(x, dtype=float)
        if self.preset == 'sine':
            return 1 + self.amplitude * np.sin(np.pi * x[..., 0])
        return np.ones(x.shape[:-1])

    def __call__(self, x, t):
        """Matrices A(x, t) for points `x` of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        self._check_domain(x)
        if self.preset == 'constant':
            return np.broadcast_to(self.matrix, x.shape[:-1] + (self.d, self.d))
        return self.scale(x, t)[..., None, None] * np.eye(self.d)


@dataclass(frozen=True)
class OperatorSpec:
    """A catalog operator F(x, t, M).

    Parameters:
    -----------
    variant: str
        One of 'pucci_minus', 'pucci_plus', 'linear'.
    ellipticity: EllipticityParams
    coefficients: CoefficientField, default None
        Used by 'linear' only; defaults to the identity (Laplacian).
    d: int, default 1
    """
    variant: str
    ellipticity: EllipticityParams = field(default_factory=EllipticityParams)
    coefficients: CoefficientField = None
    d: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"Operator variant '{self.variant}' not recognized. "
                f"Acceptable variants are {VARIANTS}."
            )
        if self.d not in (1, 2):
            raise ValueError(f'Only d = 1 or d = 2 is supported, found d={self.d}.')
        if self.variant == 'linear':
            if self.coefficients is None:
                object.__setattr__(self, 'coefficients',
                                   CoefficientField('identity', self.d))
            elif self.coefficients.d != self.d:
                raise ValueError('Coefficient field dimension does not match d.')

    @property
    def lam(self):
        return self.ellipticity.lam

    @property
    def Lam(self):
        return self.ellipticity.Lam

    def apply(self, points, t, H):
        return apply_F(self, points, t, H)

    def __call__(self, x, t, M):
        return evaluate_F(self, x, t, M)

    def check_coefficients(self, grid):
        """Checks symmetric coefficients with spectrum in [lam, Lam] at every
        node of `grid` and every stored time.
        """
        if self.variant != 'linear':
            return
        mesh = grid.mesh()
        tol = 1e-12 * (1 + self.Lam)
        for t in (grid.stored_times[0], grid.stored_times[-1]):
            A = self.coefficients(mesh, t)
            if np.abs(A - np.swapaxes(A, -1, -2)).max() > tol:
                raise ValueError('Coefficient field is not symmetric.')
            eigs = _eigenvalues(A)
            bad = (eigs.min(axis=-1) < self.lam - tol) | (eigs.max(axis=-1) > self.Lam + tol)
            if np.any(bad):
                node = tuple(int(i) for i in np.argwhere(bad)[0])
                raise ValueError(
                    f'Coefficient eigenvalues leave [lam, Lam] = [{self.lam}, '
                    f'{self.Lam}] at node {node}, t={t}.'
                )


def make_operator(variant, lam=1.0, Lam=1.0, coefficients='identity',
                  amplitude=0.5, modulus='zero', modulus_K=0.0, d=1,
                  domain=None, grid=None):
    """Builds an OperatorSpec from preset names (the config's operator
    block). If a grid is given, the coefficient field is checked at its
    nodes.
    """
    ellipticity = EllipticityParams(lam, Lam, Modulus(modulus, modulus_K))
    field_ = None
    if variant == 'linear':
        field_ = CoefficientField(coefficients, d, amplitude=amplitude, domain=domain)
    spec = OperatorSpec(variant, ellipticity, field_, d)
    if grid is not None:
        spec.check_coefficients(grid)

    return spec


###################
# Pucci operators
###################

def _eigenvalues(M):
    """Closed-form eigenvalues (ascending) of a stack of symmetric 1x1 or
    2x2 matrices, shape (..., d).
    """
    if M.shape[-1] == 1:
        return M[..., 0, :]
    a = M[..., 0, 0]
    b = M[..., 0, 1]
    c = M[..., 1, 1]
    mean = (a + c) / 2
    radius = np.hypot((a - c) / 2, b)
    return np.stack([mean - radius, mean + radius], axis=-1)


def _pucci(H, lam, Lam, sign):
    e = _eigenvalues(H)
    pos = np.where(e > 0, e, 0).sum(axis=-1)
    neg = np.where(e < 0, e, 0).sum(axis=-1)
    if sign == 'minus':
        return lam * pos + Lam * neg
    return Lam * pos + lam * neg


def pucci_minus(M, lam, Lam):
    """Minimal Pucci operator, inf of tr(AM) over lam I <= A <= Lam I.

    Parameters:
    -----------
    M: array-like
        Symmetric 1x1 or 2x2 matrix (a scalar is taken as 1x1).
    lam, Lam: float
        Ellipticity constants.

    Returns:
    --------
    value: float
        lam * (sum of positive eigenvalues) + Lam * (sum of negative ones).

    Examples:
    ---------
    >>> qn.pucci_minus(np.diag([1.0, -1.0]), 1, 2)
    -1.0
    """
    M = check_symmetric(M)
    return float(_pucci(M, lam, Lam, 'minus'))


def pucci_plus(M, lam, Lam):
    """Maximal Pucci operator, sup of tr(AM) over lam I <= A <= Lam I;
    equals -pucci_minus(-M).
    """
    M = check_symmetric(M)
    return float(_pucci(M, lam, Lam, 'plus'))


def apply_F(spec, points, t, H):
    """Vectorized F over a stack of nodes and Hessians.

    Parameters:
    -----------
    spec: OperatorSpec
    points: np.ndarray, shape (..., d)
        Node coordinates.
    t: float
    H: np.ndarray, shape (..., d, d)
        Symmetric Hessians.

    Returns:
    --------
    values: np.ndarray, shape (...)
    """
    if spec.variant == 'pucci_minus':
        return _pucci(H, spec.lam, spec.Lam, 'minus')
    if spec.variant == 'pucci_plus':
        return _pucci(H, spec.lam, spec.Lam, 'plus')

    coefficients = spec.coefficients
    trace = np.trace(H, axis1=-2, axis2=-1)
    if coefficients.preset == 'identity':
        coefficients._check_domain(np.asarray(points))
        return trace
    if coefficients.preset == 'sine':
        coefficients._check_domain(np.asarray(points))
        return coefficients.scale(points, t) * trace
    A = coefficients(points, t)
    return np.einsum('...ij,...ji->...', A, H)


def evaluate_F(spec, x, t, M):
    """F(x, t, M) for one point and one symmetric matrix.

    Pucci variants ignore (x, t); the linear variant returns
    tr(A(x, t) M).
    """
    M = check_symmetric(M)
    if M.shape[0] != spec.d:
        raise ValueError(
            f'Matrix is {M.shape[0]}x{M.shape[0]} but the operator acts in d={spec.d}.'
        )
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(apply_F(spec, x, t, M))


class RescaledOperator():
    """F_k(x, t, M) = k^(2-theta) F(k x, k^2 t, k^(theta-2) M), the operator
    solved by v(k x, k^2 t)/k^theta. Same ellipticity as F.
    """

    def __init__(self, spec, kappa, theta):
        check_finite_positive(kappa, 'kappa')
        if theta < 0:
            raise ValueError(f'Need theta >= 0, found {theta}.')
        self.spec = spec
        self.kappa = kappa
        self.theta = theta
        self.d = spec.d
        self.ellipticity = spec.ellipticity

    def apply(self, points, t, H):
        k, theta = self.kappa, self.theta
        return k**(2 - theta) * apply_F(
            self.spec, k * np.asarray(points), k**2 * t, k**(theta - 2) * H
        )

    def __call__(self, x, t, M):
        M = check_symmetric(M)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.apply(x, t, M))


def rescaled_operator(spec, kappa, theta):
    return RescaledOperator(spec, kappa, theta)


###################
# Structural checks
###################

def _random_symmetric(rng, n, d, scale=1.0):
    X = rng.normal(scale=scale, size=(n, d, d))
    return (X + np.swapaxes(X, -1, -2)) / 2


def _sample_points(rng, spec, n):
    coefficients = spec.coefficients
    if coefficients is not None and coefficients.domain is not None:
        a, b = coefficients.domain
    else:
        a, b = -1.0, 1.0
    x = rng.uniform(a, b, size=(n, spec.d))
    t = rng.uniform(-1.0, 0.0, size=n)
    return x, t


def _apply_pointwise(F, x, t, H):
    # Linear coefficients depend on t; evaluate each sample at its own time
    return np.array([F.apply(x[k], t[k], H[k]) for k in range(len(t))])


def sample_ellipticity_class(rng, n, d, lam, Lam):
    """Random matrices lam I + (Lam - lam) Q D Q^T, D diagonal in [0, 1]."""
    D = rng.uniform(0, 1, size=(n, d))
    if d == 1:
        Q = np.ones((n, 1, 1))
    else:
        angle = rng.uniform(0, np.pi, size=n)
        c, s = np.cos(angle), np.sin(angle)
        Q = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    QD = Q * D[:, None, :]
    return lam * np.eye(d) + (Lam - lam) * QD @ np.swapaxes(Q, -1, -2)


def _check_sample_count(sample_count):
    if sample_count < 1:
        raise ValueError(f'sample_count must be >= 1, found {sample_count}.')


def check_uniform_parabolicity(spec, sample_count=1000, rng_seed=0):
    """Samples (UP): M^-(N) <= F(x,t,M+N) - F(x,t,M) <= M^+(N).

    Parameters:
    -----------
    spec: OperatorSpec
    sample_count: int, default 1000
        Number of random (x, t, M, N) draws.
    rng_seed: int, default 0

    Returns:
    --------
    report: CheckReport
        `worst` is the smallest margin to either side of the sandwich
        (negative on violation), the witness holds its (x, t, M, N).
    """
    _check_sample_count(sample_count)
    rng = np.random.default_rng(rng_seed)
    x, t = _sample_points(rng, spec, sample_count)
    M = _random_symmetric(rng, sample_count, spec.d)
    N = _random_symmetric(rng, sample_count, spec.d)

    diff = _apply_pointwise(spec, x, t, M + N) - _apply_pointwise(spec, x, t, M)
    lower = _pucci(N, spec.lam, spec.Lam, 'minus')
    upper = _pucci(N, spec.lam, spec.Lam, 'plus')
    margin = np.minimum(diff - lower, upper - diff)

    scale = 1 + np.abs(M).max(axis=(-2, -1)) + np.abs(N).max(axis=(-2, -1))
    tol = 1e-10
    k = int(np.argmin(margin / scale))
    return CheckReport(
        name='uniform_parabolicity',
        passed=bool(np.all(margin >= -tol * scale)),
        worst=float(margin[k]),
        tolerance=tol,
        witness={'x': x[k], 't': t[k], 'M': M[k], 'N': N[k]},
    )


def check_homogeneity(spec, sample_count=1000, rng_seed=0):
    """Samples F(x,t,tau M) = tau F(x,t,M) for tau >= 0; tau = 0 is always
    among the draws.
    """
    _check_sample_count(sample_count)
    rng = np.random.default_rng(rng_seed)
    x, t = _sample_points(rng, spec, sample_count)
    M = _random_symmetric(rng, sample_count, spec.d)
    tau = rng.uniform(0, 3, size=sample_count)
    tau[0] = 0.0

    lhs = _apply_pointwise(spec, x, t, tau[:, None, None] * M)
    rhs = tau * _apply_pointwise(spec, x, t, M)
    error = np.abs(lhs - rhs)
    bound = 1e-10 * (1 + tau * np.abs(M).max(axis=(-2, -1)))

    k = int(np.argmax(error / bound))
    return CheckReport(
        name='homogeneity',
        passed=bool(np.all(error <= bound)),
        worst=float(error.max()),
        tolerance=1e-10,
        witness={'x': x[k], 't': t[k], 'M': M[k], 'tau': tau[k]},
    )


def check_continuity(spec, sample_count=1000, rng_seed=0):
    """Samples |F(x,t,M) - F(y,t,M)| <= w(|x - y|) ||M|| with the spectral
    norm and the operator's modulus w.
    """
    _check_sample_count(sample_count)
    rng = np.random.default_rng(rng_seed)
    x, t = _sample_points(rng, spec, sample_count)
    y, _ = _sample_points(rng, spec, sample_count)
    M = _random_symmetric(rng, sample_count, spec.d)

    lhs = np.abs(_apply_pointwise(spec, x, t, M) - _apply_pointwise(spec, y, t, M))
    norm = np.abs(_eigenvalues(M)).max(axis=-1)
    rhs = spec.ellipticity.modulus(np.linalg.norm(x - y, axis=-1)) * norm + 1e-10
    margin = rhs - lhs

    k = int(np.argmin(margin))
    return CheckReport(
        name='continuity',
        passed=bool(np.all(margin >= 0)),
        worst=float(margin[k]),
        tolerance=1e-10,
        witness={'x': x[k], 'y': y[k], 't': t[k], 'M': M[k]},
    )


###################
# Penalization
###################

def alpha_of_gamma(gamma):
    """alpha = gamma/(2 - gamma), the growth exponent minus one."""
    check_open_unit(gamma, 'gamma')
    return gamma / (2 - gamma)


BUMPS = ('standard',)


def _standard_bump(theta):
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta)
    inside = (theta > 0) & (theta < 1)
    th = theta[inside]
    out[inside] = np.exp(-1 / (th * (1 - th)))
    return out


@functools.lru_cache(maxsize=None)
def _bump_normalization(name):
    Z, _ = quad(lambda th: float(_standard_bump(th)), 0, 1,
                epsabs=1e-15, epsrel=1e-14, limit=200)
    return Z


@functools.lru_cache(maxsize=None)
def _bump_primitive(name, cells=2048):
    """Monotone (PCHIP) interpolant of int_0^z rho on [0, 1], built from a
    Gauss-Legendre rule per cell and normalized to end at exactly 1.
    """
    z = np.linspace(0, 1, cells + 1)
    nodes, weights = np.polynomial.legendre.leggauss(10)
    mid = (z[:-1] + z[1:]) / 2
    half = (z[1] - z[0]) / 2
    samples = mid[:, None] + half * nodes[None, :]
    cell_mass = half * (_standard_bump(samples) * weights).sum(axis=1)

    primitive = np.concatenate([[0.0], np.cumsum(cell_mass)])
    total = primitive[-1]
    return PchipInterpolator(z, primitive / total)


@dataclass(frozen=True)
class PenalizationParams:
    """Penalization parameters.

    Parameters:
    -----------
    gamma: float
        Absorption exponent in (0, 1).
    sigma0: float, default 0.1
        Layer offset in (0, 1).
    eps: float, default 0.1
        Penalization scale.
    bump: str, default 'standard'
        The unit-mass bump on [0, 1]; only the standard
        exp(-1/(theta(1 - theta))) bump is in the catalog.
    """
    gamma: float
    sigma0: float = 0.1
    eps: float = 0.1
    bump: str = 'standard'

    def __post_init__(self):
        check_open_unit(self.gamma, 'gamma')
        check_open_unit(self.sigma0, 'sigma0')
        check_finite_positive(self.eps, 'eps')
        if self.bump not in BUMPS:
            raise ValueError(
                f"Bump '{self.bump}' not recognized. Acceptable bumps are {BUMPS}."
            )

    @property
    def alpha(self):
        return alpha_of_gamma(self.gamma)

    @property
    def scale(self):
        """eps^(1 + alpha), the width of the penalization layer."""
        return self.eps ** (1 + self.alpha)

    @property
    def tau_low(self):
        return self.sigma0 * self.scale

    @property
    def tau_high(self):
        return (1 + self.sigma0) * self.scale

    def with_eps(self, eps):
        return replace(self, eps=eps)


def bump(theta, params=None):
    """The normalized bump rho(theta), zero outside (0, 1)."""
    name = 'standard' if params is None else params.bump
    value = _standard_bump(theta) / _bump_normalization(name)
    return value if np.ndim(theta) else float(value)


def bump_mass(upper, params=None):
    """int_0^upper rho, clamped to 0 below 0 and to 1 above 1."""
    name = 'standard' if params is None else params.bump
    z = np.asarray(upper, dtype=float)
    out = np.clip(_bump_primitive(name)(np.clip(z, 0, 1)), 0, 1)
    out = np.where(z <= 0, 0.0, np.where(z >= 1, 1.0, out))
    return out if np.ndim(upper) else float(out)


def beta_eps(s, params):
    """B_eps(s) = gamma * int_0^((s - tau_low)/eps^(1+alpha)) rho, a smooth
    nondecreasing ramp from 0 (s <= tau_low) to gamma (s >= tau_high).

    Examples:
    ---------
    >>> params = qn.PenalizationParams(gamma=0.5, sigma0=0.1, eps=0.1)
    >>> qn.beta_eps(0.06, params)
    0.5
    """
    z = (np.asarray(s, dtype=float) - params.tau_low) / params.scale
    out = params.gamma * bump_mass(z, params)
    return out if np.ndim(s) else float(out)


def source(s, params):
    """B_eps(s) s^(gamma - 1), identically 0 for s <= tau_low so the
    singular power is only taken above the layer's lower edge.
    """
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros_like(s_arr)
    active = s_arr > params.tau_low
    if np.any(active):
        s_act = s_arr[active]
        out[active] = beta_eps(s_act, params) * np.power(s_act, params.gamma - 1)
    return out if np.ndim(s) else float(out)


def source_derivative(s, params):
    """d/ds of `source`, 0 for s <= tau_low."""
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros_like(s_arr)
    active = s_arr > params.tau_low
    g = params.gamma
    s_act = s_arr[active]
    z = (s_act - params.tau_low) / params.scale
    out[active] = (
        g * bump(z, params) / params.scale * np.power(s_act, g - 1)
        + beta_eps(s_act, params) * (g - 1) * np.power(s_act, g - 2)
    )
    return out if np.ndim(s) else float(out)


def source_bound(params):
    """gamma sigma0^(gamma-1) eps^((1+alpha)(gamma-1)), the sup of `source`."""
    g = params.gamma
    return g * params.sigma0**(g - 1) * params.eps**((1 + params.alpha) * (g - 1))


def source_lipschitz(params, samples=4001):
    """Dense-sampling estimate of sup_s |d/ds source(s)|.

    The derivative is self-similar in w = s/eps^(1+alpha): it equals
    eps^(1+alpha)(gamma-2) g(w) = eps^-2 g(w), since
    (1 + alpha)(2 - gamma) = 2. Sampling is done in w over the layer
    [sigma0, 1 + sigma0]; above the layer |source'| decreases, so its sup
    there is attained at the layer's upper edge, which is sampled.
    """
    w = np.linspace(params.sigma0, 1 + params.sigma0, samples)[1:]
    unit = replace(params, eps=1.0)
    g = np.abs(source_derivative(w, unit))
    return float(g.max() * params.scale**(params.gamma - 2))
