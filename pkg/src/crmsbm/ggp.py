"""Special functions for the generalized gamma weight measure.

The measure on weights w > 0 is

    rho(dw) = w^(-1-sigma) * exp(-tau * w) / Gamma(1-sigma) dw,

carried by a window of total location mass alpha, with alpha > 0,
sigma in (0, 1), tau >= 0. This module provides the Levy density, the Laplace
exponent, the angular-integral representation of the positive stable density,
the total-mass density (a scaled, exponentially tilted stable law), inverse-CDF
sampling of the total mass from a cached quadrature table, and the small
log-gamma conveniences used by the collapsed likelihood.
"""

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericError


@dataclass(frozen=True)
class GgpParams:
    """Parameters of the weight process.

    Attributes
    ----------
    alpha : float
        Total location window mass, > 0.
    sigma : float
        Stability/discount index, in the open interval (0, 1).
    tau : float
        Exponential tilt, >= 0. tau == 0 gives the pure stable regime.
    """

    alpha: float
    sigma: float
    tau: float

    def __post_init__(self):
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be nonnegative and finite, got {self.tau}")

    @property
    def theta(self) -> float:
        return self.alpha / self.sigma

    def mean_total_mass(self) -> float:
        """E[T] = alpha * tau^(sigma-1); infinite when tau == 0."""
        if self.tau == 0.0:
            return math.inf
        return self.alpha * self.tau ** (self.sigma - 1.0)


# ---------------------------------------------------------------------------
# pointwise measure functions
# ---------------------------------------------------------------------------

def levy_log_density(params: GgpParams, w):
    """log rho(w) per unit location mass (the alpha factor is not included)."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("weights must be positive")
    out = (-(1.0 + params.sigma) * np.log(w) - params.tau * w
           - math.lgamma(1.0 - params.sigma))
    return out if out.ndim else float(out)


def levy_density(params: GgpParams, w):
    out = np.exp(levy_log_density(params, np.asarray(w, dtype=float)))
    return out if out.ndim else float(out)


def laplace_exponent(params: GgpParams, u):
    """psi(u) = (alpha/sigma) * ((u + tau)^sigma - tau^sigma) for u >= 0."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise ValueError("the Laplace exponent is evaluated at u >= 0")
    out = params.theta * ((u + params.tau) ** params.sigma
                          - params.tau ** params.sigma)
    return out if out.ndim else float(out)


def zolotarev_a(sigma, u):
    """Angular kernel A(sigma, u) of the stable-density integral, u in (0, pi).

    Increasing in u, with limit (1-sigma) * sigma^(sigma/(1-sigma)) at u -> 0
    and divergence at u -> pi.
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0, 1)")
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= math.pi):
        raise ValueError("u must lie strictly inside (0, pi)")
    c = 1.0 - sigma
    out = np.exp((c * np.log(np.sin(c * u)) + sigma * np.log(np.sin(sigma * u))
                  - np.log(np.sin(u))) / c)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# stable density by adaptive panel quadrature of the angular integral
# ---------------------------------------------------------------------------

_GL_CACHE: dict = {}
_QUAD_TOL = 1e-13
_MAX_PANELS = 40000


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _angular_values(sigma, y, u):
    # A * exp(-A y) evaluated stably on interior nodes
    c = 1.0 - sigma
    la = (c * np.log(np.sin(c * u)) + sigma * np.log(np.sin(sigma * u))
          - np.log(np.sin(u))) / c
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(la - np.exp(la) * y)


def _angular_panel(sigma, y, a, b, nodes, weights):
    half = 0.5 * (b - a)
    u = 0.5 * (a + b) + half * nodes
    return half * float(np.dot(weights, _angular_values(sigma, y, u)))


def _angular_integral(sigma, y, tol=_QUAD_TOL):
    """integral over (0, pi) of A(sigma,u) exp(-A(sigma,u) y) du, y > 0."""
    n16, w16 = _gl(16)
    n32, w32 = _gl(32)
    total = 0.0
    stack = [(0.0, math.pi)]
    panels = 0
    while stack:
        a, b = stack.pop()
        panels += 1
        if panels > _MAX_PANELS:
            raise NumericError("angular quadrature did not converge")
        coarse = _angular_panel(sigma, y, a, b, n16, w16)
        m = 0.5 * (a + b)
        fine = (_angular_panel(sigma, y, a, m, n32, w32)
                + _angular_panel(sigma, y, m, b, n32, w32))
        # the relative floor tracks the integrand's own float noise, which
        # grows like eps/(pi - u) from cancellation in sin(u) near pi; a
        # fixed floor would demand sub-roundoff accuracy on tall narrow
        # spikes (y -> 0) and never converge
        rel_floor = 1e-13
        if b < math.pi and (b - a) <= (math.pi - b):
            rel_floor += 1e-14 / (math.pi - b)
        if (abs(fine - coarse) <= tol * (b - a) / math.pi + rel_floor * abs(fine)
                or (b - a) < 1e-13):
            total += fine
        else:
            stack.append((a, m))
            stack.append((m, b))
    return total


def _stable_logpdf_from_log(sigma, lx, tol=_QUAD_TOL):
    r = sigma / (1.0 - sigma)
    ly = -r * lx
    if ly > 700.0:
        return -math.inf  # essential zero at the origin
    if ly < -27.6:
        # far tail: f(x) -> sigma x^(-1-sigma) / Gamma(1-sigma), relative
        # error O(x^-sigma) <= 1e-6 here; the angular spike is then too
        # narrow to resolve in floats
        return (math.log(sigma) - math.lgamma(1.0 - sigma)
                - (1.0 + sigma) * lx)
    integral = _angular_integral(sigma, math.exp(ly), tol)
    if integral <= 0.0:
        return -math.inf
    return (math.log(sigma) - math.log(1.0 - sigma) - math.log(math.pi)
            - lx / (1.0 - sigma) + math.log(integral))


def stable_density(sigma, x):
    """Density of the unit positive stable law with index sigma in (0, 1).

    Computed from the angular-integral representation: for x > 0,

        f(x) = sigma/(pi (1-sigma)) x^(-1/(1-sigma))
               * integral_0^pi A(sigma,u) exp(-A(sigma,u) x^(-sigma/(1-sigma))) du.

    Laplace transform exp(-u^sigma); closed form at sigma = 1/2:
    f(x) = x^(-3/2) exp(-1/(4x)) / (2 sqrt(pi)).
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0, 1)")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    if np.any(xs < 0.0):
        raise ValueError("x must be nonnegative")
    out = np.zeros_like(xs)
    for i, xi in enumerate(xs):
        if xi > 0.0:
            lp = _stable_logpdf_from_log(sigma, math.log(xi))
            out[i] = 0.0 if lp == -math.inf else math.exp(lp)
    return float(out[0]) if scalar else out


def total_mass_log_density(params: GgpParams, t):
    """log density of the total mass T: scaled stable with exponential tilt.

    With theta = alpha/sigma, c = theta^(-1/sigma), lam = tau * theta^(1/sigma):
    g(t) = c * f_sigma(t c) * exp(lam^sigma - lam * t * c), and lam^sigma =
    tau^sigma * theta, lam * t * c = tau * t.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    ts = np.atleast_1d(t)
    lc = -math.log(params.theta) / params.sigma
    tilt0 = params.theta * params.tau ** params.sigma
    out = np.full_like(ts, -math.inf)
    for i, ti in enumerate(ts):
        if ti > 0.0:
            out[i] = (lc + _stable_logpdf_from_log(params.sigma, math.log(ti) + lc)
                      + tilt0 - params.tau * ti)
    return float(out[0]) if scalar else out


def total_mass_density(params: GgpParams, t):
    out = np.exp(total_mass_log_density(params, np.asarray(t, dtype=float)))
    return out if np.ndim(out) else float(out)


def total_mass_log_density_at(params: GgpParams, t, u):
    """log g(t, u) with the angular auxiliary u in (0, pi) kept explicit.

    Integrates over u to total_mass_log_density; this is the form the sampler
    carries per block so that no quadrature happens inside MCMC steps.
    """
    return _kernels.log_total_mass_ext(params.alpha, params.sigma, params.tau,
                                       float(t), float(u))


# ---------------------------------------------------------------------------
# total-mass sampling via a cached inverse-CDF quadrature table
# ---------------------------------------------------------------------------

_TABLE_CACHE: dict = {}
_TABLE_LOCK = threading.Lock()
_TABLE_SIZE = 2048


def _build_cdf_table(params: GgpParams, n_grid=_TABLE_SIZE):
    if params.tau > 0.0:
        scale = params.mean_total_mass()
        decades_hi = 6.0
    else:
        scale = params.theta ** (1.0 / params.sigma)
        decades_hi = max(9.0 / params.sigma, 12.0)
    grid = np.geomspace(scale * 1e-9, scale * 10.0 ** decades_hi, n_grid)
    dens = np.exp(total_mass_log_density(params, grid))
    steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)
    cdf = np.concatenate(([0.0], np.cumsum(steps)))
    total = cdf[-1]
    if not (0.98 < total < 1.02):
        raise NumericError(
            f"total-mass quadrature table sums to {total:.6f}; grid inadequate")
    cdf /= total
    keep = np.concatenate(([True], np.diff(cdf) > 0.0))
    return grid[keep], cdf[keep]


def _cdf_table(params: GgpParams):
    key = (params.alpha, params.sigma, params.tau)
    table = _TABLE_CACHE.get(key)
    if table is None:
        with _TABLE_LOCK:
            table = _TABLE_CACHE.get(key)
            if table is None:
                table = _build_cdf_table(params)
                _TABLE_CACHE[key] = table
    return table


def sample_total_mass(params: GgpParams, size, rng):
    """Draw total masses by inverting the tabulated CDF. Deterministic given rng."""
    grid, cdf = _cdf_table(params)
    u = rng.random(size)
    return np.interp(u, cdf, grid)


def total_mass_cdf(params: GgpParams, t):
    """CDF of the total mass from the cached quadrature table."""
    grid, cdf = _cdf_table(params)
    return np.interp(np.asarray(t, dtype=float), grid, cdf)


# ---------------------------------------------------------------------------
# truncation bookkeeping for the atom sampler
# ---------------------------------------------------------------------------

def expected_atom_count(params: GgpParams, eps):
    """alpha * integral_eps^inf rho(dw): mean number of atoms above eps.

    Integrated in log-weight coordinates so steep thresholds stay smooth.
    """
    if eps <= 0.0:
        raise ValueError("truncation threshold must be positive")
    from scipy import integrate

    s, tau = params.sigma, params.tau
    val, _ = integrate.quad(
        lambda x: math.exp(-s * x - tau * math.exp(min(x, 700.0))),
        math.log(eps), math.inf, limit=400)
    return params.alpha * val / math.gamma(1.0 - s)


def expected_mass_below(params: GgpParams, eps):
    """alpha * integral_0^eps w rho(dw): mean total weight lost to truncation."""
    if eps <= 0.0:
        raise ValueError("truncation threshold must be positive")
    from scipy import integrate

    s, tau = params.sigma, params.tau
    val, _ = integrate.quad(
        lambda x: math.exp((1.0 - s) * x - tau * math.exp(x)),
        -math.inf, math.log(eps), limit=400)
    return params.alpha * val / math.gamma(1.0 - s)


def neglected_tail_mass(params: GgpParams, eps):
    """alpha * integral_0^eps (1 - e^(-w)) rho(dw): edge-generating mass
    dropped by truncating at eps."""
    if eps <= 0.0:
        raise ValueError("truncation threshold must be positive")
    from scipy import integrate

    s, tau = params.sigma, params.tau

    def integrand(x):
        w = math.exp(x)
        if w < 1e-8:
            # (1 - e^-w)/w ~ 1 - w/2, avoiding exp overflow at x -> -inf
            return (1.0 - 0.5 * w) * math.exp((1.0 - s) * x - tau * w)
        return (-math.expm1(-w)) * math.exp(-s * x - tau * w)

    val, _ = integrate.quad(integrand, -math.inf, math.log(eps), limit=400)
    return params.alpha * val / math.gamma(1.0 - s)


# ---------------------------------------------------------------------------
# log-gamma conveniences for the collapsed likelihood
# ---------------------------------------------------------------------------

def pochhammer_log(a, n):
    """log of the rising factorial (a)_n = a (a+1) ... (a+n-1); n = 0 gives 0."""
    if n < 0 or n != int(n):
        raise ValueError("n must be a nonnegative integer")
    if a <= 0.0:
        raise ValueError("a must be positive")
    return math.lgamma(a + n) - math.lgamma(a)


def gamma_norm_log(a, b):
    """log G(a, b) = lgamma(a) - a log b, the Gamma-integral normalizer."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    return math.lgamma(a) - a * math.log(b)
