"""Forward-simulation validation harness.

Two independent checks of the generator against analytic quantities: exact
small-network signature probabilities (networks binned by their sorted
edge-endpoint count vector) and the distribution of the total measure mass.
Both operate at K=1 with the interaction fixed to 1, where the collapsed
likelihood can be marginalized numerically.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import NumericError
from .generate import atom_truncation_scale, sample_atoms, sample_network
from .ggp import (
    GgpParams,
    expected_mass_below,
    total_mass_cdf,
    total_mass_density,
)

# exp(-(s+t)^2) is below 1e-33 once s+t exceeds 8.8, so the quadrature
# domain is parameter independent: heavier total masses land in the
# discard bucket instead
_T_HI = 8.8

_QUAD_KW = dict(epsabs=1e-13, epsrel=1e-9, limit=300)


def signature_of(net):
    """Sorted (descending) endpoint-count vector of a generated network."""
    k = net.vertex_weights.shape[0]
    if k == 0:
        return ()
    n_i = np.bincount(net.src, minlength=k) + np.bincount(net.dst, minlength=k)
    return tuple(int(v) for v in np.sort(n_i)[::-1])


def _partitions(n, cap=None):
    """Integer partitions of n in descending form, largest part first."""
    if n == 0:
        yield ()
        return
    cap = n if cap is None else min(cap, n)
    for first in range(cap, 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def enumerate_signatures(max_edges):
    """All endpoint-count signatures with up to max_edges edges: the integer
    partitions of 2L for L = 0..max_edges. max_edges=4 gives 41."""
    if max_edges < 0:
        raise ValueError("max_edges must be >= 0")
    out = []
    for L in range(max_edges + 1):
        out.extend(_partitions(2 * L))
    return out


def multiplicity_factor(signature):
    """Number of set partitions of n = sum(signature) labelled endpoints
    whose part sizes equal the signature: n! / prod_j (j!)^{m_j} m_j!."""
    n = sum(signature)
    denom = 1
    mult = {}
    for part in signature:
        if part < 1:
            raise ValueError("signature parts must be positive")
        mult[part] = mult.get(part, 0) + 1
    for j, m_j in mult.items():
        denom *= math.factorial(j) ** m_j * math.factorial(m_j)
    return math.factorial(n) // denom


def _g_spline(params, n_knots):
    grid = np.linspace(1e-8, _T_HI, n_knots)
    vals = total_mass_density(params, grid)
    return CubicSpline(grid, vals)


def _edge_count_norms(gs, max_edges):
    """P(network has exactly L edges) for L = 0..max_edges:
    E[e^{-T^2} T^{2L} / L!] under the total-mass density."""
    out = []
    for L in range(max_edges + 1):
        lfac = math.lgamma(L + 1.0)

        def f(T, L=L, lfac=lfac):
            if T <= 0.0:
                return 0.0
            return float(gs(T)) * math.exp(-T * T + 2 * L * math.log(T) - lfac)

        out.append(quad(f, 0.0, _T_HI, **_QUAD_KW)[0])
    return out


def _selected_mass_integral(a, tau, gs):
    """I(a) = int int s^{a-1} e^{-tau s} g(t) e^{-(s+t)^2} ds dt."""

    def inner(t):
        gv = float(gs(t))
        if gv <= 0.0:
            return 0.0
        if a >= 1.0:
            f = lambda s: s ** (a - 1.0) * math.exp(-tau * s - (s + t) ** 2)
            v = quad(f, 0.0, _T_HI, **_QUAD_KW)[0]
        else:
            # substitute y = s^a to absorb the integrable endpoint singularity
            inv = 1.0 / a
            f = lambda y: math.exp(-tau * y ** inv - (y ** inv + t) ** 2)
            v = quad(f, 0.0, _T_HI ** a, **_QUAD_KW)[0] * inv
        return gv * v

    return quad(inner, 0.0, _T_HI, epsabs=1e-12, epsrel=1e-8, limit=300)[0]


def analytic_signature_probs(params: GgpParams, max_edges=4, g_knots=1800):
    """Exact probability of each signature with L <= max_edges, plus the
    probability of drawing more than max_edges edges.

    Per signature: (#compatible endpoint partitions) / L! times
    alpha^k prod_i (1-sigma)_{n_i - 1} / Gamma(n - k sigma) times the
    (s, t) integral of the selected and unselected mass factors.
    """
    sigs = enumerate_signatures(max_edges)
    gs = _g_spline(params, g_knots)
    norms = _edge_count_norms(gs, max_edges)
    probs = np.empty(len(sigs))
    lg1ms = math.lgamma(1.0 - params.sigma)
    for idx, sig in enumerate(sigs):
        if not sig:
            probs[idx] = norms[0]
            continue
        k = len(sig)
        n = sum(sig)
        L = n // 2
        a = n - k * params.sigma
        lw = (k * math.log(params.alpha)
              - math.lgamma(a)
              + math.log(multiplicity_factor(sig))
              - math.lgamma(L + 1.0))
        for n_i in sig:
            lw += math.lgamma(n_i - params.sigma) - lg1ms
        probs[idx] = math.exp(lw) * _selected_mass_integral(
            a, params.tau, gs)

    discard = 1.0 - sum(norms)
    # internal consistency: the 2-D integrals must reproduce the per-L totals
    for L in range(max_edges + 1):
        group = sum(p for sig, p in zip(sigs, probs) if sum(sig) == 2 * L)
        if abs(group - norms[L]) > 1e-5:
            raise NumericError(
                f"signature quadrature inconsistent at L={L}: "
                f"{group:.8f} vs {norms[L]:.8f}")
    return sigs, probs, discard


@dataclass
class SignatureReport:
    """Analytic vs empirical signature table from one validation run."""

    signatures: list
    analytic: np.ndarray
    empirical: np.ndarray
    z_scores: np.ndarray
    discard_analytic: float
    discard_empirical: float
    n_networks: int
    max_edges: int = 4

    @property
    def tv_distance(self) -> float:
        return 0.5 * (float(np.abs(self.analytic - self.empirical).sum())
                      + abs(self.discard_analytic - self.discard_empirical))

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    def passed(self, z_limit=4.0, tv_limit=0.02) -> bool:
        return self.max_abs_z < z_limit and self.tv_distance < tv_limit

    def rows(self):
        for sig, p, f, z in zip(self.signatures, self.analytic,
                                self.empirical, self.z_scores):
            name = "-".join(str(v) for v in sig) if sig else "empty"
            yield name, p, f, z
        yield "discarded", self.discard_analytic, self.discard_empirical, \
            _z_score(self.discard_analytic, self.discard_empirical,
                     self.n_networks)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("signature,analytic,empirical,z\n")
            for name, p, f, z in self.rows():
                fh.write(f"{name},{p:.10g},{f:.10g},{z:.4f}\n")


def _z_score(p, freq, n):
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / n)
    return (freq - p) / se


def validate_signatures(params: GgpParams, n_networks, rng, max_edges=4,
                        g_knots=1800) -> SignatureReport:
    """Generate n_networks forward draws at K=1 with the interaction fixed
    to 1 and compare signature frequencies to the analytic table."""
    if n_networks < 1:
        raise ValueError("n_networks must be positive")
    sigs, probs, discard = analytic_signature_probs(params, max_edges,
                                                    g_knots)
    index = {sig: i for i, sig in enumerate(sigs)}
    counts = np.zeros(len(sigs), dtype=np.int64)
    discarded = 0
    eta1 = np.ones((1, 1))
    for _ in range(n_networks):
        net = sample_network(1, params, rng=rng, eta=eta1)
        if net.src.shape[0] > max_edges:
            discarded += 1
        else:
            counts[index[signature_of(net)]] += 1

    freq = counts / n_networks
    z = np.array([_z_score(p, f, n_networks) for p, f in zip(probs, freq)])
    return SignatureReport(
        signatures=sigs, analytic=probs, empirical=freq, z_scores=z,
        discard_analytic=discard, discard_empirical=discarded / n_networks,
        n_networks=n_networks, max_edges=max_edges)


def validate_total_mass(params: GgpParams, n_samples, rng,
                        reference_params=None, truncation=None) -> float:
    """KS distance between simulated total masses (atom sums plus the
    expected truncation remainder) and the quadrature CDF.

    reference_params lets a deliberately wrong oracle CDF be swapped in as a
    negative control; it defaults to params.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if truncation is None:
        truncation = 1e-6 * atom_truncation_scale(params)
    rem = expected_mass_below(params, truncation)
    totals = np.empty(n_samples)
    for i in range(n_samples):
        totals[i] = sample_atoms(params, truncation, rng).total_mass() + rem
    totals.sort()
    ref = params if reference_params is None else reference_params
    cdf = total_mass_cdf(ref, totals)
    steps = np.arange(1, n_samples + 1) / n_samples
    return float(max(np.max(np.abs(cdf - steps)),
                     np.max(np.abs(cdf - steps + 1.0 / n_samples))))
