"""Forward simulation of block-structured multigraphs.

The generative process: atom weights come from the generalized gamma measure
restricted to a window of mass alpha (adaptive thinning above a truncation
threshold), block proportions from a symmetric Dirichlet, tile interaction
strengths from independent Gammas, tile edge counts from Poissons with rate
eta_lm * T_l * T_m, and each edge endpoint picks an atom of its tile's block
with probability proportional to weight. Atoms never selected by an endpoint
are dropped from the returned network.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ResourceLimitError
from .ggp import GgpParams, expected_atom_count

_BUF = 1 << 16


@dataclass
class AtomSet:
    """Weighted atoms of one simulated measure window.

    weights are in the increasing order the thinning emits them; locations
    are uniform on [0, alpha); traits are uniform on [0, 1) and determine
    block membership through the proportion vector.
    """

    weights: np.ndarray
    locations: np.ndarray
    traits: np.ndarray
    truncation: float

    def __len__(self):
        return self.weights.shape[0]

    def total_mass(self) -> float:
        return float(self.weights.sum())


def atom_truncation_scale(params: GgpParams) -> float:
    """Natural size scale of the total mass, used for relative thresholds."""
    if params.tau > 0.0:
        return params.mean_total_mass()
    return params.theta ** (1.0 / params.sigma)


def sample_atoms(params: GgpParams, truncation, rng,
                 max_atoms=5_000_000) -> AtomSet:
    """Draw all measure atoms with weight >= truncation by adaptive thinning.

    Exact in distribution above the threshold. Raises ResourceLimitError when
    the expected atom count exceeds max_atoms.
    """
    if truncation <= 0.0:
        raise ValueError("truncation must be positive")
    if expected_atom_count(params, truncation) > max_atoms:
        raise ResourceLimitError(
            f"expected atom count above {truncation} exceeds cap {max_atoms}")
    chunks = []
    count = 0
    t = truncation
    out = np.empty(_BUF)
    while True:
        exp_buf = rng.exponential(size=_BUF)
        unif_buf = rng.random(_BUF)
        n_out, t, _, done = _kernels.thin_buffered(
            params.alpha, params.sigma, params.tau, t, exp_buf, unif_buf, out)
        if n_out:
            chunks.append(out[:n_out].copy())
            count += n_out
        if done:
            break
        if count > 2 * max_atoms:
            raise ResourceLimitError(f"atom count exceeded cap {max_atoms}")
    weights = np.concatenate(chunks) if chunks else np.empty(0)
    locations = rng.uniform(0.0, params.alpha, size=weights.shape[0])
    traits = rng.random(weights.shape[0])
    return AtomSet(weights, locations, traits, float(truncation))


def sample_block_proportions(K, beta0, rng) -> np.ndarray:
    """Symmetric Dirichlet(beta0/K, ..., beta0/K) proportions."""
    if K < 1 or K != int(K):
        raise ValueError("K must be a positive integer")
    if beta0 <= 0.0:
        raise ValueError("beta0 must be positive")
    if K == 1:
        return np.ones(1)
    return rng.dirichlet(np.full(int(K), beta0 / K))


def blocks_from_traits(traits, beta) -> np.ndarray:
    """Deterministic block assignment: atom i joins block l iff its trait
    falls in the l-th partition interval of [0, 1)."""
    edges = np.cumsum(beta)
    z = np.searchsorted(edges, traits, side="right")
    return np.minimum(z, len(beta) - 1)


@dataclass
class GeneratedNetwork:
    """One simulated network plus the ground truth that produced it.

    src/dst index into the vertex arrays (0-based); parallel entries form one
    directed edge, repeated entries are multiedges. vertex_* arrays describe
    the atoms kept after dropping those no edge endpoint selected, unless the
    network was generated with keep_isolated. block_masses holds the truncated
    total weight of every block including dropped atoms.
    """

    src: np.ndarray
    dst: np.ndarray
    vertex_weights: np.ndarray
    vertex_blocks: np.ndarray
    vertex_traits: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    block_masses: np.ndarray
    truncation: float

    @property
    def n_vertices(self) -> int:
        return self.vertex_weights.shape[0]

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]

    def endpoint_counts(self) -> np.ndarray:
        """n_i: number of edge endpoints on vertex i (a self-edge adds 2)."""
        k = self.n_vertices
        return (np.bincount(self.src, minlength=k)
                + np.bincount(self.dst, minlength=k))

    def count_matrix(self) -> np.ndarray:
        """Dense edge-count matrix A with A[i, j] = multiplicity of i -> j."""
        k = self.n_vertices
        a = np.zeros((k, k), dtype=np.int64)
        np.add.at(a, (self.src, self.dst), 1)
        return a


def sample_network(K, params: GgpParams, beta0=1.0, lambda_a=1.0,
                   lambda_b=1.0, truncation=None, rng=None, beta=None,
                   eta=None, atoms=None, keep_isolated=False,
                   max_edges=10_000_000, max_atoms=5_000_000) -> GeneratedNetwork:
    """Run the full generative process once.

    beta/eta/atoms, when given, override the corresponding draws (the
    remaining randomness is still consumed in a fixed order, so runs are
    reproducible for a seeded rng). truncation defaults to 1e-6 relative to
    the natural total-mass scale.
    """
    if rng is None:
        raise ValueError("an rng is required")
    if lambda_a <= 0.0 or lambda_b <= 0.0:
        raise ValueError("lambda_a and lambda_b must be positive")
    K = int(K)
    if truncation is None:
        truncation = 1e-6 * atom_truncation_scale(params)

    if beta is None:
        beta = sample_block_proportions(K, beta0, rng)
    else:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (K,) or not math.isclose(beta.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("beta must be a length-K probability vector")

    if atoms is None:
        atoms = sample_atoms(params, truncation, rng, max_atoms=max_atoms)
    else:
        truncation = atoms.truncation
    z = blocks_from_traits(atoms.traits, beta)

    if eta is None:
        eta = rng.gamma(lambda_a, 1.0 / lambda_b, size=(K, K))
    else:
        eta = np.broadcast_to(np.asarray(eta, dtype=float), (K, K)).copy()
        if np.any(eta < 0.0):
            raise ValueError("eta entries must be nonnegative")

    block_masses = np.bincount(z, weights=atoms.weights, minlength=K)
    rates = eta * np.outer(block_masses, block_masses)
    if rates.sum() > max_edges:
        raise ResourceLimitError(
            f"expected edge count {rates.sum():.3g} exceeds cap {max_edges}")
    tile_counts = rng.poisson(rates)
    if tile_counts.sum() > max_edges:
        raise ResourceLimitError(f"edge count exceeded cap {max_edges}")

    members = [np.where(z == b)[0] for b in range(K)]
    cumw = [np.cumsum(atoms.weights[m]) for m in members]

    def pick(block, n):
        # endpoint lands on atom i of the block with probability w_i / T_l
        c = cumw[block]
        j = np.searchsorted(c, rng.random(n) * c[-1], side="right")
        return members[block][np.minimum(j, len(c) - 1)]

    src_parts, dst_parts = [], []
    for b_from in range(K):
        for b_to in range(K):
            n = int(tile_counts[b_from, b_to])
            if n == 0:
                continue
            src_parts.append(pick(b_from, n))
            dst_parts.append(pick(b_to, n))
    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)

    if keep_isolated:
        keep = np.arange(len(atoms))
        new_src, new_dst = src, dst
    else:
        keep = np.unique(np.concatenate([src, dst])).astype(np.int64)
        relabel = np.full(len(atoms), -1, dtype=np.int64)
        relabel[keep] = np.arange(keep.shape[0])
        new_src, new_dst = relabel[src], relabel[dst]

    return GeneratedNetwork(
        src=new_src.astype(np.int64),
        dst=new_dst.astype(np.int64),
        vertex_weights=atoms.weights[keep],
        vertex_blocks=z[keep],
        vertex_traits=atoms.traits[keep],
        beta=np.asarray(beta, dtype=float),
        eta=eta,
        block_masses=block_masses,
        truncation=float(truncation),
    )
