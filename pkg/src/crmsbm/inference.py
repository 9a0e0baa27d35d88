"""Collapsed-likelihood MCMC for block-structured multigraphs.

The sampler alternates three moves per iteration: random-walk Metropolis in
transformed coordinates over the measure parameters, a Gibbs sweep over block
labels with freshly imputed vertex weights, and conjugate imputation of the
interaction matrix, the weights, and the latent/held-out edge counts. All
likelihood evaluations are collapsed over the interaction matrix; the vertex
weights appear only transiently through imputation.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .data import EdgeCountMatrix
from .errors import NumericError
from .ggp import GgpParams, sample_total_mass
from .generate import sample_block_proportions  # noqa: F401 (CLI re-export)

# transformed-coordinate layout, shared with the sweep kernels:
# [logit sigma, log tau, (log alpha_l, log s_l, log t_l, logit(u_l/pi)) per
#  block, log beta0, log lambda_a, log lambda_b]
IDX_SIGMA = 0
IDX_TAU = 1


def _block_slot(l):
    return 2 + 4 * l


def _idx_beta0(K):
    return 2 + 4 * K


def state_dim(K):
    return 4 * K + 5


@dataclass
class BlockState:
    """Vertex block labels (0-based) with the Dirichlet concentration."""

    labels: np.ndarray
    K: int
    beta0: float = 1.0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.K):
            raise ValueError("labels must lie in 0..K-1")
        if self.beta0 <= 0.0:
            raise ValueError("beta0 must be positive")


@dataclass
class MeasureState:
    """Per-block measure variables plus global (sigma, tau) and the
    interaction hyperparameters.

    s holds the edge-selected weight mass per block (exactly 0 for empty
    blocks), t the unselected remainder mass, u the angular auxiliary of the
    total-mass density. crm_limit switches to the eta == 1 reduction where
    lambda_a, lambda_b are absent from the model.
    """

    sigma: float
    tau: float
    alpha: np.ndarray
    s: np.ndarray
    t: np.ndarray
    u: np.ndarray
    lambda_a: float = 1.0
    lambda_b: float = 1.0
    crm_limit: bool = False

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        K = self.alpha.shape[0]
        if not (self.s.shape == self.t.shape == self.u.shape == (K,)):
            raise ValueError("alpha, s, t, u must share one length")
        if not (0.0 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (0, 1)")
        if self.tau < 0.0:
            raise ValueError("tau must be nonnegative")
        if np.any(self.alpha <= 0.0) or np.any(self.t <= 0.0):
            raise ValueError("alpha and t must be positive")
        if np.any(self.s < 0.0):
            raise ValueError("s must be nonnegative")
        if np.any(self.u <= 0.0) or np.any(self.u >= math.pi):
            raise ValueError("u must lie in (0, pi)")

    @property
    def K(self) -> int:
        return self.alpha.shape[0]

    @property
    def total_masses(self) -> np.ndarray:
        return self.s + self.t

    def copy(self) -> "MeasureState":
        return MeasureState(self.sigma, self.tau, self.alpha.copy(),
                            self.s.copy(), self.t.copy(), self.u.copy(),
                            self.lambda_a, self.lambda_b, self.crm_limit)


@dataclass
class SufficientStats:
    """Endpoint counts at vertex, block, and tile granularity."""

    n_i: np.ndarray
    n_l: np.ndarray
    n_lm: np.ndarray
    k_l: np.ndarray
    k: int


def _counts_of(A):
    return A.counts if isinstance(A, EdgeCountMatrix) else np.asarray(A)


def suff_stats(A, labels, K) -> SufficientStats:
    counts = _counts_of(A)
    k = counts.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (k,):
        raise ValueError("labels must cover every vertex")
    if k and (labels.min() < 0 or labels.max() >= K):
        raise ValueError("label out of range")
    n_i = counts.sum(axis=0) + counts.sum(axis=1)
    onehot = np.zeros((K, k), dtype=np.int64)
    onehot[labels, np.arange(k)] = 1
    n_lm = onehot @ counts @ onehot.T
    n_l = np.bincount(labels, weights=n_i, minlength=K).astype(np.int64)
    k_l = np.bincount(labels, minlength=K).astype(np.int64)
    return SufficientStats(n_i.astype(np.int64), n_l, n_lm, k_l, k)


def endpoint_histogram(n_i):
    """Distinct endpoint counts and their multiplicities, as floats for the
    likelihood kernel."""
    vals, cnts = np.unique(np.asarray(n_i, dtype=np.int64), return_counts=True)
    return vals.astype(float), cnts.astype(float)


# ---------------------------------------------------------------------------
# collapsed joint likelihood (reference implementation)
# ---------------------------------------------------------------------------

def log_E_block(block_counts, m: MeasureState, l) -> float:
    """Log of the collapsed per-block factor E_l.

    block_counts are the endpoint counts n_i of the block's vertices; an
    empty block contributes only the total-mass density of its unselected
    remainder and requires s_l == 0.
    """
    block_counts = np.asarray(block_counts, dtype=float)
    g = _kernels.log_total_mass_ext(m.alpha[l], m.sigma, m.tau,
                                    float(m.t[l]), float(m.u[l]))
    if block_counts.size == 0:
        if m.s[l] != 0.0:
            raise ValueError("an empty block must carry s == 0")
        return g
    if np.any(block_counts < 1):
        raise ValueError("every vertex needs at least one edge endpoint")
    k_l = block_counts.shape[0]
    n_l = block_counts.sum()
    shape = n_l - k_l * m.sigma
    if shape <= 0.0 or m.s[l] <= 0.0:
        raise ValueError("block mass and endpoint counts are inconsistent")
    poch = float(np.sum(gammaln(block_counts - m.sigma)
                        - gammaln(1.0 - m.sigma)))
    return (k_l * math.log(m.alpha[l])
            + (shape - 1.0) * math.log(m.s[l])
            - math.lgamma(shape)
            - m.tau * m.s[l]
            + g + poch)


def _check(term, name, context=""):
    if not math.isfinite(term):
        raise NumericError(f"{name} term is {term}{context}")
    return term


def log_joint(A, z: BlockState, m: MeasureState) -> float:
    """Collapsed log joint of counts, labels, and measure state.

    Includes the improper-uniform (zero) terms for sigma, tau, alpha and the
    Gamma(2,1) hyperpriors for beta0 and, outside the crm limit, for
    lambda_a, lambda_b.
    """
    counts = _counts_of(A)
    K = z.K
    if m.K != K:
        raise ValueError("measure state and block state disagree on K")
    stats = suff_stats(counts, z.labels, K)

    alpha_total = float(m.alpha.sum())
    prior = (math.lgamma(z.beta0) - K * math.lgamma(z.beta0 / K)
             + float(np.sum((z.beta0 / K - 1.0) * np.log(m.alpha)))
             - (z.beta0 - 1.0) * math.log(alpha_total))
    _check(prior, "block-proportion prior")

    hyper = math.log(z.beta0) - z.beta0
    if not m.crm_limit:
        hyper += (math.log(m.lambda_a) - m.lambda_a
                  + math.log(m.lambda_b) - m.lambda_b)
    _check(hyper, "hyperprior")

    blocks = 0.0
    for l in range(K):
        members = stats.n_i[z.labels == l]
        blocks += _check(log_E_block(members, m, l), "block factor",
                         f" (block {l})")

    nz = counts[counts > 1]
    factorials = -float(gammaln(nz + 1.0).sum()) if nz.size else 0.0
    _check(factorials, "edge factorial")

    T = m.total_masses
    tiles = float(_kernels.g_terms_sum(stats.n_lm, T, m.lambda_a, m.lambda_b,
                                       m.crm_limit))
    _check(tiles, "tile interaction")

    return prior + hyper + blocks + factorials + tiles


def log_joint_given_weights(A, z: BlockState, m: MeasureState, w) -> float:
    """Log joint of the weight-extended representation.

    w are the unnormalized vertex weights; per block they must sum to s_l.
    Collapsed only over the interaction matrix. Integrating the weights
    analytically recovers log_joint; Gibbs label conditionals are ratios of
    this quantity across candidate labels.
    """
    counts = _counts_of(A)
    w = np.asarray(w, dtype=float)
    K = z.K
    if np.any(w <= 0.0):
        raise ValueError("weights must be positive")

    lp = (math.lgamma(z.beta0) - K * math.lgamma(z.beta0 / K)
          + float(np.sum((z.beta0 / K - 1.0) * np.log(m.alpha)))
          - (z.beta0 - 1.0) * math.log(float(m.alpha.sum())))
    lp += math.log(z.beta0) - z.beta0
    if not m.crm_limit:
        lp += (math.log(m.lambda_a) - m.lambda_a
               + math.log(m.lambda_b) - m.lambda_b)

    # atom-process density: location mass times the weight measure
    lp += float(np.sum(np.log(m.alpha[z.labels])))
    lp += float(np.sum(-(1.0 + m.sigma) * np.log(w) - m.tau * w
                       - gammaln(1.0 - m.sigma)))
    for l in range(K):
        lp += _kernels.log_total_mass_ext(m.alpha[l], m.sigma, m.tau,
                                          float(m.t[l]), float(m.u[l]))

    s = np.bincount(z.labels, weights=w, minlength=K)
    T = s + m.t
    stats = suff_stats(counts, z.labels, K)
    lp += float(_kernels.g_terms_sum(stats.n_lm, T, m.lambda_a, m.lambda_b,
                                     m.crm_limit))

    n_i = counts.sum(axis=0) + counts.sum(axis=1)
    lp += float(np.dot(n_i, np.log(w)))
    nz = counts[counts > 1]
    if nz.size:
        lp -= float(gammaln(nz + 1.0).sum())
    return lp


# ---------------------------------------------------------------------------
# parameter transform
# ---------------------------------------------------------------------------

def transform_params(m: MeasureState, k_l=None) -> np.ndarray:
    """Map a measure state to the unconstrained sweep vector."""
    K = m.K
    x = np.zeros(state_dim(K))
    x[IDX_SIGMA] = math.log(m.sigma / (1.0 - m.sigma))
    # tau == 0 maps to -inf; that coordinate must then be masked off
    x[IDX_TAU] = math.log(m.tau) if m.tau > 0.0 else -math.inf
    for l in range(K):
        base = _block_slot(l)
        x[base] = math.log(m.alpha[l])
        empty = k_l is not None and k_l[l] == 0
        x[base + 1] = math.log(m.s[l]) if (m.s[l] > 0.0 and not empty) else 0.0
        x[base + 2] = math.log(m.t[l])
        frac = m.u[l] / math.pi
        x[base + 3] = math.log(frac / (1.0 - frac))
    x[_idx_beta0(K)] = 0.0
    x[_idx_beta0(K) + 1] = math.log(m.lambda_a)
    x[_idx_beta0(K) + 2] = math.log(m.lambda_b)
    return x


def untransform(x, K, k_l=None, crm_limit=False) -> MeasureState:
    """Inverse of transform_params. The trailing beta0 slot is not part of
    the measure state; read it off with exp(x[2 + 4K]) where needed."""
    sigma = 1.0 / (1.0 + math.exp(-x[IDX_SIGMA]))
    tau = math.exp(x[IDX_TAU])
    alpha = np.empty(K)
    s = np.empty(K)
    t = np.empty(K)
    u = np.empty(K)
    for l in range(K):
        base = _block_slot(l)
        alpha[l] = math.exp(x[base])
        empty = k_l is not None and k_l[l] == 0
        s[l] = 0.0 if empty else math.exp(x[base + 1])
        t[l] = math.exp(x[base + 2])
        u[l] = math.pi / (1.0 + math.exp(-x[base + 3]))
    lam_a = math.exp(x[_idx_beta0(K) + 1])
    lam_b = math.exp(x[_idx_beta0(K) + 2])
    return MeasureState(sigma, tau, alpha, s, t, u, lam_a, lam_b, crm_limit)


def sweep_mask(K, k_l, crm_limit=False, tau_fixed=False) -> np.ndarray:
    """Which coordinates the random walk may move."""
    mask = np.ones(state_dim(K), dtype=bool)
    if tau_fixed:
        mask[IDX_TAU] = False
    for l in range(K):
        if k_l[l] == 0:
            mask[_block_slot(l) + 1] = False
    if K == 1:
        mask[_idx_beta0(K)] = False
    if crm_limit:
        mask[_idx_beta0(K) + 1] = False
        mask[_idx_beta0(K) + 2] = False
    return mask


def transform_log_jacobian(x, mask, K) -> float:
    """Log Jacobian of the constrained <- unconstrained map over the live
    coordinates, matching the sweep kernel's internal correction."""
    jac = 0.0
    for d in range(len(x)):
        if not mask[d]:
            continue
        if d == IDX_SIGMA:
            e = 1.0 / (1.0 + math.exp(-x[d]))
            jac += math.log(e) + math.log(1.0 - e)
        elif d >= 2 and d < 2 + 4 * K and (d - 2) % 4 == 3:
            e = 1.0 / (1.0 + math.exp(-x[d]))
            jac += math.log(math.pi) + math.log(e) + math.log(1.0 - e)
        else:
            jac += x[d]
    return jac


# ---------------------------------------------------------------------------
# MCMC moves
# ---------------------------------------------------------------------------

def _mh_sweep_stats(stats: SufficientStats, z: BlockState, m: MeasureState,
                    steps, step_size, rng, tau_fixed=False):
    K = m.K
    nvals, ncnt = endpoint_histogram(stats.n_i)
    x = transform_params(m, stats.k_l)
    x[_idx_beta0(K)] = math.log(z.beta0)
    mask = sweep_mask(K, stats.k_l, m.crm_limit, tau_fixed or m.tau == 0.0)
    normals = rng.standard_normal(steps * x.shape[0])
    unifs = rng.random(steps)
    _, acc = _kernels.mh_sweep_core(
        x, mask, K, stats.k_l, stats.n_l, stats.n_lm, nvals, ncnt,
        m.crm_limit, float(step_size), normals, unifs)
    beta0 = math.exp(x[_idx_beta0(K)])
    m_new = untransform(x, K, stats.k_l, m.crm_limit)
    return m_new, beta0, acc / steps


def mh_sweep(A, z: BlockState, m: MeasureState, steps, step_size, rng,
             tau_fixed=False):
    """Random-walk Metropolis over the transformed measure state.

    Returns (new measure state, new beta0, acceptance rate). beta0 is part of
    the sweep for K > 1.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    stats = suff_stats(_counts_of(A), z.labels, z.K)
    return _mh_sweep_stats(stats, z, m, steps, step_size, rng, tau_fixed)


def impute_weights(stats: SufficientStats, m: MeasureState, labels, l, rng):
    """Normalized within-block weights: Dirichlet(n_i - sigma) over the
    block's vertices."""
    members = np.where(np.asarray(labels) == l)[0]
    if members.shape[0] == 0:
        raise ValueError("cannot impute weights for an empty block")
    conc = stats.n_i[members] - m.sigma
    if np.any(conc <= 0.0):
        raise ValueError("endpoint counts must exceed sigma")
    if members.shape[0] == 1:
        return members, np.ones(1)
    return members, rng.dirichlet(conc)


def impute_all_weights(stats: SufficientStats, m: MeasureState, labels, rng):
    """Unnormalized weights for every vertex: block Dirichlet draws scaled
    by the block masses s_l."""
    w = np.empty(stats.k)
    for l in range(m.K):
        if stats.k_l[l] == 0:
            continue
        members, frac = impute_weights(stats, m, labels, l, rng)
        w[members] = frac * m.s[l]
    return w


def impute_eta(stats: SufficientStats, m: MeasureState, rng):
    """Conjugate draw of the tile interaction matrix: Gamma(n_lm + lambda_a,
    rate T_l T_m + lambda_b); identically 1 in the crm limit."""
    if m.crm_limit:
        return np.ones((m.K, m.K))
    T = m.total_masses
    shape = stats.n_lm + m.lambda_a
    rate = np.outer(T, T) + m.lambda_b
    return rng.gamma(shape, 1.0 / rate)


def gibbs_z_sweep(A, z: BlockState, m: MeasureState, rng):
    """One Gibbs sweep over labels, imputing weights first as the move
    requires. Mutates m.s (weight mass moves between blocks) and returns the
    new BlockState."""
    counts = np.ascontiguousarray(_counts_of(A), dtype=np.int64)
    stats = suff_stats(counts, z.labels, z.K)
    w = impute_all_weights(stats, m, z.labels, rng)
    labels = z.labels.copy()
    unifs = rng.random(stats.k)
    s = m.s.copy()
    _kernels.gibbs_sweep_core(counts, labels, w, m.alpha, s, m.t,
                              stats.n_lm, stats.k_l, stats.n_l, stats.n_i,
                              m.lambda_a, m.lambda_b, m.crm_limit, unifs)
    # rebuild block masses exactly from the weights to kill float drift
    m.s = np.bincount(labels, weights=w, minlength=z.K)
    return BlockState(labels, z.K, z.beta0)


def align_labels(labels, reference, K):
    """Relabel blocks to best match the reference labeling, by greedy
    assignment on the confusion matrix."""
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (labels, reference), 1)
    perm = np.empty(K, dtype=np.int64)
    work = conf.astype(float)
    for _ in range(K):
        l, r = np.unravel_index(np.argmax(work), work.shape)
        perm[l] = r
        work[l, :] = -1.0
        work[:, r] = -1.0
    return perm[labels]


def majority_vote_labels(snapshots, reference, K):
    """Per-vertex modal block over snapshots, each aligned to the
    reference labeling first."""
    if not snapshots:
        return reference.copy()
    k = reference.shape[0]
    votes = np.zeros((k, K), dtype=np.int64)
    rows = np.arange(k)
    for lab in snapshots:
        votes[rows, align_labels(lab, reference, K)] += 1
    return votes.argmax(axis=1).astype(np.int64)


def conditional_mode_labels(counts, labels0, m: MeasureState, max_sweeps=60):
    """Deterministic refinement to a local mode of the label posterior.

    Weights enter at their conditional means, then vertices take conditional
    argmax blocks until no label changes.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    K = m.K
    z = np.asarray(labels0, dtype=np.int64).copy()
    for _ in range(max_sweeps):
        stats = suff_stats(counts, z, K)
        w = np.full(stats.k, 1e-12)
        for l in range(K):
            mem = np.where(z == l)[0]
            if mem.size == 0 or m.s[l] <= 0.0:
                continue
            conc = np.maximum(stats.n_i[mem] - m.sigma, 1e-9)
            w[mem] = m.s[l] * conc / conc.sum()
        s = np.bincount(z, weights=w, minlength=K)
        changed = _kernels.icm_sweep_core(
            counts, z, w, m.alpha, s, m.t, stats.n_lm, stats.k_l,
            stats.n_l, stats.n_i, m.lambda_a, m.lambda_b, m.crm_limit)
        if changed == 0:
            break
    return z


def impute_edges(work, A: EdgeCountMatrix, labels, w, eta, rng):
    """Refresh latent edge counts in the working matrix, in place.

    Held-out dyads get independent Poisson draws at their tile rate. In
    binary mode each observed present edge gets a zero-truncated update:
    propose Poisson, keep the previous count on a zero. Observed absences
    and observed counts stay fixed.
    """
    labels = np.asarray(labels)
    w = np.asarray(w, dtype=float)

    hp = A.holdout_pairs
    if hp.shape[0]:
        rates = eta[labels[hp[:, 0]], labels[hp[:, 1]]] * w[hp[:, 0]] * w[hp[:, 1]]
        draws = rng.poisson(rates)
        work[hp[:, 0], hp[:, 1]] = draws
        if A.symmetric:
            sym_rates = (eta[labels[hp[:, 1]], labels[hp[:, 0]]]
                         * w[hp[:, 1]] * w[hp[:, 0]])
            off = hp[:, 0] != hp[:, 1]
            work[hp[off, 1], hp[off, 0]] = rng.poisson(sym_rates[off])

    if A.binary_mode:
        obs = np.argwhere((A.counts >= 1) & ~A.holdout_mask)
        if obs.shape[0]:
            rates = (eta[labels[obs[:, 0]], labels[obs[:, 1]]]
                     * w[obs[:, 0]] * w[obs[:, 1]])
            prop = rng.poisson(rates)
            keep = prop == 0
            prop[keep] = work[obs[keep, 0], obs[keep, 1]]
            work[obs[:, 0], obs[:, 1]] = prop
    return work


# ---------------------------------------------------------------------------
# the full chain
# ---------------------------------------------------------------------------

@dataclass
class McmcConfig:
    K: int = 1
    iters: int = 2000
    burn_in: int = -1          # -1: later half
    mh_steps: int = 150
    step_size: float = 0.1
    crm_limit: bool = False
    sigma_init: float = 0.5
    tau_init: float = 1.0
    beta0_init: float = 1.0
    lambda_a_init: float = 1.0
    lambda_b_init: float = 1.0
    tau_fixed: bool = False
    label_stride: int = 10

    def resolved_burn_in(self):
        return self.iters // 2 if self.burn_in < 0 else self.burn_in


@dataclass
class McmcResult:
    trace: np.ndarray
    trace_header: list
    label_snapshots: list
    best_labels: np.ndarray
    best_logp: float
    mode_labels: np.ndarray
    predictions: np.ndarray
    holdout_pairs: np.ndarray
    accept_rate: float
    labels: np.ndarray
    measure: MeasureState
    beta0: float

    def trace_column(self, name):
        return self.trace[:, self.trace_header.index(name)]


def init_state(A: EdgeCountMatrix, config: McmcConfig, rng):
    """Overdispersed but reproducible start: uniform labels, remainder and
    selected masses from forward total-mass draws."""
    k = A.n_vertices
    K = config.K
    labels = rng.integers(0, K, size=k) if K > 1 else np.zeros(k, dtype=np.int64)
    z = BlockState(labels, K, config.beta0_init)
    alpha = np.full(K, max(k, 1) / K)
    tau_eff = config.tau_init if config.tau_init > 0.0 else 1.0
    s = np.empty(K)
    t = np.empty(K)
    for l in range(K):
        p = GgpParams(alpha[l], config.sigma_init, tau_eff)
        draws = sample_total_mass(p, 2, rng)
        s[l], t[l] = draws[0], draws[1]
    k_l = np.bincount(labels, minlength=K)
    s[k_l == 0] = 0.0
    m = MeasureState(config.sigma_init, config.tau_init, alpha, s, t,
                     np.full(K, math.pi / 2.0),
                     config.lambda_a_init, config.lambda_b_init,
                     config.crm_limit)
    return z, m


def run_mcmc(A: EdgeCountMatrix, config: McmcConfig, rng) -> McmcResult:
    """Run one chain; see the module docstring for the per-iteration moves.

    The trace has one row per iteration; held-out dyad presence
    probabilities are averaged over post-burn-in imputation draws.
    """
    K = config.K
    burn_in = config.resolved_burn_in()
    z, m = init_state(A, config, rng)
    work = A.counts.copy()

    header = (["iter", "logp", "sigma", "tau"]
              + [f"alpha_{l + 1}" for l in range(K)]
              + [f"s_{l + 1}" for l in range(K)]
              + [f"t_{l + 1}" for l in range(K)]
              + ["accept_rate"])
    trace = np.empty((config.iters, len(header)))
    label_snapshots = []
    hp = A.holdout_pairs
    pred_sum = np.zeros(hp.shape[0])
    pred_n = 0
    best_logp = -math.inf
    best_labels = z.labels.copy()
    acc_total = 0.0

    # the working matrix only changes when there is something to impute
    static_counts = not A.binary_mode and hp.shape[0] == 0
    stats = suff_stats(work, z.labels, K)
    for it in range(config.iters):
        m, beta0, rate = _mh_sweep_stats(stats, z, m, config.mh_steps,
                                         config.step_size, rng,
                                         config.tau_fixed)
        z = BlockState(z.labels, K, beta0)
        acc_total += rate

        if K > 1:
            z = gibbs_z_sweep(work, z, m, rng)
            stats = suff_stats(work, z.labels, K)

        w = impute_all_weights(stats, m, z.labels, rng)
        eta = impute_eta(stats, m, rng)
        if not static_counts:
            impute_edges(work, A, z.labels, w, eta, rng)
            stats = suff_stats(work, z.labels, K)

        logp = log_joint(work, z, m)
        if math.isnan(logp):
            raise NumericError(
                f"log joint became NaN at iteration {it}; state: {m!r}")
        trace[it] = ([it, logp, m.sigma, m.tau] + list(m.alpha)
                     + list(m.s) + list(m.t) + [rate])
        if config.label_stride and it % config.label_stride == 0:
            label_snapshots.append((it, z.labels.copy()))

        if it >= burn_in:
            if logp > best_logp:
                best_logp = logp
                best_labels = z.labels.copy()
            if hp.shape[0]:
                li, lj = z.labels[hp[:, 0]], z.labels[hp[:, 1]]
                lam = eta[li, lj] * w[hp[:, 0]] * w[hp[:, 1]]
                if A.symmetric:
                    off = hp[:, 0] != hp[:, 1]
                    lam = lam + np.where(
                        off, eta[lj, li] * w[hp[:, 1]] * w[hp[:, 0]], 0.0)
                pred_sum += -np.expm1(-lam)
                pred_n += 1

    preds = pred_sum / pred_n if pred_n else pred_sum
    mode_labels = _summarize_mode(A, config, trace, label_snapshots,
                                  best_labels, burn_in, m)
    return McmcResult(
        trace=trace, trace_header=header, label_snapshots=label_snapshots,
        best_labels=best_labels, best_logp=best_logp,
        mode_labels=mode_labels, predictions=preds,
        holdout_pairs=hp.copy(), accept_rate=acc_total / max(config.iters, 1),
        labels=z.labels.copy(), measure=m, beta0=z.beta0)


def _summarize_mode(A, config, trace, label_snapshots, best_labels,
                    burn_in, m_final):
    """Point estimate of the labeling: majority vote over post-burn-in
    snapshots, then conditional-mode refinement at the posterior-mean
    measure parameters."""
    K = config.K
    if K == 1 or config.iters == 0:
        return best_labels.copy()
    post = [lab for it, lab in label_snapshots if it >= burn_in]
    voted = majority_vote_labels(post, best_labels, K)
    rows = trace[burn_in:, :] if config.iters > burn_in else trace
    mean_row = rows.mean(axis=0)
    m = m_final.copy()
    m.sigma = float(np.clip(mean_row[2], 1e-3, 1.0 - 1e-3))
    m.tau = max(float(mean_row[3]), 0.0)
    m.alpha = np.maximum(mean_row[4:4 + K], 1e-6)
    m.s = np.maximum(mean_row[4 + K:4 + 2 * K], 0.0)
    m.t = np.maximum(mean_row[4 + 2 * K:4 + 3 * K], 1e-9)
    return conditional_mode_labels(A.counts, voted, m)
