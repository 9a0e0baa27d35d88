"""Comparison models: the degree-corrected block model and its
uncorrected restriction.

Both place a Chinese-restaurant-process prior on the block partition and
Gamma interactions between blocks; the degree-corrected variant adds
per-block out/in weight simplices with a symmetric Dirichlet prior. The
interaction and weight parameters are collapsed analytically, so the Gibbs
sweep operates on the partition alone; held-out dyads are imputed each
iteration to keep the collapsed form exact, and predictions use the same
posterior-mean presence probability as the main model.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import EdgeCountMatrix
from .errors import NumericError

_LGAMMA = math.lgamma


def _tile_term(n, pairs, lam_a, lam_b):
    return (_LGAMMA(lam_a + n) - (lam_a + n) * math.log(lam_b + pairs)
            - _LGAMMA(lam_a) + lam_a * math.log(lam_b))


def _dm_term(size, gamma, sum_lg, total):
    """Collapsed symmetric-Dirichlet weight factor for one block."""
    return (_LGAMMA(size * gamma) - size * _LGAMMA(gamma)
            + sum_lg - _LGAMMA(size * gamma + total))


def crp_log_prior(labels, alpha_crp):
    """Log probability of a compact partition under the restaurant
    process: alpha^K Gamma(alpha)/Gamma(alpha+n) prod_l (k_l - 1)!."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    K = int(labels.max()) + 1
    k_l = np.bincount(labels, minlength=K)
    if np.any(k_l == 0):
        raise ValueError("blocks must be compactly numbered and nonempty")
    return (K * math.log(alpha_crp) + _LGAMMA(alpha_crp)
            - _LGAMMA(alpha_crp + n) + float(gammaln(k_l).sum()))


def dcsbm_log_joint(A, labels, alpha_crp, gamma, lam_a=1.0, lam_b=1.0,
                    degree_correction=True):
    """Collapsed log joint of counts and a compact partition.

    Blocks must be numbered 0..K-1 with no gaps. The interaction matrix and
    the per-block weight simplices are integrated out; the partition prior
    is the standard restaurant-process EPPF, and alpha_crp, gamma (and the
    interaction hyperparameters) carry Gamma(2,1) priors.
    """
    counts = A.counts if isinstance(A, EdgeCountMatrix) else np.asarray(A)
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if n == 0:
        raise ValueError("need at least one vertex")
    K = int(labels.max()) + 1
    k_l = np.bincount(labels, minlength=K)
    if np.any(k_l == 0):
        raise ValueError("blocks must be compactly numbered and nonempty")
    if alpha_crp <= 0.0 or gamma <= 0.0 or lam_a <= 0.0 or lam_b <= 0.0:
        raise ValueError("hyperparameters must be positive")

    lp = crp_log_prior(labels, alpha_crp)

    onehot = np.zeros((K, n), dtype=np.int64)
    onehot[labels, np.arange(n)] = 1
    n_lm = onehot @ counts @ onehot.T
    pairs = np.outer(k_l, k_l)
    lp += float((gammaln(lam_a + n_lm)
                 - (lam_a + n_lm) * np.log(lam_b + pairs)).sum())
    lp += K * K * (lam_a * math.log(lam_b) - _LGAMMA(lam_a))

    nz = counts[counts > 1]
    if nz.size:
        lp -= float(gammaln(nz + 1.0).sum())

    hyper = (math.log(alpha_crp) - alpha_crp
             + math.log(lam_a) - lam_a + math.log(lam_b) - lam_b)

    if degree_correction:
        d1 = counts.sum(axis=1)
        d2 = counts.sum(axis=0)
        D1 = np.bincount(labels, weights=d1, minlength=K)
        D2 = np.bincount(labels, weights=d2, minlength=K)
        lp += float(((D1 + D2) * np.log(k_l)).sum())
        for d, D in ((d1, D1), (d2, D2)):
            sum_lg = np.bincount(labels, weights=gammaln(gamma + d),
                                 minlength=K)
            for l in range(K):
                lp += _dm_term(int(k_l[l]), gamma, float(sum_lg[l]),
                               float(D[l]))
        hyper += math.log(gamma) - gamma

    if not math.isfinite(lp):
        raise NumericError("baseline joint is not finite")
    return lp + hyper


# ---------------------------------------------------------------------------
# collapsed restaurant-process Gibbs sweep
# ---------------------------------------------------------------------------

class _SweepState:
    """Mutable partition bookkeeping for the collapsed sweep."""

    def __init__(self, counts, labels, gamma, lam_a, lam_b, dc):
        self.counts = counts
        self.labels = np.asarray(labels, dtype=np.int64).copy()
        self.gamma = gamma
        self.lam_a = lam_a
        self.lam_b = lam_b
        self.dc = dc
        self.d1 = counts.sum(axis=1).astype(np.int64)
        self.d2 = counts.sum(axis=0).astype(np.int64)
        self.rebuild()

    def rebuild(self):
        K = int(self.labels.max()) + 1 if self.labels.size else 1
        self.K = K
        n = self.labels.shape[0]
        self.k_l = np.bincount(self.labels, minlength=K).astype(np.int64)
        onehot = np.zeros((K, n), dtype=np.int64)
        onehot[self.labels, np.arange(n)] = 1
        self.n_lm = onehot @ self.counts @ onehot.T
        self.D1 = np.bincount(self.labels, weights=self.d1,
                              minlength=K)
        self.D2 = np.bincount(self.labels, weights=self.d2,
                              minlength=K)
        self.lg1 = np.bincount(self.labels,
                               weights=gammaln(self.gamma + self.d1),
                               minlength=K)
        self.lg2 = np.bincount(self.labels,
                               weights=gammaln(self.gamma + self.d2),
                               minlength=K)

    def _detach(self, i):
        b = self.labels[i]
        # park the detached vertex at 0 so routing bincounts stay length K
        self.labels[i] = 0
        row = self.counts[i, :].copy()
        col = self.counts[:, i].copy()
        self_c = int(row[i])
        row[i] = 0
        col[i] = 0
        r_out = np.bincount(self.labels, weights=row,
                            minlength=self.K).astype(np.int64)
        r_in = np.bincount(self.labels, weights=col,
                           minlength=self.K).astype(np.int64)
        self.n_lm[b, :] -= r_out
        self.n_lm[:, b] -= r_in
        self.n_lm[b, b] -= self_c
        self.k_l[b] -= 1
        self.D1[b] -= self.d1[i]
        self.D2[b] -= self.d2[i]
        self.lg1[b] -= math.lgamma(self.gamma + self.d1[i])
        self.lg2[b] -= math.lgamma(self.gamma + self.d2[i])
        return b, r_out, r_in, self_c

    def _drop_empty(self, b):
        last = self.K - 1
        if b != last:
            self.labels[self.labels == last] = b
            for arr in (self.k_l, self.D1, self.D2, self.lg1, self.lg2):
                arr[b] = arr[last]
            self.n_lm[b, :] = self.n_lm[last, :]
            self.n_lm[:, b] = self.n_lm[:, last]
            self.n_lm[b, b] = self.n_lm[last, last]
        self.K = last
        self.k_l = self.k_l[:last]
        self.D1 = self.D1[:last]
        self.D2 = self.D2[:last]
        self.lg1 = self.lg1[:last]
        self.lg2 = self.lg2[:last]
        self.n_lm = self.n_lm[:last, :last]

    def _attach_grow(self):
        K = self.K
        grown = np.zeros((K + 1, K + 1), dtype=np.int64)
        grown[:K, :K] = self.n_lm
        self.n_lm = grown
        self.k_l = np.append(self.k_l, 0)
        self.D1 = np.append(self.D1, 0.0)
        self.D2 = np.append(self.D2, 0.0)
        self.lg1 = np.append(self.lg1, 0.0)
        self.lg2 = np.append(self.lg2, 0.0)
        self.K = K + 1

    def detach_compact(self, i):
        """Remove vertex i from the bookkeeping, dropping its block if that
        empties it, and return endpoint routing against the compacted
        labels."""
        b, r_out, r_in, self_c = self._detach(i)
        if self.k_l[b] == 0:
            self._drop_empty(b)
            row = self.counts[i, :].copy()
            col = self.counts[:, i].copy()
            row[i] = 0
            col[i] = 0
            # the parked vertex can extend bincount past K; trim it
            r_out = np.bincount(self.labels, weights=row,
                                minlength=self.K).astype(np.int64)[:self.K]
            r_in = np.bincount(self.labels, weights=col,
                               minlength=self.K).astype(np.int64)[:self.K]
        return r_out, r_in, self_c

    def _attach(self, i, c, r_out, r_in, self_c):
        if c == self.K:
            self._attach_grow()
            r_out = np.append(r_out, 0)
            r_in = np.append(r_in, 0)
        self.n_lm[c, :] += r_out
        self.n_lm[:, c] += r_in
        self.n_lm[c, c] += self_c
        self.k_l[c] += 1
        self.D1[c] += self.d1[i]
        self.D2[c] += self.d2[i]
        self.lg1[c] += math.lgamma(self.gamma + self.d1[i])
        self.lg2[c] += math.lgamma(self.gamma + self.d2[i])
        self.labels[i] = c

    def _candidate_logw(self, i, alpha_crp, r_out, r_in, self_c):
        """Log conditional weight of every existing block plus a new one,
        relative to shared detached terms."""
        K = self.K
        la, lb, g = self.lam_a, self.lam_b, self.gamma
        lg_d1 = math.lgamma(g + self.d1[i])
        lg_d2 = math.lgamma(g + self.d2[i])
        n_i = int(self.d1[i] + self.d2[i])
        out = np.empty(K + 1)
        for c in range(K):
            kc = int(self.k_l[c])
            w = math.log(kc)  # restaurant weight
            # tiles touching block c: the pair counts move with k_c
            for m in range(K):
                km = int(self.k_l[m])
                if m == c:
                    continue
                w += (_tile_term(self.n_lm[c, m] + r_out[m],
                                 (kc + 1) * km, la, lb)
                      - _tile_term(self.n_lm[c, m], kc * km, la, lb))
                w += (_tile_term(self.n_lm[m, c] + r_in[m],
                                 km * (kc + 1), la, lb)
                      - _tile_term(self.n_lm[m, c], km * kc, la, lb))
            w += (_tile_term(self.n_lm[c, c] + r_out[c] + r_in[c] + self_c,
                             (kc + 1) * (kc + 1), la, lb)
                  - _tile_term(self.n_lm[c, c], kc * kc, la, lb))
            if self.dc:
                w += ((self.D1[c] + self.D2[c] + n_i) * math.log(kc + 1)
                      - (self.D1[c] + self.D2[c]) * math.log(kc))
                w += (_dm_term(kc + 1, g, self.lg1[c] + lg_d1,
                               self.D1[c] + self.d1[i])
                      - _dm_term(kc, g, self.lg1[c], self.D1[c]))
                w += (_dm_term(kc + 1, g, self.lg2[c] + lg_d2,
                               self.D2[c] + self.d2[i])
                      - _dm_term(kc, g, self.lg2[c], self.D2[c]))
            out[c] = w

        # a fresh singleton block: weight simplex terms vanish exactly
        w = math.log(alpha_crp)
        for m in range(K):
            km = int(self.k_l[m])
            w += _tile_term(r_out[m], km, la, lb)
            w += _tile_term(r_in[m], km, la, lb)
        w += _tile_term(self_c, 1, la, lb)
        out[K] = w
        return out

    def sweep(self, alpha_crp, rng):
        for i in range(self.labels.shape[0]):
            r_out, r_in, self_c = self.detach_compact(i)
            logw = self._candidate_logw(i, alpha_crp, r_out, r_in, self_c)
            p = np.exp(logw - logw.max())
            p /= p.sum()
            c = int(np.searchsorted(np.cumsum(p), rng.random(),
                                    side="right"))
            c = min(c, self.K)
            self._attach(i, c, r_out, r_in, self_c)


def crp_gibbs_conditional(counts, labels, i, alpha_crp, gamma,
                          lam_a=1.0, lam_b=1.0, degree_correction=True):
    """Conditional label distribution of vertex i (existing blocks in
    compacted order, then a new block). Exposed for verification."""
    st = _SweepState(np.asarray(counts), labels, gamma, lam_a, lam_b,
                     degree_correction)
    r_out, r_in, self_c = st.detach_compact(i)
    logw = st._candidate_logw(i, alpha_crp, r_out, r_in, self_c)
    p = np.exp(logw - logw.max())
    return p / p.sum(), st.labels.copy()


# ---------------------------------------------------------------------------
# full chains
# ---------------------------------------------------------------------------

@dataclass
class BaselineConfig:
    degree_correction: bool = True
    iters: int = 600
    burn_in: int = -1          # -1: later half
    mh_steps: int = 20
    step_size: float = 0.25
    alpha_init: float = 1.0
    gamma_init: float = 1.0
    lambda_a: float = 1.0
    lambda_b: float = 1.0
    label_stride: int = 10

    def resolved_burn_in(self):
        return self.iters // 2 if self.burn_in < 0 else self.burn_in


@dataclass
class BaselineResult:
    trace: np.ndarray
    trace_header: list
    label_snapshots: list
    best_labels: np.ndarray
    best_logp: float
    predictions: np.ndarray
    holdout_pairs: np.ndarray
    accept_rate: float
    labels: np.ndarray
    alpha_crp: float
    gamma: float

    def trace_column(self, name):
        return self.trace[:, self.trace_header.index(name)]


def _mh_hypers(work, labels, alpha_crp, gamma, cfg, rng):
    """Random-walk Metropolis on log alpha_crp (and log gamma when the
    degree correction is active)."""
    dims = 2 if cfg.degree_correction else 1
    x = np.array([math.log(alpha_crp), math.log(gamma)][:dims])

    def target(xv):
        a = math.exp(xv[0])
        g = math.exp(xv[1]) if dims == 2 else gamma
        if not np.all(np.isfinite(xv)) or np.any(np.abs(xv) > 600.0):
            return -math.inf
        lp = dcsbm_log_joint(work, labels, a, g, cfg.lambda_a, cfg.lambda_b,
                             cfg.degree_correction)
        return lp + xv.sum()  # log Jacobian of exp per coordinate

    f = target(x)
    acc = 0
    for _ in range(cfg.mh_steps):
        prop = x + cfg.step_size * rng.standard_normal(dims)
        fp = target(prop)
        if fp > -math.inf and math.log(rng.random()) < fp - f:
            x, f = prop, fp
            acc += 1
    a = math.exp(x[0])
    g = math.exp(x[1]) if dims == 2 else gamma
    return a, g, acc / cfg.mh_steps


def _impute_baseline(work, A, labels, k_l, gamma, cfg, rng):
    """Draw the weight simplices and interactions from their conditionals,
    refresh held-out dyads, and return per-vertex rate factors."""
    n = labels.shape[0]
    K = k_l.shape[0]
    d1 = work.sum(axis=1)
    d2 = work.sum(axis=0)
    onehot = np.zeros((K, n), dtype=np.int64)
    onehot[labels, np.arange(n)] = 1
    n_lm = onehot @ work @ onehot.T
    eta = rng.gamma(cfg.lambda_a + n_lm,
                    1.0 / (cfg.lambda_b + np.outer(k_l, k_l)))
    if cfg.degree_correction:
        th1 = np.empty(n)
        th2 = np.empty(n)
        for l in range(K):
            mem = np.where(labels == l)[0]
            th1[mem] = rng.dirichlet(gamma + d1[mem])
            th2[mem] = rng.dirichlet(gamma + d2[mem])
        f1 = k_l[labels] * th1
        f2 = k_l[labels] * th2
    else:
        f1 = np.ones(n)
        f2 = np.ones(n)

    hp = A.holdout_pairs
    if hp.shape[0]:
        li, lj = labels[hp[:, 0]], labels[hp[:, 1]]
        rates = eta[li, lj] * f1[hp[:, 0]] * f2[hp[:, 1]]
        work[hp[:, 0], hp[:, 1]] = rng.poisson(rates)
        if A.symmetric:
            off = hp[:, 0] != hp[:, 1]
            sym = eta[lj, li] * f1[hp[:, 1]] * f2[hp[:, 0]]
            work[hp[off, 1], hp[off, 0]] = rng.poisson(sym[off])
    return eta, f1, f2


def dcsbm_gibbs(A: EdgeCountMatrix, config: BaselineConfig, rng) \
        -> BaselineResult:
    """Collapsed Gibbs chain over the partition with hyperparameter MH and
    holdout imputation; same trace and prediction conventions as the main
    sampler."""
    work = A.counts.copy()
    n = A.n_vertices
    if n == 0:
        raise ValueError("need at least one vertex")
    # dispersed start: single-site moves merge blocks far more readily
    # than they split them, so one big block is a poor initial state
    init = rng.integers(0, min(n, 10), size=n)
    labels = np.unique(init, return_inverse=True)[1].astype(np.int64)
    alpha_crp = config.alpha_init
    gamma = config.gamma_init
    burn_in = config.resolved_burn_in()

    header = ["iter", "logp", "K", "alpha_crp", "gamma", "accept_rate"]
    trace = np.empty((config.iters, len(header)))
    label_snapshots = []
    hp = A.holdout_pairs
    pred_sum = np.zeros(hp.shape[0])
    pred_n = 0
    best_logp = -math.inf
    best_labels = labels.copy()
    acc_total = 0.0

    for it in range(config.iters):
        alpha_crp, gamma, rate = _mh_hypers(work, labels, alpha_crp, gamma,
                                            config, rng)
        acc_total += rate

        st = _SweepState(work, labels, gamma, config.lambda_a,
                         config.lambda_b, config.degree_correction)
        st.sweep(alpha_crp, rng)
        labels = st.labels

        eta, f1, f2 = _impute_baseline(work, A, labels, st.k_l, gamma,
                                       config, rng)
        logp = dcsbm_log_joint(work, labels, alpha_crp, gamma,
                               config.lambda_a, config.lambda_b,
                               config.degree_correction)
        trace[it] = [it, logp, st.K, alpha_crp, gamma, rate]
        if config.label_stride and it % config.label_stride == 0:
            label_snapshots.append((it, labels.copy()))

        if it >= burn_in:
            if logp > best_logp:
                best_logp = logp
                best_labels = labels.copy()
            if hp.shape[0]:
                li, lj = labels[hp[:, 0]], labels[hp[:, 1]]
                lam = eta[li, lj] * f1[hp[:, 0]] * f2[hp[:, 1]]
                if A.symmetric:
                    off = hp[:, 0] != hp[:, 1]
                    lam = lam + np.where(
                        off, eta[lj, li] * f1[hp[:, 1]] * f2[hp[:, 0]], 0.0)
                pred_sum += -np.expm1(-lam)
                pred_n += 1

    preds = pred_sum / pred_n if pred_n else pred_sum
    return BaselineResult(
        trace=trace, trace_header=header, label_snapshots=label_snapshots,
        best_labels=best_labels, best_logp=best_logp, predictions=preds,
        holdout_pairs=hp.copy(), accept_rate=acc_total / max(config.iters, 1),
        labels=labels.copy(), alpha_crp=alpha_crp, gamma=gamma)


def pirm_gibbs(A: EdgeCountMatrix, config: BaselineConfig = None,
               rng=None) -> BaselineResult:
    """The uncorrected restriction: uniform weights inside every block."""
    if rng is None:
        raise ValueError("an rng is required")
    if config is None:
        config = BaselineConfig()
    cfg = BaselineConfig(
        degree_correction=False, iters=config.iters, burn_in=config.burn_in,
        mh_steps=config.mh_steps, step_size=config.step_size,
        alpha_init=config.alpha_init, gamma_init=config.gamma_init,
        lambda_a=config.lambda_a, lambda_b=config.lambda_b,
        label_stride=config.label_stride)
    return dcsbm_gibbs(A, cfg, rng)
