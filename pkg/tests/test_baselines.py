import math

import numpy as np
import pytest
from scipy.special import gammaln, roots_jacobi, roots_laguerre

from crmsbm.baselines import (
    BaselineConfig,
    crp_gibbs_conditional,
    crp_log_prior,
    dcsbm_gibbs,
    dcsbm_log_joint,
    pirm_gibbs,
    _SweepState,
)
from crmsbm.data import EdgeCountMatrix, make_holdout
from crmsbm.evalmetrics import adjusted_rand


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _partition_labels(part, n):
    z = np.empty(n, dtype=np.int64)
    for l, block in enumerate(part):
        for i in block:
            z[i] = l
    return z


def test_crp_prior_sums_to_one_over_partitions_of_four():
    parts = list(_set_partitions([0, 1, 2, 3]))
    assert len(parts) == 15
    for alpha in (0.7, 1.0, 2.5):
        total = sum(math.exp(crp_log_prior(_partition_labels(p, 4), alpha))
                    for p in parts)
        assert total == pytest.approx(1.0, rel=1e-12)


def test_crp_prior_rejects_gapped_labels():
    with pytest.raises(ValueError):
        crp_log_prior(np.array([0, 2, 2]), 1.0)


_A3 = np.array([[0, 2, 1],
                [1, 0, 0],
                [0, 1, 1]], dtype=np.int64)
_Z3 = np.array([0, 0, 1])


def _quad_oracle_dc(alpha, gam, la, lb):
    """Integrate the weight simplices and interactions numerically.

    Vertex factors for block {0,1} are (2t, 2(1-t)) out and (2u, 2(1-u))
    in; the singleton block contributes a fixed factor 1. Gauss-Jacobi
    nodes absorb the Dirichlet density exactly and Gauss-Laguerre is exact
    for the interaction integral because the shape parameter is an
    integer here.
    """
    members = [np.where(_Z3 == l)[0] for l in range(2)]
    lfact = gammaln(_A3 + 1.0).sum()
    xj, wj = roots_jacobi(40, gam - 1.0, gam - 1.0)
    t = (xj + 1.0) / 2.0
    scale = (0.5 ** (2 * gam - 1)) / math.exp(
        2 * math.lgamma(gam) - math.lgamma(2 * gam))
    xl, wl = roots_laguerre(30)
    total = 0.0
    for it, tt in enumerate(t):
        f1 = np.array([2 * tt, 2 * (1 - tt), 1.0])
        for iu, uu in enumerate(t):
            f2 = np.array([2 * uu, 2 * (1 - uu), 1.0])
            p = 1.0
            for l in range(2):
                for m in range(2):
                    idx = [(i, j) for i in members[l] for j in members[m]]
                    base = np.array([f1[i] * f2[j] for i, j in idx])
                    av = np.array([_A3[i, j] for i, j in idx], dtype=float)
                    nlm = av.sum()
                    r = lb + base.sum()
                    cpow = float((av * np.log(base)).sum())
                    val = (wl * (xl / r) ** (la - 1 + nlm)).sum() / r
                    p *= math.exp(la * math.log(lb)
                                  - math.lgamma(la) + cpow) * val
            total += wj[it] * wj[iu] * scale * scale * p
    return math.log(total) + crp_log_prior(_Z3, alpha) - lfact


def _quad_oracle_pirm(alpha, la, lb):
    """Every dyad in a tile shares one interaction rate; only that rate
    is integrated."""
    members = [np.where(_Z3 == l)[0] for l in range(2)]
    lfact = gammaln(_A3 + 1.0).sum()
    xl, wl = roots_laguerre(30)
    lp = crp_log_prior(_Z3, alpha) - lfact
    for l in range(2):
        for m in range(2):
            nlm = _A3[np.ix_(members[l], members[m])].sum()
            r = lb + len(members[l]) * len(members[m])
            val = (wl * (xl / r) ** (la - 1 + nlm)).sum() / r
            lp += math.log(val) + la * math.log(lb) - math.lgamma(la)
    return lp


def test_collapsed_joint_matches_quadrature():
    alpha, gam, la, lb = 1.1, 1.3, 2.0, 0.9
    hyper = ((math.log(alpha) - alpha) + (math.log(gam) - gam)
             + (math.log(la) - la) + (math.log(lb) - lb))
    got = dcsbm_log_joint(_A3, _Z3, alpha, gam, la, lb, True) - hyper
    want = _quad_oracle_dc(alpha, gam, la, lb)
    assert got == pytest.approx(want, rel=1e-6)


def test_collapsed_pirm_joint_matches_quadrature():
    alpha, la, lb = 1.1, 2.0, 0.9
    hyper = ((math.log(alpha) - alpha) + (math.log(la) - la)
             + (math.log(lb) - lb))
    got = dcsbm_log_joint(_A3, _Z3, alpha, 1.3, la, lb, False) - hyper
    want = _quad_oracle_pirm(alpha, la, lb)
    assert got == pytest.approx(want, rel=1e-8)


def test_uniform_weights_reduce_to_uncorrected_joint():
    # fixing every weight at 1/size makes the vertex rate factors cancel
    # the size powers exactly, leaving the uncorrected likelihood
    rng = np.random.default_rng(2)
    A = rng.poisson(0.9, (6, 6))
    z = np.array([0, 1, 0, 2, 1, 0])
    alpha, gam, la, lb = 1.4, 0.8, 1.1, 1.3
    K = 3
    k_l = np.bincount(z)
    n_lm = np.zeros((K, K))
    for i in range(6):
        for j in range(6):
            n_lm[z[i], z[j]] += A[i, j]
    pairs = np.outer(k_l, k_l)
    lp = crp_log_prior(z, alpha)
    lp += float((gammaln(la + n_lm) - (la + n_lm) * np.log(lb + pairs)
                 - gammaln(la) + la * math.log(lb)).sum())
    lp -= float(gammaln(A[A > 1] + 1.0).sum())
    lp += ((math.log(alpha) - alpha) + (math.log(la) - la)
           + (math.log(lb) - lb))
    got = dcsbm_log_joint(A, z, alpha, gam, la, lb, False)
    assert got == pytest.approx(lp, rel=1e-12)


def test_joint_invariances():
    rng = np.random.default_rng(0)
    A = rng.poisson(0.8, (6, 6))
    z = np.array([0, 1, 0, 2, 1, 0])
    args = (1.1, 1.3, 1.2, 0.9)
    for dc in (True, False):
        lp = dcsbm_log_joint(A, z, *args, dc)
        perm = np.array([2, 0, 1])
        assert dcsbm_log_joint(A, perm[z], *args, dc) == pytest.approx(
            lp, rel=1e-12)
        p = rng.permutation(6)
        assert dcsbm_log_joint(A[np.ix_(p, p)], z[p], *args, dc) \
            == pytest.approx(lp, rel=1e-12)


def test_joint_rejects_bad_input():
    A = np.zeros((3, 3), dtype=np.int64)
    with pytest.raises(ValueError):
        dcsbm_log_joint(A, np.array([0, 2, 2]), 1.0, 1.0)
    with pytest.raises(ValueError):
        dcsbm_log_joint(A, np.array([0, 0, 1]), -1.0, 1.0)
    with pytest.raises(ValueError):
        dcsbm_log_joint(A, np.array([0, 0, 1]), 1.0, 0.0)


def test_gibbs_conditional_matches_brute_force():
    rng = np.random.default_rng(0)
    rng.poisson(0.8, (6, 6))  # keep draw stream aligned with instance design
    A4 = rng.poisson(1.0, (4, 4))
    cases = [
        (np.array([0, 1, 0, 1]), 2),   # plain move
        (np.array([0, 1, 2, 1]), 0),   # detaching empties block 0
        (np.array([0, 0, 0, 1]), 3),   # detaching empties the last block
    ]
    for z, i in cases:
        for dc in (True, False):
            probs, others = crp_gibbs_conditional(
                A4, z, i, 0.9, 1.4, 1.1, 0.8, dc)
            k_prime = int(np.delete(others, i).max()) + 1
            assert probs.shape == (k_prime + 1,)
            brute = []
            for c in range(k_prime + 1):
                zc = others.copy()
                zc[i] = c
                brute.append(dcsbm_log_joint(A4, zc, 0.9, 1.4, 1.1, 0.8, dc))
            brute = np.array(brute)
            brute = np.exp(brute - brute.max())
            brute /= brute.sum()
            np.testing.assert_allclose(probs, brute, atol=1e-10)


def test_sweep_bookkeeping_stays_consistent():
    rng = np.random.default_rng(0)
    A = rng.poisson(0.8, (6, 6))
    st = _SweepState(A, np.array([0, 1, 0, 2, 1, 0]), 1.3, 1.2, 0.9, True)
    for _ in range(30):
        st.sweep(1.1, rng)
    fresh = _SweepState(A, st.labels.copy(), 1.3, 1.2, 0.9, True)
    assert np.array_equal(st.k_l, fresh.k_l)
    assert np.array_equal(st.n_lm, fresh.n_lm)
    np.testing.assert_allclose(st.D1, fresh.D1)
    np.testing.assert_allclose(st.D2, fresh.D2)
    np.testing.assert_allclose(st.lg1, fresh.lg1)
    np.testing.assert_allclose(st.lg2, fresh.lg2)


def _planted_matrix(seed=7):
    rng = np.random.default_rng(seed)
    truth = np.array([0] * 12 + [1] * 12)
    p = np.where(np.equal.outer(truth, truth), 0.8, 0.05)
    A = (rng.random((24, 24)) < p).astype(np.int64)
    np.fill_diagonal(A, 0)
    return A, truth


def test_pirm_recovers_planted_blocks():
    A, truth = _planted_matrix()
    M = EdgeCountMatrix(A.copy(), binary_mode=True)
    res = pirm_gibbs(M, BaselineConfig(iters=150), np.random.default_rng(11))
    assert adjusted_rand(res.best_labels, truth) > 0.8
    assert res.trace_column("K")[-1] == 2


def test_dcsbm_recovers_planted_blocks():
    A, truth = _planted_matrix()
    M = EdgeCountMatrix(A.copy(), binary_mode=True)
    res = dcsbm_gibbs(M, BaselineConfig(iters=150), np.random.default_rng(11))
    assert adjusted_rand(res.best_labels, truth) > 0.8


def test_chain_contract_and_determinism():
    A, _ = _planted_matrix()
    M = make_holdout(EdgeCountMatrix(A.copy(), binary_mode=True),
                     0.08, np.random.default_rng(3))
    cfg = BaselineConfig(iters=80)
    r1 = dcsbm_gibbs(M, cfg, np.random.default_rng(5))
    r2 = dcsbm_gibbs(M, cfg, np.random.default_rng(5))
    r3 = dcsbm_gibbs(M, cfg, np.random.default_rng(6))
    assert r1.trace_header == ["iter", "logp", "K", "alpha_crp", "gamma",
                               "accept_rate"]
    assert r1.trace.shape == (80, 6)
    assert r1.predictions.shape == (M.holdout_pairs.shape[0],)
    assert np.all((r1.predictions >= 0.0) & (r1.predictions <= 1.0))
    assert len(r1.label_snapshots) == 8
    assert 0.0 < r1.accept_rate <= 1.0
    assert np.array_equal(r1.trace, r2.trace)
    assert np.array_equal(r1.predictions, r2.predictions)
    assert not np.array_equal(r1.trace, r3.trace)


def test_single_vertex_stays_in_one_block():
    M = EdgeCountMatrix(np.zeros((1, 1), dtype=np.int64), binary_mode=False)
    res = dcsbm_gibbs(M, BaselineConfig(iters=10), np.random.default_rng(1))
    assert np.all(res.trace_column("K") == 1)
    assert res.labels.tolist() == [0]


def test_pirm_requires_rng():
    M = EdgeCountMatrix(np.zeros((2, 2), dtype=np.int64), binary_mode=False)
    with pytest.raises(ValueError):
        pirm_gibbs(M)
