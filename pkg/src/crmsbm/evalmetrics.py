"""Scoring and chain diagnostics: ranking AUC, autocorrelation, adjusted
Rand index."""

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels):
    """Probability a random positive outranks a random negative, ties 1/2.

    Computed exactly from rank statistics (Mann-Whitney form).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def autocorrelation(series, max_lag):
    """Normalized autocovariance estimates for lags 0..max_lag (lag 0 = 1)."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.shape[0] <= max_lag:
        raise ValueError("series must be longer than max_lag")
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ValueError("series is constant")
    n = x.shape[0]
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:max_lag + 1]
    return acov / denom


def adjusted_rand(labels_a, labels_b):
    """Chance-corrected agreement between two partitions; 1 on identical
    (up to renaming), ~0 for independent labelings."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] == 0:
        raise ValueError("labelings must be equal-length nonempty vectors")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(v):
        return (v * (v - 1) // 2).sum()

    n = a.shape[0]
    sum_ij = comb2(table)
    sum_a = comb2(table.sum(axis=1))
    sum_b = comb2(table.sum(axis=0))
    total = n * (n - 1) // 2
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0  # both partitions trivial and identical in structure
    return float((sum_ij - expected) / (max_index - expected))
