"""Edge-list ingestion, preprocessing, and held-out mask construction.

Text format: whitespace-separated `src dst [count]` per line, `#` starts a
comment line, labels are arbitrary non-space strings mapped to contiguous
indices in first-appearance order.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RawEdgeList:
    """Parsed records of (source label, target label, count >= 1)."""

    records: list

    def __len__(self):
        return len(self.records)


@dataclass
class EdgeCountMatrix:
    """Observed directed edge counts plus the held-out dyad bookkeeping.

    counts[i, j] is the observed multiplicity of edge i -> j, zeroed on
    held-out dyads. binary_mode means observed entries were thresholded to
    indicators; symmetric means the network is undirected (counts mirrored,
    dyads treated as unordered pairs). holdout_pairs lists held dyads (i, j)
    (i <= j when symmetric) whose true values are in holdout_truth; the mask
    marks both orientations of a held symmetric dyad.
    """

    counts: np.ndarray
    binary_mode: bool = True
    symmetric: bool = False
    labels: list = field(default_factory=list)
    holdout_pairs: np.ndarray = field(
        default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    holdout_truth: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))
    holdout_mask: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("counts must be a square matrix")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.holdout_mask.size == 0:
            self.holdout_mask = np.zeros(self.counts.shape, dtype=bool)
        if not self.labels:
            self.labels = [str(i + 1) for i in range(self.counts.shape[0])]

    @property
    def n_vertices(self) -> int:
        return self.counts.shape[0]

    def endpoint_counts(self) -> np.ndarray:
        """n_i from observed counts; a self-edge contributes 2."""
        return self.counts.sum(axis=0) + self.counts.sum(axis=1)

    def n_edges(self) -> int:
        return int(self.counts.sum())


def load_edge_list(path) -> RawEdgeList:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ValueError(
                    f"{path}:{lineno}: expected 'src dst [count]', got {line!r}")
            count = 1
            if len(parts) == 3:
                try:
                    count = int(parts[2])
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: count {parts[2]!r} is not an integer")
                if count < 1:
                    raise ValueError(f"{path}:{lineno}: count must be >= 1")
            records.append((parts[0], parts[1], count))
    return RawEdgeList(records)


def save_edge_list(raw: RawEdgeList, path):
    with open(path, "w") as fh:
        for src, dst, count in raw.records:
            if count == 1:
                fh.write(f"{src} {dst}\n")
            else:
                fh.write(f"{src} {dst} {count}\n")


def index_labels(raw: RawEdgeList):
    """Map labels to 0-based contiguous indices in first-appearance order."""
    order = {}
    for src, dst, _ in raw.records:
        for lab in (src, dst):
            if lab not in order:
                order[lab] = len(order)
    return order


def preprocess(raw, symmetrize=False, binary=True,
               drop_self=False) -> EdgeCountMatrix:
    """Build the count matrix: sum duplicate records, optionally mirror by
    max of both orientations, optionally zero self-edges, optionally
    threshold to binary, then drop vertices with no edges and reindex.
    Accepts a RawEdgeList or an EdgeCountMatrix; idempotent on its output."""
    if isinstance(raw, EdgeCountMatrix):
        counts = raw.counts.copy()
        labels = list(raw.labels)
    else:
        order = index_labels(raw)
        if len(order) == 0:
            raise ValueError("edge list is empty")
        counts = np.zeros((len(order), len(order)), dtype=np.int64)
        for src, dst, c in raw.records:
            counts[order[src], order[dst]] += c
        labels = [lab for lab, _ in sorted(order.items(), key=lambda kv: kv[1])]
    if symmetrize:
        counts = np.maximum(counts, counts.T)
    if drop_self:
        np.fill_diagonal(counts, 0)
    if binary:
        counts = (counts > 0).astype(np.int64)
    degree = counts.sum(axis=0) + counts.sum(axis=1)
    keep = np.where(degree > 0)[0]
    if keep.shape[0] == 0:
        raise ValueError("network has no edges after preprocessing")
    counts = counts[np.ix_(keep, keep)]
    labels = [labels[i] for i in keep]
    return EdgeCountMatrix(counts, binary_mode=binary, symmetric=symmetrize,
                           labels=labels)


def from_network(net, binary=False, symmetrize=False) -> EdgeCountMatrix:
    """Bridge a generated network to the observed-count representation."""
    counts = net.count_matrix()
    if symmetrize:
        counts = np.maximum(counts, counts.T)
    if binary:
        counts = (counts > 0).astype(np.int64)
    return EdgeCountMatrix(counts, binary_mode=binary, symmetric=symmetrize)


def _dyad_pool(k, symmetric, include_self):
    if symmetric:
        i, j = np.triu_indices(k, k=0 if include_self else 1)
    else:
        i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        i, j = i.ravel(), j.ravel()
        if not include_self:
            off = i != j
            i, j = i[off], j[off]
    return np.column_stack([i, j]).astype(np.int64)


def make_holdout(A: EdgeCountMatrix, fraction, rng,
                 include_self=False) -> EdgeCountMatrix:
    """Hide a random fraction of all potential dyads for later scoring.

    Exactly round(fraction * pool size) dyads are held out, subject to every
    vertex keeping at least one observed edge: a vertex stripped bare gets one
    incident edge re-introduced and a replacement dyad is drawn from the
    remaining pool. Raises ValueError when the constraint cannot be met.
    """
    if not (0.0 <= fraction < 1.0):
        raise ValueError("fraction must lie in [0, 1)")
    if np.any(A.holdout_mask):
        raise ValueError("matrix already carries a holdout")
    k = A.n_vertices
    pool = _dyad_pool(k, A.symmetric, include_self)
    target = int(round(fraction * pool.shape[0]))
    out = EdgeCountMatrix(A.counts.copy(), binary_mode=A.binary_mode,
                          symmetric=A.symmetric, labels=list(A.labels))
    if target == 0:
        return out

    chosen = rng.choice(pool.shape[0], size=target, replace=False)
    held = np.zeros(pool.shape[0], dtype=bool)
    held[chosen] = True

    def degrees(held_mask):
        # observed incident true edges per vertex under the candidate holdout
        mask = np.zeros((k, k), dtype=bool)
        hp = pool[held_mask]
        mask[hp[:, 0], hp[:, 1]] = True
        if A.symmetric:
            mask[hp[:, 1], hp[:, 0]] = True
        vis = np.where(mask, 0, A.counts)
        return (vis.sum(axis=0) + vis.sum(axis=1) > 0)

    for _ in range(10 * k + 100):
        ok = degrees(held)
        bare = np.where(~ok)[0]
        if bare.shape[0] == 0:
            break
        v = bare[0]
        # held incident dyads of v that carry a true edge
        incident = np.where(held
                            & ((pool[:, 0] == v) | (pool[:, 1] == v))
                            & (A.counts[pool[:, 0], pool[:, 1]]
                               + A.counts[pool[:, 1], pool[:, 0]] > 0))[0]
        if incident.shape[0] == 0:
            raise ValueError(f"vertex {v} has no edges to re-introduce")
        held[incident[rng.integers(incident.shape[0])]] = False
        free = np.where(~held)[0]
        held[free[rng.integers(free.shape[0])]] = True
    else:
        raise ValueError(
            "holdout fraction too high to keep every vertex connected")

    hp = pool[held]
    truth = A.counts[hp[:, 0], hp[:, 1]].copy()
    if A.symmetric:
        truth = np.maximum(truth, A.counts[hp[:, 1], hp[:, 0]])
    mask = np.zeros((k, k), dtype=bool)
    mask[hp[:, 0], hp[:, 1]] = True
    if A.symmetric:
        mask[hp[:, 1], hp[:, 0]] = True
    out.counts[mask] = 0
    out.holdout_pairs = hp
    out.holdout_truth = truth.astype(np.int64)
    out.holdout_mask = mask
    return out


def save_holdout_manifest(A: EdgeCountMatrix, path):
    """CSV `i,j,true_label` of held dyads, 1-based indices."""
    with open(path, "w") as fh:
        fh.write("i,j,true_label\n")
        for (i, j), t in zip(A.holdout_pairs, A.holdout_truth):
            fh.write(f"{i + 1},{j + 1},{t}\n")
