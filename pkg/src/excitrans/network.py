"""Similarity network, Markov clustering and the consistency parameter."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .errors import DimensionMismatchError, NonConvergenceError
from .geometry import canonical_intermediates, intermediate_permutations

DEFAULT_P_GRID = tuple(round(1.1 + 0.1 * i, 10) for i in range(12))
MCL_TOL = 1e-10
MCL_MAX_ITER = 10_000
MCL_PRUNE = 1e-14
DENSE_FILL = 0.05


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n
        self.largest = 1 if n else 0

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.size[ra] > self.largest:
            self.largest = self.size[ra]
        return ra


@dataclass(frozen=True, eq=False)
class Candidates:
    """All unordered structure pairs with their similarity.

    ``a``/``b`` are positions into ``node_ids`` with ``a < b``, in row-major
    pair order.
    """

    node_ids: np.ndarray
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray

    def __len__(self):
        return self.s.shape[0]

    def rows(self):
        ids = self.node_ids
        return zip(ids[self.a].tolist(), ids[self.b].tolist(), self.s.tolist())


@dataclass(frozen=True, eq=False)
class EfficiencyNetwork:
    node_ids: np.ndarray
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray
    cutoff: float
    degrees: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.node_ids.shape[0]

    @property
    def n_edges(self):
        return self.s.shape[0]

    def adjacency(self, self_loops=True):
        n = self.n_nodes
        rows = np.concatenate([self.a, self.b])
        cols = np.concatenate([self.b, self.a])
        adj = sp.coo_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(n, n)).tocsc()
        if self_loops:
            adj = adj + sp.identity(n, format="csc")
        return adj


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Cluster labels ``0..k-1``, numbered by decreasing population."""

    p: float
    node_ids: np.ndarray
    labels: np.ndarray
    iterations: int = 0

    @property
    def populations(self):
        return np.bincount(self.labels)

    @property
    def n_clusters(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def label_of(self):
        return dict(zip(self.node_ids.tolist(), self.labels.tolist()))

    def members(self, cluster):
        return self.node_ids[self.labels == cluster]


@dataclass(frozen=True)
class ConsistencyCurve:
    p_values: tuple
    c_raw: tuple
    c_values: tuple
    n_clusters: tuple


def pairwise_similarities(structures):
    """Similarity of every unordered pair, ordered by structure id."""
    structures = sorted(structures, key=lambda s: s.id)
    if not structures:
        return Candidates(np.zeros(0, np.int64), *(np.zeros(0, np.int64),) * 2, np.zeros(0))
    n = structures[0].n
    if any(s.n != n for s in structures):
        raise DimensionMismatchError("all structures must have the same site count")
    k = len(structures)
    frames = np.ascontiguousarray(np.stack([canonical_intermediates(s) for s in structures])
                                  .reshape(k, n - 2, 3))
    costs = np.empty(k * (k - 1) // 2)
    K.pairwise_costs(frames, intermediate_permutations(n - 2), costs)
    a, b = np.triu_indices(k, 1)
    ids = np.array([s.id for s in structures], dtype=np.int64)
    return Candidates(ids, a.astype(np.int64), b.astype(np.int64), np.sqrt(np.maximum(costs, 0.0) / n))


def largest_component_curve(candidates):
    """Sorted similarities and the largest component size after each edge."""
    order = np.argsort(candidates.s, kind="stable")
    uf = UnionFind(candidates.node_ids.shape[0])
    sizes = np.empty(order.shape[0], dtype=np.int64)
    a, b = candidates.a.tolist(), candidates.b.tolist()
    for pos, e in enumerate(order.tolist()):
        uf.union(a[e], b[e])
        sizes[pos] = uf.largest
    return candidates.s[order], sizes


def select_cutoff(candidates, coverage=0.999):
    """Smallest similarity at which the largest component covers ``coverage`` of the nodes.

    Edges are added in order of increasing similarity; the answer is the
    similarity of the edge that first makes the giant component big enough.
    All edges tied at that value belong to the thresholded graph as well.
    """
    if not 0.0 < coverage <= 1.0:
        raise ValueError("coverage must lie in (0, 1]")
    if len(candidates) == 0:
        raise ValueError("no edge candidates")
    n = candidates.node_ids.shape[0]
    s_sorted, sizes = largest_component_curve(candidates)
    need = coverage * n - 1e-9
    hit = np.nonzero(sizes >= need)[0]
    if hit.size == 0:
        return float(s_sorted[0]) if need <= 1 else float(s_sorted[-1])
    return float(s_sorted[hit[0]])


def build_network(candidates, cutoff):
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    keep = candidates.s <= cutoff
    a, b = candidates.a[keep], candidates.b[keep]
    deg = np.bincount(np.concatenate([a, b]), minlength=candidates.node_ids.shape[0])
    degrees = dict(zip(candidates.node_ids.tolist(), deg.tolist()))
    return EfficiencyNetwork(candidates.node_ids, a, b, candidates.s[keep], float(cutoff), degrees)


def _normalize_columns(m):
    sums = np.asarray(m.sum(axis=0)).ravel()
    if sp.issparse(m):
        return (m @ sp.diags(1.0 / sums)).tocsc()
    return m / sums


def _prune(m):
    if not sp.issparse(m):
        m[m < MCL_PRUNE] = 0.0
        return m
    m = m.tocsc()
    m.data[m.data < MCL_PRUNE] = 0.0
    m.eliminate_zeros()
    return m


def _mcl_step(a, p):
    """Expansion, inflation, pruning and renormalisation; dense once crowded."""
    cells = a.shape[0] ** 2
    if sp.issparse(a) and a.nnz > DENSE_FILL * cells:
        a = a.toarray()
    elif not sp.issparse(a) and np.count_nonzero(a) < 0.5 * DENSE_FILL * cells:
        a = sp.csc_matrix(a)
    nxt = a @ a
    if p != 1:
        nxt = nxt.power(p) if sp.issparse(nxt) else nxt**p
    return _normalize_columns(_prune(nxt))


def _canonical_labels(raw):
    """Relabel components by decreasing size, ties by first member index."""
    k = raw.max() + 1 if raw.size else 0
    sizes = np.bincount(raw, minlength=k)
    first = np.full(k, raw.size)
    np.minimum.at(first, raw, np.arange(raw.size))
    order = sorted(range(k), key=lambda c: (-sizes[c], first[c]))
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return remap[raw]


def mcl(net, p, self_loops=True, max_iter=MCL_MAX_ITER, tol=MCL_TOL):
    """Markov clustering: alternate squaring and elementwise ``p``-th powers.

    Clusters are the connected components of the non-zero pattern of the
    converged matrix.
    """
    if p < 1:
        raise ValueError("inflation exponent p must be >= 1")
    n = net.n_nodes
    if n == 0:
        raise ValueError("empty network")
    adj = net.adjacency(self_loops)
    if not self_loops:
        # isolated nodes keep a self-loop, otherwise their column is empty
        empty = np.asarray(adj.sum(axis=0)).ravel() == 0
        adj = adj + sp.diags(empty.astype(float))
    a = _normalize_columns(adj)
    for it in range(1, max_iter + 1):
        nxt = _mcl_step(a, p)
        diff = abs(nxt - a)
        change = diff.max() if not sp.issparse(diff) or diff.nnz else 0.0
        a = nxt
        if change < tol:
            break
    else:
        raise NonConvergenceError(
            f"MCL did not converge in {max_iter} iterations at p={p}",
            diagnostics={"last_change": float(change),
                         "nnz": int(a.nnz if sp.issparse(a) else np.count_nonzero(a))})
    if not sp.issparse(a):
        a = sp.csc_matrix(a)
    _, raw = connected_components(a, directed=True, connection="weak")
    return ClusterAssignment(float(p), net.node_ids, _canonical_labels(raw), it)


def consistency(previous, current):
    """(raw, normalised) consistency of ``current`` labels against ``previous``."""
    previous = np.asarray(previous)
    current = np.asarray(current)
    n_prev = int(previous.max()) + 1
    total = current.shape[0]
    raw = 0.0
    for c in np.unique(current):
        members = previous[current == c]
        raw += np.bincount(members, minlength=n_prev).max() / total
    if n_prev == 1:
        return raw, 1.0
    floor = 1.0 / n_prev
    return raw, (raw - floor) / (1.0 - floor)


def consistency_scan(net, p_grid=DEFAULT_P_GRID, self_loops=True):
    """Cluster at every ``p`` and compare each step with the one before.

    The first grid point is compared with the single cluster of ``p = 1``,
    hence scores 1.  Returns the curve and the assignments, keyed by ``p``.
    """
    p_grid = [float(p) for p in p_grid]
    if len(p_grid) < 2:
        raise ValueError("p grid needs at least two points")
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p grid must be ascending")
    assignments = {p: mcl(net, p, self_loops) for p in p_grid}
    raw, norm, counts = [1.0], [1.0], [assignments[p_grid[0]].n_clusters]
    for prev, cur in zip(p_grid, p_grid[1:]):
        r, c = consistency(assignments[prev].labels, assignments[cur].labels)
        raw.append(r)
        norm.append(c)
        counts.append(assignments[cur].n_clusters)
    return ConsistencyCurve(tuple(p_grid), tuple(raw), tuple(norm), tuple(counts)), assignments


def choose_granularity(curve, tol=1e-9):
    """Last ``p`` of the leading run of perfectly consistent steps."""
    if not curve.p_values:
        raise ValueError("empty curve")
    chosen = curve.p_values[0]
    for p, c in zip(curve.p_values, curve.c_values):
        if c < 1.0 - tol:
            break
        chosen = p
    return chosen


def cluster_report(assignment):
    """Rows ``(rank, cluster, population, fraction)`` by decreasing population."""
    pops = assignment.populations
    total = pops.sum()
    order = sorted(range(pops.shape[0]), key=lambda c: (-pops[c], c))
    return [(rank, c, int(pops[c]), pops[c] / total) for rank, c in enumerate(order)]
