"""Semi-supervised similarity graph and Louvain community detection.

The graph puts weight-1 must-link edges between labeled same-class pairs and
cosine-similarity edges between mutual-or-directed top-M neighbors; Louvain
then yields both the cluster labels and the number of categories.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset


@dataclass(frozen=True)
class SimilarityGraph:
    """Sparse weighted undirected graph, edges stored once with i < j."""

    n: int
    edge_i: np.ndarray
    edge_j: np.ndarray
    weight: np.ndarray
    m_neighbors: int

    def __post_init__(self):
        if np.any(self.edge_i >= self.edge_j):
            raise ValueError("edges must satisfy i < j (no self-loops)")
        if np.any(self.edge_j >= self.n) or np.any(self.edge_i < 0):
            raise ValueError("edge endpoints out of range")
        if self.weight.size and (self.weight.min() < 0 or self.weight.max() > 1):
            raise ValueError("edge weights must lie in [0, 1]")

    @property
    def num_edges(self) -> int:
        return int(self.edge_i.size)

    def adjacency(self) -> list[dict[int, float]]:
        adj: list[dict[int, float]] = [dict() for _ in range(self.n)]
        for i, j, w in zip(self.edge_i, self.edge_j, self.weight):
            adj[int(i)][int(j)] = float(w)
            adj[int(j)][int(i)] = float(w)
        return adj


@dataclass(frozen=True)
class Partition:
    """Community id per node, dense 0..k-1."""

    labels: np.ndarray
    num_communities: int
    modularity: float | None = None
    edgeless: bool = False

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        distinct = np.unique(labels)
        if distinct.size != self.num_communities or not np.array_equal(
            distinct, np.arange(self.num_communities)
        ):
            raise ValueError("community ids must be dense 0..k-1")
        labels = np.ascontiguousarray(labels)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)


def build_graph(z: np.ndarray, dataset: EmbeddingDataset, m: int) -> SimilarityGraph:
    """Assemble the adjacency over all instances from embeddings and labels.

    Labeled same-class pairs get weight 1. Any other pair (i, j) gets weight
    max(0, cos(z_i, z_j)) when j is in the top-m neighbor list of i or vice
    versa (union symmetrization); zero-weight pairs are dropped. Ties in the
    neighbor ranking break toward the lower index.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n != dataset.n:
        raise ValueError(f"embedding rows {n} != dataset rows {dataset.n}")
    if m < 1:
        raise ValueError("m must be >= 1")
    if m >= n:
        raise ValueError(f"m={m} must be smaller than the instance count {n}")
    sims = z @ z.T
    np.fill_diagonal(sims, -np.inf)
    weights: dict[tuple[int, int], float] = {}
    order_idx = np.arange(n)
    for i in range(n):
        top = np.lexsort((order_idx, -sims[i]))[:m]
        for j in top:
            w = min(max(float(sims[i, j]), 0.0), 1.0)
            if w > 0.0:
                weights[(min(i, int(j)), max(i, int(j)))] = w
    labels = dataset.labels
    for cls in np.unique(labels[labels >= 0]):
        members = np.nonzero(labels == cls)[0]
        for a in range(members.size):
            for b in range(a + 1, members.size):
                weights[(int(members[a]), int(members[b]))] = 1.0
    if weights:
        keys = sorted(weights)
        ei = np.array([k[0] for k in keys], dtype=np.int64)
        ej = np.array([k[1] for k in keys], dtype=np.int64)
        w = np.array([weights[k] for k in keys], dtype=np.float64)
    else:
        ei = np.empty(0, dtype=np.int64)
        ej = np.empty(0, dtype=np.int64)
        w = np.empty(0, dtype=np.float64)
    return SimilarityGraph(n=n, edge_i=ei, edge_j=ej, weight=w, m_neighbors=m)


def dump_edges(graph: SimilarityGraph) -> str:
    """Edge list as `i<TAB>j<TAB>w` lines sorted by (i, j)."""
    lines = [
        f"{int(i)}\t{int(j)}\t{w:.9g}"
        for i, j, w in zip(graph.edge_i, graph.edge_j, graph.weight)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def modularity(graph: SimilarityGraph, partition: Partition) -> float:
    """Weighted Newman modularity of a partition at resolution 1."""
    labels = np.asarray(partition.labels)
    if labels.shape != (graph.n,):
        raise ValueError("partition must cover all nodes")
    w_total = float(graph.weight.sum())
    if w_total == 0.0:
        raise ValueError("modularity undefined for total edge weight 0")
    k = partition.num_communities
    w_in = np.zeros(k)
    degree = np.zeros(graph.n)
    for i, j, w in zip(graph.edge_i, graph.edge_j, graph.weight):
        degree[i] += w
        degree[j] += w
        if labels[i] == labels[j]:
            w_in[labels[i]] += w
    w_deg = np.bincount(labels, weights=degree, minlength=k)
    return float((w_in / w_total - (w_deg / (2.0 * w_total)) ** 2).sum())


def louvain(graph: SimilarityGraph, min_gain: float = 1e-7, seed: int = 0) -> Partition:
    """Two-phase Louvain maximizing weighted modularity at resolution 1.

    Local moves scan nodes in ascending index order and accept the best
    single move when its modularity gain reaches min_gain, breaking ties
    toward the lowest community id; converged levels are aggregated and the
    process repeats until no level improves. The seed is reserved for
    optional node-order shuffling, which is off by default, so runs are fully
    deterministic.
    """
    if not min_gain > 0:
        raise ValueError("min_gain must be positive")
    if graph.num_edges == 0:
        warnings.warn("louvain on an edgeless graph: every node is its own community")
        return Partition(
            labels=np.arange(graph.n),
            num_communities=graph.n,
            modularity=0.0,
            edgeless=True,
        )
    # Level-local state: adjacency dicts, self-loop weights, degrees.
    adj = graph.adjacency()
    self_w = [0.0] * graph.n
    assign = np.arange(graph.n)  # original node -> current supernode
    while True:
        n_level = len(adj)
        degree = [sum(nbrs.values()) + 2.0 * self_w[i] for i, nbrs in enumerate(adj)]
        w_total = sum(degree) / 2.0
        comm = list(range(n_level))
        sigma_tot = degree.copy()
        moved_any = False
        improved = True
        while improved:
            improved = False
            for i in range(n_level):
                ci = comm[i]
                links: dict[int, float] = {}
                for j, w in adj[i].items():
                    links[comm[j]] = links.get(comm[j], 0.0) + w
                deg_i = degree[i]
                sigma_tot[ci] -= deg_i
                gain_back = links.get(ci, 0.0) / w_total - deg_i * sigma_tot[ci] / (
                    2.0 * w_total * w_total
                )
                best_c, best_gain = ci, 0.0
                for c in sorted(links):
                    if c == ci:
                        continue
                    gain = (
                        links[c] / w_total
                        - deg_i * sigma_tot[c] / (2.0 * w_total * w_total)
                        - gain_back
                    )
                    if gain > best_gain:
                        best_c, best_gain = c, gain
                if best_c != ci and best_gain >= min_gain:
                    comm[i] = best_c
                    improved = True
                    moved_any = True
                else:
                    comm[i] = ci
                sigma_tot[comm[i]] += deg_i
        if not moved_any:
            break
        # Aggregate communities into supernodes for the next level.
        old_ids = sorted(set(comm))
        remap = {c: r for r, c in enumerate(old_ids)}
        comm = [remap[c] for c in comm]
        n_next = len(old_ids)
        next_adj: list[dict[int, float]] = [dict() for _ in range(n_next)]
        next_self = [0.0] * n_next
        for i in range(n_level):
            ci = comm[i]
            next_self[ci] += self_w[i]
            for j, w in adj[i].items():
                cj = comm[j]
                if ci == cj:
                    next_self[ci] += 0.5 * w  # each intra edge seen from both ends
                elif ci < cj:
                    next_adj[ci][cj] = next_adj[ci].get(cj, 0.0) + w
                    next_adj[cj][ci] = next_adj[cj].get(ci, 0.0) + w
        assign = np.array([comm[a] for a in assign], dtype=np.int64)
        adj, self_w = next_adj, next_self
        if len(adj) == 1:
            break
    # Dense relabel by first appearance in node order.
    remap2: dict[int, int] = {}
    final = np.empty(graph.n, dtype=np.int64)
    for v in range(graph.n):
        c = int(assign[v])
        if c not in remap2:
            remap2[c] = len(remap2)
        final[v] = remap2[c]
    part = Partition(labels=final, num_communities=len(remap2))
    return Partition(
        labels=final, num_communities=len(remap2), modularity=modularity(graph, part)
    )
