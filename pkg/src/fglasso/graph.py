"""Graph extraction from solver output and recovery evaluation (ROC/AUC).

Edges are read off the exact-zero pattern of the solver's sparse variable Z
— never off Q, whose blocks are only approximately zero — so no threshold
parameter exists anywhere in the pipeline.  Evaluation counts unordered
off-diagonal pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockmat import block_frob_norms

__all__ = [
    "DimensionMismatch",
    "GraphEstimate",
    "RocPoint",
    "band_graph",
    "triplet_cliques",
    "edge_list",
    "from_edge_list",
    "extract_graph",
    "compare",
    "roc_curve",
    "roc_from_graphs",
]


class DimensionMismatch(ValueError):
    """Graphs over different node counts cannot be compared."""


@dataclass(frozen=True)
class GraphEstimate:
    """Undirected graph as a symmetric boolean adjacency with true diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        adj = adj | adj.T
        np.fill_diagonal(adj, True)  # every vertex adjacent to itself
        adj = np.ascontiguousarray(adj)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def p(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        iu = np.triu_indices(self.p, k=1)
        return int(np.count_nonzero(self.adjacency[iu]))


@dataclass(frozen=True)
class RocPoint:
    lam: float
    tpr: float
    fpr: float
    edges: int

    def __post_init__(self):
        if not (0.0 <= self.tpr <= 1.0 and 0.0 <= self.fpr <= 1.0):
            raise ValueError("tpr and fpr must lie in [0, 1]")


def band_graph(p, width):
    """Graph with edge (i, j) iff |i - j| <= width."""
    idx = np.arange(p)
    return GraphEstimate(np.abs(idx[:, None] - idx[None, :]) <= width)


def triplet_cliques(p):
    """Cliques over consecutive node triplets {3k+1, 3k+2, 3k+3} (1-based)."""
    if p % 3 != 0:
        raise ValueError("p must be divisible by 3")
    group = np.arange(p) // 3
    return GraphEstimate(group[:, None] == group[None, :])


def edge_list(graph):
    """Unordered edges as 1-based (i, j) pairs with i < j, sorted."""
    iu = np.triu_indices(graph.p, k=1)
    present = graph.adjacency[iu]
    return sorted(zip((iu[0][present] + 1).tolist(), (iu[1][present] + 1).tolist()))


def from_edge_list(p, pairs):
    """Inverse of edge_list: build a graph from 1-based (i, j) pairs."""
    adj = np.zeros((p, p), dtype=bool)
    for i, j in pairs:
        if not (1 <= i <= p and 1 <= j <= p) or i == j:
            raise ValueError(f"bad edge ({i}, {j}) for p={p}")
        adj[i - 1, j - 1] = True
    return GraphEstimate(adj)


def extract_graph(solution, layout):
    """Edge (i, j) present iff block Z_ij is not exactly zero."""
    znorm = block_frob_norms(solution.Z.entries, layout)
    return GraphEstimate(znorm > 0)


def compare(est, truth):
    """(tpr, fpr) of est against truth over unordered off-diagonal pairs.

    Degenerate truths (no edges / no non-edges) score the undefined rate as
    vacuously perfect: tpr = 1 with no true edges, fpr = 0 with no true
    non-edges.  The shipped simulation truths never hit these branches.
    """
    if est.p != truth.p:
        raise DimensionMismatch(f"p mismatch: {est.p} vs {truth.p}")
    iu = np.triu_indices(truth.p, k=1)
    e = est.adjacency[iu]
    t = truth.adjacency[iu]
    n_true = int(np.count_nonzero(t))
    n_false = t.size - n_true
    tpr = float(np.count_nonzero(e & t)) / n_true if n_true else 1.0
    fpr = float(np.count_nonzero(e & ~t)) / n_false if n_false else 0.0
    return tpr, fpr


def _staircase_auc(fprs, tprs):
    # Trapezoid rule over the monotone upper envelope in FPR order, with the
    # trivial endpoints appended.
    f = np.concatenate([[0.0], np.asarray(fprs, dtype=float), [1.0]])
    t = np.concatenate([[0.0], np.asarray(tprs, dtype=float), [1.0]])
    order = np.lexsort((t, f))
    f, t = f[order], t[order]
    t = np.maximum.accumulate(t)
    return float(np.trapezoid(t, f))


def roc_from_graphs(lams, graphs, truth):
    """ROC points and AUC from per-penalty graphs against a truth graph."""
    points = []
    for lam, g in zip(lams, graphs):
        tpr, fpr = compare(g, truth)
        points.append(RocPoint(lam=float(lam), tpr=tpr, fpr=fpr, edges=g.n_edges))
    auc = _staircase_auc([pt.fpr for pt in points], [pt.tpr for pt in points])
    return points, auc


def roc_curve(solutions, truth):
    """ROC points (one per path solution, in path order) plus staircase AUC."""
    if len(solutions) == 0:
        raise ValueError("empty solution path")
    layout = solutions[0].Z.layout
    lams = [sol.config.lam for sol in solutions]
    graphs = [extract_graph(sol, layout) for sol in solutions]
    return roc_from_graphs(lams, graphs, truth)
