"""Block-structured dense matrix algebra over a joint discretization grid.

A collection of p random functions discretized on per-node grids lives on a
joint index set of size K = sum(K_i).  BlockLayout records the partition,
MassMatrix the quadrature weights that make discrete matrix algebra mimic
operator algebra, and BlockMatrix a dense K-by-K array tagged with its
layout.  On top of these sit the block-wise group norms, the block-diagonal
mask, and the renormalized (Carleman-Fredholm) log-determinant that the
penalized estimation problem is built from.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SCHEMES",
    "NotPositiveDefinite",
    "BlockLayout",
    "MassMatrix",
    "BlockMatrix",
    "mass_matrix",
    "unit_mass",
    "diag_mask",
    "block_frob_norms",
    "block_norm_21",
    "block_norm_2inf",
    "cf_logdet",
]

# How a node's K_i numbers are to be read: values at grid points, cell
# averages (both quadrature-weighted by 1/K_i), or coefficients in an
# orthonormal basis (weight 1).
SCHEMES = ("points", "cells", "basis")


class NotPositiveDefinite(ValueError):
    """A matrix that must be (strictly) positive definite is not."""


@dataclass(frozen=True)
class BlockLayout:
    """Partition of the joint index set [0, K) into p contiguous node blocks."""

    sizes: tuple
    schemes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        schemes = tuple(str(s) for s in self.schemes)
        if len(sizes) == 0:
            raise ValueError("layout needs at least one node")
        if len(schemes) != len(sizes):
            raise ValueError("one scheme per node required")
        if any(s < 1 for s in sizes):
            raise ValueError("all block sizes must be >= 1")
        unknown = set(schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown scheme(s) {sorted(unknown)}; choose from {SCHEMES}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "schemes", schemes)

    @classmethod
    def uniform(cls, p, size, scheme="points"):
        """Layout with p nodes sharing one grid size and scheme."""
        return cls((size,) * p, (scheme,) * p)

    @property
    def p(self):
        return len(self.sizes)

    @property
    def K(self):
        return int(sum(self.sizes))

    @cached_property
    def offsets(self):
        """Prefix sums: block i occupies [offsets[i], offsets[i+1])."""
        off = np.zeros(self.p + 1, dtype=np.intp)
        np.cumsum(self.sizes, out=off[1:])
        off.setflags(write=False)
        return off

    def block_slice(self, i):
        off = self.offsets
        return slice(int(off[i]), int(off[i + 1]))


@dataclass(frozen=True)
class MassMatrix:
    """Diagonal quadrature-weight matrix, stored as its length-K diagonal."""

    layout: BlockLayout
    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float))
        if w.shape != (self.layout.K,):
            raise ValueError(f"weights must have shape ({self.layout.K},)")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @cached_property
    def sqrt_weights(self):
        rw = np.sqrt(self.weights)
        rw.setflags(write=False)
        return rw

    @cached_property
    def node_weights(self):
        """One weight per node (weights are constant within each block)."""
        nw = self.weights[self.layout.offsets[:-1]]
        nw.setflags(write=False)
        return nw


@dataclass(frozen=True)
class BlockMatrix:
    """Dense K-by-K matrix tagged with its block layout.

    With ``symmetric=True`` the entries are symmetrized as (A + A.T)/2 on
    construction, absorbing accumulate-and-round drift.  Entries are frozen
    (read-only) after construction; block views inherit the read-only flag.
    """

    layout: BlockLayout
    entries: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        ent = np.array(self.entries, dtype=float, copy=True)
        K = self.layout.K
        if ent.shape != (K, K):
            raise ValueError(f"entries must have shape ({K}, {K}), got {ent.shape}")
        if self.symmetric:
            ent = 0.5 * (ent + ent.T)
        ent = np.ascontiguousarray(ent)
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)

    def block(self, i, j):
        """Read-only view of block (i, j); no copy."""
        return self.entries[self.layout.block_slice(i), self.layout.block_slice(j)]

    def with_entries(self, entries, symmetric=None):
        """New matrix over the same layout."""
        if symmetric is None:
            symmetric = self.symmetric
        return BlockMatrix(self.layout, entries, symmetric)


def mass_matrix(layout):
    """Quadrature weights for a layout: 1/K_i for points/cells nodes, 1 for basis."""
    per_node = [1.0 if sch == "basis" else 1.0 / size
                for size, sch in zip(layout.sizes, layout.schemes)]
    return MassMatrix(layout, np.repeat(per_node, layout.sizes))


def unit_mass(layout):
    """All-ones weights: block norms reduce to plain Frobenius norms."""
    return MassMatrix(layout, np.ones(layout.K))


def diag_mask(A):
    """Keep only the diagonal blocks of A (entries sharing a node), zero the rest."""
    out = np.zeros_like(A.entries)
    for i in range(A.layout.p):
        s = A.layout.block_slice(i)
        out[s, s] = A.entries[s, s]
    return A.with_entries(out)


def _as_entries(A, layout):
    if isinstance(A, BlockMatrix):
        return A.entries, A.layout
    if layout is None:
        raise ValueError("a layout is required when passing a raw array")
    return np.asarray(A, dtype=float), layout


def block_frob_norms(A, layout=None):
    """p-by-p array of per-block Frobenius norms (unweighted).

    Accepts a BlockMatrix, or a raw (K, K) array plus a layout.  This is the
    workhorse behind the group norms and the solver's thresholding step, so
    it is vectorized: per-block sums of squares via two reduceat passes.
    """
    ent, layout = _as_entries(A, layout)
    starts = layout.offsets[:-1]
    sq = ent * ent
    rowsum = np.add.reduceat(sq, starts, axis=0)
    blocksum = np.add.reduceat(rowsum, starts, axis=1)
    return np.sqrt(blocksum)


def _weight_scale(M):
    # sqrt(w_i * w_j) per block pair: Frobenius norm of the M^{1/2}-weighted
    # block equals this times the plain block norm (weights are constant
    # within a block).
    nw = M.node_weights
    return np.sqrt(np.outer(nw, nw))


def block_norm_21(A, M, off_diagonal_only=False):
    """Sum over block pairs (i, j) of ||(M^{1/2} A M^{1/2})_ij||_F.

    Both ordered off-diagonal pairs are counted, so a symmetric matrix's
    off-diagonal penalty weighs each unordered edge twice.
    """
    norms = _weight_scale(M) * block_frob_norms(A, M.layout)
    total = float(np.sum(norms))
    if off_diagonal_only:
        total -= float(np.trace(norms))
    return total


def block_norm_2inf(A, M, off_diagonal_only=False):
    """Max over block pairs (i, j) of ||(M^{1/2} A M^{1/2})_ij||_F."""
    norms = _weight_scale(M) * block_frob_norms(A, M.layout)
    if off_diagonal_only:
        norms = norms.copy()
        np.fill_diagonal(norms, 0.0)
    return float(np.max(norms))


def cf_logdet(A, M):
    """Renormalized log-determinant log det2(I + A) = sum_j log(1+mu_j) - mu_j.

    The mu_j are the eigenvalues of the symmetric matrix M^{1/2} A M^{1/2}
    (same spectrum as MA, but a stable symmetric eigenproblem — never the
    non-symmetric product, never a cofactor expansion).  The value is <= 0
    for every admissible symmetric A, with equality iff the weighted matrix
    vanishes.

    Raises NotPositiveDefinite when any 1 + mu_j <= 0; callers that want the
    extended-value convention (-inf) should catch it.
    """
    ent, _ = _as_entries(A, M.layout)
    rw = M.sqrt_weights
    S = rw[:, None] * ent * rw[None, :]
    mu = np.linalg.eigvalsh(S)
    if mu[0] <= -1.0:
        raise NotPositiveDefinite("I + A has a nonpositive eigenvalue in weighted coordinates")
    return float(np.sum(np.log1p(mu) - mu))
