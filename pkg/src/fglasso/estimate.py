"""Covariance plug-in and Step 1: the regularized correlation operator matrix.

Given discretized samples, estimate the joint covariance C, then standardize
each off-diagonal block by ridge-regularized inverse square roots of the
diagonal blocks:

    R = I + [eps I + dg(C)]^{-1/2} (C - dg(C)) [eps I + dg(C)]^{-1/2}

with all the algebra carried out in quadrature-weighted coordinates so the
result approximates the correlation of the underlying operators rather than
of raw grid vectors.  The covariance estimator is a plug-in: downstream code
consumes any symmetric BlockMatrix, so smoothed or shrunk alternatives can
be substituted freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockmat import BlockLayout, BlockMatrix, mass_matrix

__all__ = [
    "InsufficientSamples",
    "SingularDiagonal",
    "SampleSet",
    "CorrelationEstimate",
    "empirical_covariance",
    "regularized_correlation",
    "default_epsilon",
    "solver_correlation",
]


class InsufficientSamples(ValueError):
    """Fewer replications than the operation requires."""


class SingularDiagonal(ValueError):
    """A diagonal covariance block is singular and epsilon = 0."""


@dataclass(frozen=True)
class SampleSet:
    """n replications of the joint curve vector, one row per replication."""

    layout: BlockLayout
    data: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.data, dtype=float))
        if X.ndim != 2 or X.shape[1] != self.layout.K:
            raise ValueError(f"data must be (n, {self.layout.K}), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("data contains non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "data", X)

    @property
    def n(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class CorrelationEstimate:
    """Regularized correlation matrix R (identity diagonal blocks) plus the ridge used."""

    R: BlockMatrix
    epsilon: float

    @property
    def layout(self):
        return self.R.layout


def empirical_covariance(samples):
    """Biased (1/n) empirical covariance of the stacked curve vectors.

    C = (1/n) sum_k X_k X_k^T - Xbar Xbar^T, evaluated in centered form.
    """
    if samples.n < 2:
        raise InsufficientSamples(f"need n >= 2 replications, got {samples.n}")
    X = samples.data
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / samples.n
    return BlockMatrix(samples.layout, C, symmetric=True)


def _diag_inv_sqrts(C, mass, epsilon):
    """Per-node inverse square roots of eps I + (M^{1/2} C M^{1/2})_ii.

    Never forms a full K-by-K root: the target is block diagonal.  Tiny
    negative eigenvalues from round-off are floored at zero before the
    ridge is added.
    """
    layout = C.layout
    nw = mass.node_weights
    roots = []
    for i in range(layout.p):
        S = nw[i] * C.block(i, i)
        mu, V = np.linalg.eigh(S)
        mu = np.maximum(mu, 0.0)
        if epsilon == 0.0 and mu[0] <= 1e-12 * max(mu[-1], 1.0):
            raise SingularDiagonal(
                f"diagonal block {i} is singular; a positive epsilon is required"
            )
        roots.append((V / np.sqrt(mu + epsilon)) @ V.T)
    return roots


def regularized_correlation(C, epsilon):
    """Step 1: standardize off-diagonal covariance blocks into correlations.

    Returns the estimate R = I + R0 where block (i, j), i != j, is

        R0_ij = [eps I + w_i C_ii]^{-1/2} C_ij [eps I + w_j C_jj]^{-1/2}

    with w the quadrature weights of C's layout; diagonal blocks of R0 are
    exactly zero by construction.  At epsilon = 0 the output is invariant
    to separate positive rescalings of the nodes.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    layout = C.layout
    mass = mass_matrix(layout)
    roots = _diag_inv_sqrts(C, mass, float(epsilon))

    C0 = C.entries.copy()
    for i in range(layout.p):
        s = layout.block_slice(i)
        C0[s, s] = 0.0
    # R0 = blockdiag(roots) @ C0 @ blockdiag(roots), done block-row/column-wise
    R0 = np.empty_like(C0)
    for i in range(layout.p):
        s = layout.block_slice(i)
        R0[s, :] = roots[i] @ C0[s, :]
    for j in range(layout.p):
        s = layout.block_slice(j)
        R0[:, s] = R0[:, s] @ roots[j]
    for i in range(layout.p):  # keep the zero diagonal blocks exact
        s = layout.block_slice(i)
        R0[s, s] = 0.0
    R = BlockMatrix(layout, R0 + np.eye(layout.K), symmetric=True)
    return CorrelationEstimate(R=R, epsilon=float(epsilon))


def default_epsilon(C, n):
    """Default ridge: mean weighted variance times (log p / n)^{1/4}.

    A documented stand-in consistent with the theoretical rate and
    scale-equivariant in C; override it whenever you have a better rule.
    """
    if n < 2:
        raise InsufficientSamples(f"need n >= 2, got {n}")
    mass = mass_matrix(C.layout)
    s_bar = float(np.mean(mass.weights * np.diag(C.entries)))
    return s_bar * (np.log(C.layout.p) / n) ** 0.25


def solver_correlation(est):
    """Rescale a correlation estimate into the solver's weighted coordinates.

    The optimization runs on R_w = I + M^{1/2} (R - I) M^{1/2}; its diagonal
    blocks stay exactly the identity.  For basis-scheme layouts (unit
    weights) this is the identity map.
    """
    mass = mass_matrix(est.layout)
    rw = mass.sqrt_weights
    R0 = est.R.entries - np.eye(est.layout.K)
    ent = rw[:, None] * R0 * rw[None, :] + np.eye(est.layout.K)
    return BlockMatrix(est.layout, ent, symmetric=True)
