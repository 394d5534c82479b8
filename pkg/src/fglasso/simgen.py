"""Reproducible generators for the three simulation setups.

All three produce n replications of p jointly Gaussian random curves on a
shared size-K midpoint grid t_k = (k - 1/2)/K and the analytic truth graph:

  setup 1: scores over the first 10 Fourier functions drawn from a banded
           precision matrix (an order-2 autoregression across nodes);
  setup 2: an order-2 functional autoregression whose transfer operators
           restrict to the first/last tenth of the domain;
  setup 3: a common rough fractional-Brownian component shared within node
           triplets, plus independent smooth signal and white noise.

Every generator is a pure function of its config: same config, bitwise-same
samples.  Dense covariance/precision matrices are validated symmetric PSD
and factorized through their eigendecomposition (eigenvalues floored at
zero), never by Cholesky, so semi-definite kernels are handled as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockmat import BlockLayout, NotPositiveDefinite
from .estimate import SampleSet
from .graph import GraphEstimate, band_graph, triplet_cliques

__all__ = [
    "InvalidConfig",
    "SimConfig",
    "SimDraw",
    "midpoint_grid",
    "fourier_basis",
    "setup1_precision",
    "simulate_setup1",
    "simulate_setup2",
    "fbm_covariance",
    "setup3_covariances",
    "simulate_setup3",
    "simulate",
]

HURST = 0.2  # roughness of the shared component in setup 3
SETUP1_RANK = 10


class InvalidConfig(ValueError):
    """Simulation config violates a setup's requirements."""


@dataclass(frozen=True)
class SimConfig:
    """Which setup to draw, at what size, from which seed.

    noise_sd overrides setup 3's calibrated measurement-noise standard
    deviation; leave None to keep the 3:1:2 smooth/rough/noise variance
    proportions.
    """

    setup: int
    n: int
    p: int
    K: int
    seed: int
    noise_sd: float | None = None

    def __post_init__(self):
        if self.setup not in (1, 2, 3):
            raise InvalidConfig(f"setup must be 1, 2, or 3, got {self.setup}")
        if self.n < 1:
            raise InvalidConfig("n must be >= 1")
        if self.K < 2:
            raise InvalidConfig("K must be >= 2")
        if self.p < 1:
            raise InvalidConfig("p must be >= 1")
        if self.setup == 1 and self.p < 3:
            raise InvalidConfig("setup 1 needs p >= 3")
        if self.setup == 1 and self.K < 10:
            raise InvalidConfig("setup 1 needs K >= 10 (rank-10 score expansion)")
        if self.setup == 3 and self.p % 3 != 0:
            raise InvalidConfig("setup 3 needs p divisible by 3")
        if self.noise_sd is not None and self.noise_sd < 0:
            raise InvalidConfig("noise_sd must be >= 0")


@dataclass(frozen=True)
class SimDraw:
    samples: SampleSet
    truth: GraphEstimate


def midpoint_grid(K):
    """Equidistant cell midpoints (k - 1/2)/K, k = 1..K; avoids t = 0."""
    return (np.arange(K) + 0.5) / K


def fourier_basis(K, r):
    """First r orthonormal Fourier functions on [0,1] sampled on the midpoint grid.

    Row 0 is the constant 1; rows 2m-1 and 2m are sqrt(2) sin(2 pi m t) and
    sqrt(2) cos(2 pi m t).  The grid Gram (1/K) E E^T is the identity up to
    quadrature error (exact while 2m < K on the midpoint grid).
    """
    if r < 1 or K < 2:
        raise ValueError("need r >= 1 and K >= 2")
    t = midpoint_grid(K)
    E = np.empty((r, K))
    E[0] = 1.0
    for row in range(1, r):
        m = (row + 1) // 2
        phase = 2.0 * np.pi * m * t
        E[row] = np.sqrt(2.0) * (np.sin(phase) if row % 2 == 1 else np.cos(phase))
    return E


def setup1_precision(p):
    """Banded score precision for setup 1 plus its truth graph.

    Per node, ten scores with marginal precisions diag(1..10)/10; nodes
    couple at lags one and two through 0.4 and 0.2 times
    diag(0,0,0,0,0,6,...,10)/10, zero beyond lag two — an order-2
    autoregression across nodes, so the truth is the width-2 band graph.
    """
    if p < 3:
        raise InvalidConfig("setup 1 needs p >= 3")
    base = np.diag(np.arange(1, SETUP1_RANK + 1) / 10.0)
    tail = np.diag(np.concatenate([np.zeros(5), np.arange(6, SETUP1_RANK + 1) / 10.0]))
    idx = np.arange(p)
    lag = np.abs(idx[:, None] - idx[None, :])
    Q = (
        np.kron((lag == 0).astype(float), base)
        + np.kron((lag == 1).astype(float), 0.4 * tail)
        + np.kron((lag == 2).astype(float), 0.2 * tail)
    )
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise NotPositiveDefinite("assembled score precision is not positive definite")
    return Q, band_graph(p, 2)


def _psd_factor(S, name):
    """Validate symmetric PSD (within round-off) and return F with F F^T = S.

    Eigendecomposition-based on purpose: semi-definite inputs factor cleanly
    after flooring tiny negative eigenvalues at zero.
    """
    S = 0.5 * (S + np.asarray(S).T)
    mu, V = np.linalg.eigh(S)
    scale = max(abs(float(mu[0])), abs(float(mu[-1])), 1e-300)
    if mu[0] < -1e-8 * scale:
        raise NotPositiveDefinite(f"{name} is not positive semi-definite")
    return V * np.sqrt(np.maximum(mu, 0.0))


def _to_sampleset(X, p, K):
    # (n, p, K) -> SampleSet over the uniform points layout
    n = X.shape[0]
    layout = BlockLayout.uniform(p, K, "points")
    return SampleSet(layout, np.ascontiguousarray(X.reshape(n, p * K)))


def simulate_setup1(config):
    """Jointly Gaussian Fourier scores from the banded precision, mapped to the grid."""
    if config.setup != 1:
        raise InvalidConfig("config.setup must be 1")
    n, p, K = config.n, config.p, config.K
    Qmat, truth = setup1_precision(p)
    mu, V = np.linalg.eigh(Qmat)
    # covariance factor for C = Q^{-1}: F F^T = V diag(1/mu) V^T
    F = V / np.sqrt(mu)
    rng = np.random.default_rng(config.seed)
    scores = rng.standard_normal((n, p * SETUP1_RANK)) @ F.T
    E = fourier_basis(K, SETUP1_RANK)
    X = scores.reshape(n, p, SETUP1_RANK) @ E
    return SimDraw(_to_sampleset(X, p, K), truth)


def simulate_setup2(config):
    """Order-2 functional autoregression with boundary-restricted transfers.

    Innovations are Gaussian with Fourier eigenfunctions and eigenvalues
    1/l^2, truncated at the last eigenvalue >= 1e-6 or at K terms, whichever
    bites first (a documented deviation from the infinite expansion; the
    tail is far below sampling noise).  The transfer operators multiply by
    the indicators of [0, 1/10] and [9/10, 1].
    """
    if config.setup != 2:
        raise InvalidConfig("config.setup must be 2")
    n, p, K = config.n, config.p, config.K
    rank = min(K, 1000)  # 1/l^2 >= 1e-6 iff l <= 1000
    ell = np.arange(1, rank + 1)
    B = fourier_basis(K, rank) / ell[:, None]
    rng = np.random.default_rng(config.seed)
    Z = rng.standard_normal((n, p, rank)) @ B

    t = midpoint_grid(K)
    first_tenth = (t <= 0.1).astype(float)
    last_tenth = (t >= 0.9).astype(float)
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    if p > 1:
        X[:, 1] = 0.4 * first_tenth * X[:, 0] + Z[:, 1]
    for j in range(2, p):
        X[:, j] = 0.4 * first_tenth * X[:, j - 1] + 0.2 * last_tenth * X[:, j - 2] + Z[:, j]
    return SimDraw(_to_sampleset(X, p, K), band_graph(p, 2))


def fbm_covariance(grid, H):
    """Fractional-Brownian-motion kernel k(t,s) = (|t|^{2H}+|s|^{2H}-|t-s|^{2H})/2 on a grid."""
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or np.any(t <= 0) or np.any(t > 1) or len(np.unique(t)) != t.size:
        raise ValueError("grid must be distinct points in (0, 1]")
    if not (0.0 < H < 1.0):
        raise ValueError("H must lie in (0, 1)")
    pw = t ** (2.0 * H)
    return 0.5 * (pw[:, None] + pw[None, :] - np.abs(t[:, None] - t[None, :]) ** (2.0 * H))


def _setup3_scales(K, noise_sd):
    # The common rough component W sets the scale: w_bar is the grid average
    # of its variance function t^{2H}.  The five equal eigenvalues of the
    # smooth component and the noise variance are tied to it so that the
    # grid-averaged variances of 3Z, W, and noise sit in proportion 3:1:2.
    SW = fbm_covariance(midpoint_grid(K), HURST)
    w_bar = float(np.mean(np.diag(SW)))
    v = w_bar / 15.0
    noise_var = 2.0 * w_bar if noise_sd is None else float(noise_sd) ** 2
    return SW, v, noise_var


def setup3_covariances(K, noise_sd=None):
    """Population covariances of setup 3's three summands on the size-K grid.

    Returns (smooth, rough, noise_var): the K-by-K covariance of the smooth
    part 3 Z_j, the K-by-K covariance of the shared rough part W, and the
    white-noise variance.  Their grid-averaged traces sit in proportion
    3:1:2 (exactly, by calibration) unless noise_sd overrides the noise.
    """
    SW, v, noise_var = _setup3_scales(K, noise_sd)
    E5 = fourier_basis(K, 5)
    return 9.0 * v * (E5.T @ E5), SW, noise_var


def simulate_setup3(config):
    """Smooth signal + triplet-shared rough component + white noise.

    X_j = 3 Z_j + W_j + noise, with Z_j rank-5 Fourier (five equal
    eigenvalues), W identical across each node triplet {3k-2, 3k-1, 3k}
    (fractional Brownian motion, H = 0.2), and i.i.d. Gaussian measurement
    noise.  The truth graph is the union of the triplet cliques.
    """
    if config.setup != 3:
        raise InvalidConfig("config.setup must be 3")
    n, p, K = config.n, config.p, config.K
    SW, v, noise_var = _setup3_scales(K, config.noise_sd)
    FW = _psd_factor(SW, "fractional Brownian covariance")
    E5 = fourier_basis(K, 5)

    rng = np.random.default_rng(config.seed)
    Z = rng.standard_normal((n, p, 5)) @ (np.sqrt(v) * E5)
    W_shared = rng.standard_normal((n, p // 3, K)) @ FW.T
    W = np.repeat(W_shared, 3, axis=1)  # bitwise-identical within each triplet
    noise = np.sqrt(noise_var) * rng.standard_normal((n, p, K))
    X = 3.0 * Z + W + noise
    return SimDraw(_to_sampleset(X, p, K), triplet_cliques(p))


def simulate(config):
    """Dispatch to the setup named in the config."""
    return {1: simulate_setup1, 2: simulate_setup2, 3: simulate_setup3}[config.setup](config)
