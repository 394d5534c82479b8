"""Conditional-independence graphs for jointly observed random functions.

The pipeline: discretize curves on per-node grids, estimate a regularized
correlation operator matrix (estimate), minimize a group-penalized
log-determinant objective by ADMM (solver), and read the graph off the
sparsity pattern (graph).  simgen provides the reproducible simulation
setups used in the experiments; cli wires everything to files.
"""

from .blockmat import (
    SCHEMES,
    BlockLayout,
    BlockMatrix,
    MassMatrix,
    NotPositiveDefinite,
    block_frob_norms,
    block_norm_21,
    block_norm_2inf,
    cf_logdet,
    diag_mask,
    mass_matrix,
    unit_mass,
)
from .estimate import (
    CorrelationEstimate,
    InsufficientSamples,
    SampleSet,
    SingularDiagonal,
    default_epsilon,
    empirical_covariance,
    regularized_correlation,
    solver_correlation,
)
from .solver import (
    AdmmSolution,
    InvalidInput,
    SolverConfig,
    admm_solve,
    default_lambda_grid,
    dual_feasibility_gap,
    group_soft_threshold,
    kkt_residual,
    lambda_path,
    objective,
    q_update,
)
from .graph import (
    DimensionMismatch,
    GraphEstimate,
    RocPoint,
    band_graph,
    compare,
    edge_list,
    extract_graph,
    from_edge_list,
    roc_curve,
    roc_from_graphs,
    triplet_cliques,
)
from .simgen import (
    InvalidConfig,
    SimConfig,
    SimDraw,
    fbm_covariance,
    fourier_basis,
    midpoint_grid,
    setup1_precision,
    setup3_covariances,
    simulate,
    simulate_setup1,
    simulate_setup2,
    simulate_setup3,
)

__version__ = "0.1.0"
