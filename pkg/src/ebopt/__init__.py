"""Bipartite Euclidean combinatorial optimization toolkit.

Solvers and Monte-Carlo experiments for minimum-cost structures (matching,
alternating TSP, kappa-factors, degree-bounded spanning trees) over pairs of
random point families, with the discrete transport and partition machinery
needed to check scaling laws and subadditivity numerically.
"""

from .combinatorial import (
    BIPARTITE_TSP,
    BipartiteInstance,
    MATCHING,
    ProblemKind,
    Solution,
    capelli_construct,
    connected_kfactor,
    cost,
    glue,
    is_feasible,
    kbounded_mst,
    kfactor,
)
from .geometry import (
    Box,
    Cube,
    InvalidDomainError,
    Partition,
    Polycube,
    grid_partition,
    partition_sum,
    whitney_partition,
)
from .sampling import (
    HolderDensity,
    SeededRng,
    UniformDensity,
    iid_sample,
    poisson_process,
    thin,
)
from .solvers import (
    SizeLimitError,
    SolveReport,
    brute_force,
    hilbert_order,
    solve_bipartite_tsp_exact,
    solve_heuristic,
    solve_kfactor_exact,
    solve_matching_exact,
    solve_mono_tsp,
)
from .transport import (
    AtomMeasure,
    TransportPlan,
    min_cost_transport,
    subadditivity_decompose,
    wasserstein_pp,
    wasserstein_to_uniform,
)

__version__ = "0.1.0"
