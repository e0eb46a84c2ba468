"""Sum-of-the-parts combinatorial optimization with objective decomposition.

Splits TSP/UBQP unit costs into two correlated sub-objectives and uses the
induced dominance structure to escape local optima inside iterated local
search, iterated tabu search and iterated Lin-Kernighan drivers.
"""

from .bench import CampaignSpec, ExcessSummary, excess, rank_sum_test, run_campaign
from .decomposition import (
    SplitCosts,
    SplitParams,
    half_split,
    inverse_cdf_sample,
    measure_rho,
    pdf_shape,
    sample_split,
    split_from_json,
    split_to_json,
    sweep_a,
)
from .escape import (
    ObjectivePair,
    PenaltyConfig,
    add_random_penalty,
    dominates,
    ens,
    further_exploit,
    nds,
    non_dominated,
)
from .instances import (
    BitVector,
    NeighborList,
    QuboInstance,
    Tour,
    TspInstance,
    build_neighbor_lists,
    flip_delta_and_update,
    load_bundled_tsp,
    make_bitvector,
    make_tour,
    parse_orlib_bqp,
    parse_tsplib,
    random_qubo_instance,
    random_tsp_instance,
    tour_cost,
    two_opt_delta,
)
from .landscape import (
    NeighborStats,
    aggregate_stats,
    classify_neighbors,
    collect_local_optima,
    expected_fe_nds,
    expected_fe_plain,
)
from .metaheuristics import RunTrace, SolverConfig, run
from .search import (
    Budget,
    double_bridge,
    lk_search,
    local_search_1flip,
    local_search_2opt,
    random_flip_perturbation,
    tabu_search,
)

__version__ = "0.1.0"
