"""Lower bounds on the decay rate of SIS epidemics on directed networks.

The first-order bound comes from the mean-field matrix ``BA - D``; the
second-order bound from an ``n^2 x n^2`` moment-closure matrix over node
marginals and susceptible/infected pair probabilities. Both are checked
against the exact ``2^n``-state Markov chain and Gillespie simulation.
"""

from .bounds import (
    BoundsReport,
    ProofMatrices,
    SecondOrder,
    SisParams,
    build_first_order,
    build_gpp,
    build_proof_matrices,
    build_second_order,
    compute_bounds,
    propagate_bound,
    q_index,
    rho1,
    rho2,
    verify_L_sandwich,
)
from .errors import ConvergenceError, ResourceGuardError
from .exact import build_sub_generator, exact_decay_rate, exact_marginals
from .graph import (
    DiGraph,
    GraphGenSpec,
    gen_random,
    is_strongly_connected,
    parse_edge_list,
    read_edge_list,
    restrict_to_largest_scc,
    write_edge_list,
)
from .simulator import DecayEstimate, SimConfig, Trajectory, estimate_decay, run_ensemble, run_single_path
from .spectral import EigResult, SparseMetzler, expm_action, lambda_max, pattern_is_irreducible

__version__ = "0.1.0"
