"""Sparse Bayesian identification of ARX/NARX networks from time series."""

from .errors import (
    ArxnetError,
    DegenerateTruth,
    DimensionMismatch,
    EmptyDictionary,
    GenerationBudgetExceeded,
    InsufficientData,
    MaxIterationsExceeded,
    SingularSystem,
)
from .extract import NetworkEstimate, extract_network
from .metrics import CurveScore, TopologyScore, nrmse, rank_curves, score_topology
from .model import (
    ArxNetwork,
    TimeSeriesData,
    Topology,
    companion_matrix,
    gen_random_network,
    gen_ring_network,
    gen_stable_poly,
    is_stable,
    noise_var_for_snr,
    repressilator_truth_topology,
    simulate,
    simulate_repressilator,
    spectral_radius,
)
from .posterior import CccpWeights, PosteriorMoments, cccp_weights, marginal_nll, posterior_moments, type2_cost
from .priors import Hyperparameters, PriorMode, init_hyperparameters
from .regression import (
    BasisDictionary,
    BasisFunction,
    GroupStructure,
    RegressionProblem,
    build_arx_regression,
    build_narx_regression,
    hill_dictionary,
    mm_dictionary,
    true_arx_weight_vector,
)
from .sgl import AdmmState, InnerSolver, admm_step, solve_inner_sgl
from .solvers import (
    InferenceResult,
    SolverOptions,
    cccp_solve,
    em_solve,
    estimate_noise_high_order,
    solve_node,
)

__all__ = [name for name in dir() if not name.startswith("_")]
