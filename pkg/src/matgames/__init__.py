"""Matrix games under oracle access: solvers, resisting-oracle lower bounds and their certificates."""
from .adversaries import (
    AdvGeometry,
    AdvParams,
    Certificate,
    DimensionExhausted,
    InstanceTooSmall,
    OneSidedAdversary,
    TwoSidedAdversary,
    certify,
    make_params,
)
from .core import (
    DegenerateDirection,
    DimensionMismatch,
    GameInstance,
    Geometry,
    InfeasibleInput,
    LowRankFactors,
    NormContract,
    OrthoBasis,
    basis_insert,
    lowrank_matvec,
    lowrank_vecmat,
    min_payoff,
    project_complement,
    tridiag_psd_margin,
    unit_complement,
)
from .harness import ExperimentConfig, Mode, RunSummary, psd_scan, run_lower_bound, run_upper_rate, stat_test_projected_gaussian
from .oracles import DenseOracle, OracleKind, Query, Response, Transcript, drive_interaction, replay_verify
from .reduction import LiftedOracle, psi_inv, psi_matrix, psi_vec, reduce_simplex_to_l1
from .solvers import SmoothingConfig, agd_smoothed, mirror_prox, perceptron, smoothed_value_grad, subgradient_method

__version__ = "0.1.0"
