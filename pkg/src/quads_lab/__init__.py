"""Simulation laboratory for quantum-assisted continuous optimization.

Exact amplitude-level simulation of adaptive-threshold quantum search (GAS
and its distribution-adaptive extension QuADS) on discretized benchmark
landscapes, a full evolution-strategy reference (CMA-ES), classical swarm and
basin-hopping baselines, classical surrogates that estimate quantum oracle
counts in high dimension, and an experiment harness with oracle-call metrics,
bootstrap intervals and scaling regressions.
"""

from .baselines import run_basinhopping, run_pso
from .cma import (
    CmaHyperparams,
    DistributionState,
    PopulationConfig,
    chi_mean,
    cma_update,
    default_hyperparams,
    default_population,
    run_cmaes,
    sample_population,
    select_best,
)
from .estimator import (
    EstimateReport,
    IterationStat,
    SurrogateTrial,
    estimate_lower_bound,
    n_opt,
    run_classical_surrogate,
    s_of_p,
)
from .harness import (
    ExperimentPlan,
    ResultStore,
    RunStats,
    aggregate,
    bootstrap_ci,
    run_experiment,
    scaling_regression,
)
from .optimizers import QuadsConfig, run_gas, run_quads, update_threshold
from .quantum import (
    Statevector,
    aa_sample,
    grover_power,
    measure,
    oracle_sign_flip,
    prepare_gaussian_state,
    prepare_uniform_state,
    reflect_about_initial,
)
from .testbed import (
    Grid,
    ObjectiveSpec,
    OptimumRecord,
    evaluate,
    function_names,
    get_objective,
    index_to_point,
    is_global_hit,
    locate_global_optimum,
    locate_optimum_auto,
    point_to_index,
)
from .trials import OracleCounter, Outcome, TrialRecord

__version__ = "0.1.0"
