"""Simulation lab for nonparametric contextual bilateral trade.

A learner posts one price per round to a hidden seller/buyer pair whose
valuations are Lipschitz functions of an observed context, sees only the
acceptance bit, and tries to track the best achievable gain from trade.
The package provides the hierarchical posting policies (with and without a
known smoothness bound), synthetic and adversarial environments, and a
regret-measurement harness with a CLI.
"""

from .core import (
    Context,
    Feedback,
    Price,
    PriceGrid,
    ValuationPair,
    best_gft,
    capped_grid,
    clip01,
    gft,
)
from .environments import (
    ConstantEnv,
    Environment,
    FileReplayContexts,
    FunctionEnv,
    GridSequenceContexts,
    HardInstanceEnv,
    QuadraticEnv,
    UniformRandomContexts,
    build_hard_instance,
    hard_instance_params,
    mcshane_extend,
)
from .harness import (
    AggregateResult,
    RunConfig,
    RunRecord,
    RunResult,
    aggregate,
    emit_results,
    fit_tail_slope,
    node_decomposition_gap,
    run_and_emit,
    run_experiment,
    run_round,
    run_single,
    substream,
    validate_lemma_bounds,
    validate_markov,
)
from .policy_known import KnownLConfig, KnownLipschitzPolicy, Phase
from .policy_unknown import ScaleLadder, UnknownLConfig, UnknownLipschitzPolicy
from .tree import (
    NodeId,
    NodePhase,
    NodeState,
    PartitionTree,
    TreeParams,
    child_containing,
    max_height,
    parent,
    region_contains,
)

__all__ = [
    "AggregateResult", "ConstantEnv", "Context", "Environment", "Feedback",
    "FileReplayContexts", "FunctionEnv", "GridSequenceContexts",
    "HardInstanceEnv", "KnownLConfig", "KnownLipschitzPolicy", "NodeId",
    "NodePhase", "NodeState", "PartitionTree", "Phase", "Price", "PriceGrid",
    "QuadraticEnv", "RunConfig", "RunRecord", "RunResult", "ScaleLadder",
    "TreeParams", "UniformRandomContexts", "UnknownLConfig",
    "UnknownLipschitzPolicy", "ValuationPair", "aggregate", "best_gft",
    "build_hard_instance", "capped_grid", "child_containing", "clip01",
    "emit_results", "fit_tail_slope", "gft", "hard_instance_params",
    "max_height", "mcshane_extend", "node_decomposition_gap", "parent",
    "region_contains", "run_and_emit", "run_experiment", "run_round",
    "run_single", "substream", "validate_lemma_bounds", "validate_markov",
]
