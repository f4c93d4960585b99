# pycmc/__init__.py

__version__ = "0.1.0"

from .cmc import (
    Cmc,
    RngStream,
    build_embedded,
    build_sequential3,
    build_two_state,
    load_cmc,
    sample_transition,
    save_cmc,
    validate,
)
from .estimation import (
    CountTensor,
    DirichletPrior,
    increment,
    kl_divergence,
    missing_information,
    per_row_missing_information,
    pig,
    posterior_row,
)
from .exploration import (
    ExplorationLog,
    StrategyKind,
    base_policy_value,
    exact_dp,
    explore,
    jpig_greedy_pair,
    pig_greedy_control,
    random_control,
    rollout_control,
)
from .control import (
    DiscountedTask,
    StationaryPolicy,
    ValueFunction,
    evaluate_learned_model,
    evaluate_policy,
    improve_policy,
    policy_iteration,
    value_iteration_oracle,
)
from .harness import ExperimentConfig, describe_builtins, run_experiment
from .writer import CsvArtifactWriter
from .reader import ExplorationCsvReader
from .exceptions import CmcError, ConfigError, ParseError, ValidationError

__all__ = [
    "Cmc",
    "RngStream",
    "build_embedded",
    "build_sequential3",
    "build_two_state",
    "load_cmc",
    "sample_transition",
    "save_cmc",
    "validate",
    "CountTensor",
    "DirichletPrior",
    "increment",
    "kl_divergence",
    "missing_information",
    "per_row_missing_information",
    "pig",
    "posterior_row",
    "ExplorationLog",
    "StrategyKind",
    "base_policy_value",
    "exact_dp",
    "explore",
    "jpig_greedy_pair",
    "pig_greedy_control",
    "random_control",
    "rollout_control",
    "DiscountedTask",
    "StationaryPolicy",
    "ValueFunction",
    "evaluate_learned_model",
    "evaluate_policy",
    "improve_policy",
    "policy_iteration",
    "value_iteration_oracle",
    "ExperimentConfig",
    "describe_builtins",
    "run_experiment",
    "CsvArtifactWriter",
    "ExplorationCsvReader",
    "CmcError",
    "ConfigError",
    "ParseError",
    "ValidationError",
]
