"""Graph-based sports outcome prediction.

Game states become fully connected player graphs; graph-convolution and
graph-attention encoders (optionally fused with a flat state vector)
predict continuous or binary outcomes, and a counterfactual layer answers
positional what-if questions against a trained model.
"""

from .errors import (
    CheckpointFormatError,
    ContractViolationError,
    DataError,
    MissingConfigError,
    NonFiniteLossError,
    PlayGraphError,
    SchemaMismatchError,
    ShapeError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .game import (
    FeatureSchema,
    GameGraph,
    GameState,
    PlayerRecord,
    build_graph,
    load_states,
    save_states,
    state_from_dict,
    state_to_dict,
    validate_state,
)
from .synth import SyntheticConfig, gen_states, round_oracle_prob, rush_oracle_yards
from .models import (
    ModelParams,
    ModelSpec,
    Prediction,
    build_model,
    fit_schemas,
    forward,
    load_checkpoint,
    predict_state,
    save_checkpoint,
)
from .training import (
    SplitConfig,
    TrainConfig,
    TrialReport,
    evaluate,
    head_ablation,
    paired_t_test,
    run_trials,
    split_dataset,
    summarize_trials,
    train_model,
)
from .whatif import (
    Perturbation,
    WhatIfResult,
    attention_summary,
    circle_move,
    position_sweep,
    what_if,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointFormatError", "ContractViolationError", "DataError",
    "MissingConfigError", "NonFiniteLossError", "PlayGraphError",
    "SchemaMismatchError", "ShapeError", "TrainingDivergedError",
    "UndefinedMetricError",
    "FeatureSchema", "GameGraph", "GameState", "PlayerRecord",
    "build_graph", "load_states", "save_states", "state_from_dict",
    "state_to_dict", "validate_state",
    "SyntheticConfig", "gen_states", "round_oracle_prob", "rush_oracle_yards",
    "ModelParams", "ModelSpec", "Prediction", "build_model", "fit_schemas",
    "forward", "load_checkpoint", "predict_state", "save_checkpoint",
    "SplitConfig", "TrainConfig", "TrialReport", "evaluate", "head_ablation",
    "paired_t_test", "run_trials", "split_dataset", "summarize_trials",
    "train_model",
    "Perturbation", "WhatIfResult", "attention_summary", "circle_move",
    "position_sweep", "what_if",
]
