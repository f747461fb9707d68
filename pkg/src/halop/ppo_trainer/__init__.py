"""On-policy trainer: rollouts, advantage estimation, PPO updates."""

from .gae import compute_advantages
from .models import (
    AgentConfig,
    EvalTensors,
    PolicyModel,
    StepObs,
    StepSample,
    Trajectory,
    build_model,
    model_from_checkpoint,
)
from .trainer import (
    Adam,
    EpochPlan,
    PpoConfig,
    TrainResult,
    evaluate_policy,
    ppo_update,
    rollout_day,
    train,
    twap_for,
)

__all__ = [
    "compute_advantages",
    "AgentConfig",
    "EvalTensors",
    "PolicyModel",
    "StepObs",
    "StepSample",
    "Trajectory",
    "build_model",
    "model_from_checkpoint",
    "Adam",
    "EpochPlan",
    "PpoConfig",
    "TrainResult",
    "evaluate_policy",
    "ppo_update",
    "rollout_day",
    "train",
    "twap_for",
]
