"""Toy-scale policy optimization: GRPO math, softmax policies, the
planted-text synthetic task, and the staged curriculum runner."""

from .grpo import (GroupRollout, GrpoConfig, group_advantages, grpo_objective,
                   importance_ratio, kl_divergence, sft_loss)
from .policy import ToySoftmaxPolicy
from .synthetic import SyntheticTask, SyntheticTaskConfig
from .curriculum import (StagePlan, StageSpec, run_schedule, run_stage,
                         full_plan, crp_only_plan, crp_rl_plan, plan_from_json,
                         load_checkpoint, save_checkpoint)

__all__ = [
    "GroupRollout", "GrpoConfig", "group_advantages", "grpo_objective",
    "importance_ratio", "kl_divergence", "sft_loss", "ToySoftmaxPolicy",
    "SyntheticTask", "SyntheticTaskConfig", "StagePlan", "StageSpec",
    "run_schedule", "run_stage", "full_plan", "crp_only_plan", "crp_rl_plan",
    "plan_from_json", "load_checkpoint", "save_checkpoint",
]
