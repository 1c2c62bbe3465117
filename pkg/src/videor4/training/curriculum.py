"""Staged training schedules: SFT on demonstrations, then group-relative
policy optimization, in the four-stage single-tool/mixed curriculum.

Stage kinds:
  sft   - gradient descent on action-level cross-entropy over demos
  grpo  - per step, sample a group of episodes for one instance, score
          them with the composite reward, and ascend the clipped
          surrogate with an exact KL penalty to the stage-initial policy

Filters partition data by tool composition: ``single_tool`` stages see
one-tool trajectories/instances, ``mixed`` stages see trajectories that
interleave both tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InputError
from ..rewards import RewardConfig, total_reward
from .grpo import GroupRollout, GrpoConfig, group_advantages, grpo_objective, sft_loss
from .policy import ToySoftmaxPolicy
from .synthetic import SyntheticTask

STAGE_KINDS = ("sft", "grpo")
DATA_FILTERS = ("single_tool", "mixed")


@dataclass(frozen=True)
class StageSpec:
    name: str
    kind: str
    data_filter: str
    steps: int
    learning_rate: float

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise InputError(f"stage kind must be one of {STAGE_KINDS}, got {self.kind!r}")
        if self.data_filter not in DATA_FILTERS:
            raise InputError(
                f"data filter must be one of {DATA_FILTERS}, got {self.data_filter!r}")
        if self.steps <= 0:
            raise InputError(f"stage {self.name}: step budget must be positive")
        if self.learning_rate <= 0:
            raise InputError(f"stage {self.name}: learning rate must be positive")


@dataclass(frozen=True)
class StagePlan:
    name: str
    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        if not self.stages:
            raise InputError("a stage plan needs at least one stage")


def full_plan(sft_steps: int = 40, rl_steps: int = 48, sft_lr: float = 0.5,
              rl_lr: float = 0.08) -> StagePlan:
    return StagePlan(name="full", stages=(
        StageSpec("drp_sft", "sft", "single_tool", sft_steps, sft_lr),
        StageSpec("rl_d", "grpo", "single_tool", rl_steps, rl_lr),
        StageSpec("crp_sft", "sft", "mixed", sft_steps, sft_lr),
        StageSpec("rl_c", "grpo", "mixed", rl_steps, rl_lr),
    ))


def crp_rl_plan(sft_steps: int = 40, rl_steps: int = 48, sft_lr: float = 0.5,
                rl_lr: float = 0.08) -> StagePlan:
    return StagePlan(name="crp_rl", stages=(
        StageSpec("crp_sft", "sft", "mixed", sft_steps, sft_lr),
        StageSpec("rl_c", "grpo", "mixed", rl_steps, rl_lr),
    ))


def crp_only_plan(sft_steps: int = 40, sft_lr: float = 0.5) -> StagePlan:
    return StagePlan(name="crp_only", stages=(
        StageSpec("crp_sft", "sft", "mixed", sft_steps, sft_lr),
    ))


NAMED_PLANS = {"full": full_plan, "crp_rl": crp_rl_plan, "crp_only": crp_only_plan}


def plan_from_json(raw: dict) -> StagePlan:
    try:
        stages = tuple(StageSpec(name=s["name"], kind=s["kind"],
                                 data_filter=s["filter"], steps=int(s["steps"]),
                                 learning_rate=float(s["learning_rate"]))
                       for s in raw["stages"])
        return StagePlan(name=str(raw.get("name", "custom")), stages=stages)
    except KeyError as exc:
        raise InputError(f"schedule plan missing key {exc}") from exc


def plan_to_json(plan: StagePlan) -> dict:
    return {"name": plan.name,
            "stages": [{"name": s.name, "kind": s.kind, "filter": s.data_filter,
                        "steps": s.steps, "learning_rate": s.learning_rate}
                       for s in plan.stages]}


@dataclass(frozen=True)
class StageReport:
    name: str
    kind: str
    steps: int
    learning_rate: float
    curve: tuple[float, ...]  # per-step loss (sft) or mean group reward (grpo)
    tool_usage: dict
    final_value: float


@dataclass(frozen=True)
class ScheduleReport:
    plan: str
    seed: int
    stages: tuple[StageReport, ...]
    final_eval: dict
    grpo_config: dict
    kl_reference: str = "stage_initial"


def _check_sft_filter(stage: StageSpec, data) -> None:
    for _, traj in data:
        single = traj.drp_eligible
        if stage.data_filter == "single_tool" and not single:
            raise InputError(
                f"stage {stage.name}: mixed-tool trajectory {traj.id} in a single-tool stage")
        if stage.data_filter == "mixed" and single:
            raise InputError(
                f"stage {stage.name}: single-tool trajectory {traj.id} in a mixed stage")


def run_stage(stage: StageSpec, policy: ToySoftmaxPolicy, data,
              task: SyntheticTask, reward_cfg: RewardConfig,
              grpo_cfg: GrpoConfig, rng: np.random.Generator):
    """Run one stage; returns (updated policy, StageReport)."""
    policy = policy.copy()
    curve: list[float] = []
    clip_calls = 0
    crop_calls = 0
    episode_count = 0

    if stage.kind == "sft":
        _check_sft_filter(stage, data)
        demos = [(task.context(inst), task.actions_from_trajectory(inst, traj))
                 for inst, traj in data]
        for _ in range(stage.steps):
            loss, grad = sft_loss(policy, demos)
            policy.theta -= stage.learning_rate * grad
            curve.append(float(loss))
        for _, episode in demos:
            episode_count += 1
            clip_calls += episode[0][1] is not None
            crop_calls += episode[1][1] is not None
    else:
        if not data:
            raise InputError(f"stage {stage.name}: no instances to train on")
        ref_policy = policy.copy()
        for step in range(stage.steps):
            inst = data[step % len(data)]
            ctx = task.context(inst)
            old_policy = policy.copy()
            episodes = []
            records = []
            for g in range(grpo_cfg.group_size):
                episode = old_policy.sample(ctx, rng)
                episodes.append(episode)
                rec = task.run_episode(inst, episode,
                                       traj_id=f"{inst.qa.id}.s{step}.g{g}")
                records.append(rec)
                episode_count += 1
                clip_calls += any(c.name == "clip" for c in rec.state.transcript)
                crop_calls += any(c.name == "crop" for c in rec.state.transcript)
            breakdowns = total_reward(records, inst.qa.answers, reward_cfg)
            totals = [b.total for b in breakdowns]
            advantages = group_advantages(totals, grpo_cfg)
            group = GroupRollout(ctx=ctx, episodes=tuple(episodes),
                                 advantages=tuple(advantages))
            _, grad = grpo_objective([group], policy, old_policy, ref_policy,
                                     grpo_cfg)
            policy.theta += stage.learning_rate * grad
            curve.append(float(np.mean(totals)))

    usage = {
        "episodes": episode_count,
        "clip_fraction": clip_calls / episode_count if episode_count else 0.0,
        "crop_fraction": crop_calls / episode_count if episode_count else 0.0,
    }
    report = StageReport(name=stage.name, kind=stage.kind, steps=stage.steps,
                         learning_rate=stage.learning_rate, curve=tuple(curve),
                         tool_usage=usage, final_value=curve[-1])
    return policy, report


def evaluate_policy(policy: ToySoftmaxPolicy, task: SyntheticTask,
                    reward_cfg: RewardConfig, group_size: int,
                    rng: np.random.Generator) -> dict:
    """Mean episode reward and exact-match rate over the eval pool."""
    totals: list[float] = []
    correct = 0
    n = 0
    for inst in task.eval_instances:
        ctx = task.context(inst)
        records = []
        for g in range(group_size):
            episode = policy.sample(ctx, rng)
            records.append(task.run_episode(inst, episode,
                                            traj_id=f"{inst.qa.id}.eval.g{g}"))
        for b in total_reward(records, inst.qa.answers, reward_cfg):
            totals.append(b.total)
        for rec in records:
            n += 1
            correct += rec.final_answer == inst.qa.answers[0]
    return {"mean_reward": float(np.mean(totals)), "em": correct / n,
            "episodes": n}


def run_schedule(plan: StagePlan, task: SyntheticTask,
                 reward_cfg: RewardConfig | None = None,
                 grpo_cfg: GrpoConfig | None = None,
                 seed: int = 0) -> tuple[ToySoftmaxPolicy, ScheduleReport]:
    """Chain the plan's stages, threading the policy, then evaluate."""
    reward_cfg = reward_cfg or RewardConfig()
    grpo_cfg = grpo_cfg or GrpoConfig()
    rng = np.random.default_rng(seed)
    policy = ToySoftmaxPolicy(np.zeros(task.FEATURE_DIM))
    reports = []
    for stage in plan.stages:
        if stage.kind == "sft":
            data = task.sft_data(stage.data_filter)
        else:
            data = task.rl_instances(stage.data_filter)
        policy, report = run_stage(stage, policy, data, task, reward_cfg,
                                   grpo_cfg, rng)
        reports.append(report)
    eval_rng = np.random.default_rng(seed + 999_983)
    final_eval = evaluate_policy(policy, task, reward_cfg,
                                 grpo_cfg.group_size, eval_rng)
    report = ScheduleReport(
        plan=plan.name, seed=seed, stages=tuple(reports),
        final_eval=final_eval,
        grpo_config={"group_size": grpo_cfg.group_size,
                     "clip_range": grpo_cfg.clip_range,
                     "kl_coeff": grpo_cfg.kl_coeff,
                     "advantage_epsilon": grpo_cfg.advantage_epsilon})
    return policy, report


def stage_report_to_json(r: StageReport) -> dict:
    return {"name": r.name, "kind": r.kind, "steps": r.steps,
            "learning_rate": r.learning_rate, "curve": list(r.curve),
            "tool_usage": r.tool_usage, "final_value": r.final_value}


def schedule_report_to_json(r: ScheduleReport) -> dict:
    return {"plan": r.plan, "seed": r.seed,
            "stages": [stage_report_to_json(s) for s in r.stages],
            "final_eval": r.final_eval, "grpo_config": r.grpo_config,
            "kl_reference": r.kl_reference}


def save_checkpoint(path: str | Path, policy: ToySoftmaxPolicy, stage: str,
                    step: int, seed: int) -> None:
    """Flat parameter vector with a one-line JSON header."""
    header = json.dumps({"dim": policy.dim, "stage": stage, "step": step,
                         "seed": seed})
    lines = [header] + [repr(float(v)) for v in policy.theta]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path: str | Path) -> tuple[np.ndarray, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InputError(f"empty checkpoint file {path}")
    try:
        header = json.loads(lines[0])
        theta = np.array([float(v) for v in lines[1:] if v.strip()])
    except (json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"malformed checkpoint {path}: {exc}") from exc
    if header.get("dim") != theta.shape[0]:
        raise InputError(
            f"checkpoint {path}: header dim {header.get('dim')} != {theta.shape[0]} values")
    return theta, header
