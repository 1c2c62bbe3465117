"""Group-relative policy optimization at toy scale.

Advantages normalize rewards within a sampled group. The objective is
the clipped importance-ratio surrogate minus a KL penalty to a
reference policy; on these small discrete action spaces the KL and all
gradients are computed exactly, which is what makes finite-difference
verification meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .policy import Action, DecisionContext, ToySoftmaxPolicy


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    clip_range: float = 0.2
    kl_coeff: float = 0.04
    advantage_epsilon: float = 1e-8
    learning_rate: float = 1e-6

    def __post_init__(self):
        if self.group_size < 2:
            raise InputError(f"group_size must be >= 2, got {self.group_size}")
        if not (0.0 < self.clip_range < 1.0):
            raise InputError(f"clip_range must be in (0,1), got {self.clip_range}")
        if self.kl_coeff < 0:
            raise InputError(f"kl_coeff must be >= 0, got {self.kl_coeff}")
        if self.learning_rate <= 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")


def group_advantages(rewards, cfg: GrpoConfig | None = None) -> list[float]:
    """Standardize rewards within the group (population std).

    A group whose std falls below the floor carries no ranking signal,
    so every advantage is zero.
    """
    cfg = cfg or GrpoConfig()
    arr = np.asarray(list(rewards), dtype=np.float64)
    if arr.size < 2:
        raise InputError(f"advantage groups need at least 2 rewards, got {arr.size}")
    std = float(arr.std())
    if std < cfg.advantage_epsilon:
        return [0.0] * arr.size
    mean = float(arr.mean())
    return [(float(r) - mean) / std for r in arr]


def importance_ratio(policy: ToySoftmaxPolicy, old_policy: ToySoftmaxPolicy,
                     ctx: DecisionContext, episode: tuple[Action, ...]) -> float:
    lp = policy.log_prob(ctx, episode)
    lp_old = old_policy.log_prob(ctx, episode)
    ratio = math.exp(lp - lp_old)
    if not math.isfinite(ratio):
        raise InputError(f"non-finite importance ratio from log-probs {lp}, {lp_old}")
    return ratio


def kl_divergence(policy: ToySoftmaxPolicy, ref_policy: ToySoftmaxPolicy,
                  ctx: DecisionContext) -> tuple[float, np.ndarray]:
    """Exact KL(pi_theta || pi_ref) by full episode enumeration, with its
    exact gradient in theta."""
    value = 0.0
    grad = np.zeros(policy.dim)
    for episode, lp in policy.episode_log_probs(ctx):
        lp_ref = ref_policy.log_prob(ctx, episode)
        p = math.exp(lp)
        diff = lp - lp_ref
        value += p * diff
        grad += p * (diff + 1.0) * policy.grad_log_prob(ctx, episode)
    return value, grad


@dataclass(frozen=True)
class GroupRollout:
    """One query's sampled group: context, episodes, and their advantages."""

    ctx: DecisionContext
    episodes: tuple[tuple[Action, ...], ...]
    advantages: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if len(self.episodes) != len(self.advantages):
            raise InputError("episodes and advantages must have equal length")


def grpo_objective(groups, policy: ToySoftmaxPolicy,
                   old_policy: ToySoftmaxPolicy,
                   ref_policy: ToySoftmaxPolicy,
                   cfg: GrpoConfig | None = None) -> tuple[float, np.ndarray]:
    """Clipped surrogate minus KL penalty, averaged over groups.

    Returns (value, analytic gradient). The min/clip composition passes
    gradient only where the unclipped term attains the min; the KL term
    is enumerated per group context.
    """
    cfg = cfg or GrpoConfig()
    groups = list(groups)
    if not groups:
        raise InputError("grpo_objective requires at least one group")
    value = 0.0
    grad = np.zeros(policy.dim)
    lo, hi = 1.0 - cfg.clip_range, 1.0 + cfg.clip_range
    for group in groups:
        g = len(group.episodes)
        if g == 0:
            raise InputError("empty rollout group")
        for episode, adv in zip(group.episodes, group.advantages):
            ratio = importance_ratio(policy, old_policy, group.ctx, episode)
            clipped = min(max(ratio, lo), hi)
            unclipped_term = ratio * adv
            clipped_term = clipped * adv
            value += min(unclipped_term, clipped_term) / g
            if unclipped_term <= clipped_term + 1e-12:
                grad += (adv * ratio / g) * policy.grad_log_prob(group.ctx, episode)
        if cfg.kl_coeff > 0:
            kl_value, kl_grad = kl_divergence(policy, ref_policy, group.ctx)
            value -= cfg.kl_coeff * kl_value
            grad -= cfg.kl_coeff * kl_grad
    n = len(groups)
    if not math.isfinite(value):
        raise InputError("non-finite objective value")
    return value / n, grad / n


def sft_loss(policy: ToySoftmaxPolicy, demos) -> tuple[float, np.ndarray]:
    """Action-level cross-entropy on demonstrated episodes.

    ``demos`` is a list of (context, episode) pairs. The loss is the
    negative mean log-probability per demonstrated action, so a uniform
    policy over k actions scores ln k.
    """
    demos = list(demos)
    if not demos:
        raise InputError("sft_loss requires at least one demonstration")
    total_lp = 0.0
    grad = np.zeros(policy.dim)
    n_actions = 0
    for ctx, episode in demos:
        total_lp += policy.log_prob(ctx, episode)
        grad += policy.grad_log_prob(ctx, episode)
        n_actions += len(episode)
    return -total_lp / n_actions, -grad / n_actions
