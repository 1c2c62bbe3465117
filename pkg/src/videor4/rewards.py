"""Composite episode rewards: base correctness/format plus shaping terms.

Total reward per rollout:

    R' = R + lambda_div * R_div + lambda_rep * R_rep + lambda_cur * R_cur

where R is exact-match correctness plus a format bonus, R_div is the
mean pairwise cosine distance over selected region features, R_rep
scores how well the last clip covers the whole frame set, and R_cur is
a group-relative curiosity bonus with a linear penalty on excessive
tool calls. All functions are pure; the curiosity term takes the whole
group's statistics as an explicit argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EpisodeRecord
from .errors import InputError
from .metrics import exact_match


@dataclass(frozen=True)
class RewardConfig:
    lambda_div: float = 1.0
    lambda_rep: float = 1.0
    lambda_cur: float = 1.0
    alpha: float = 0.5
    beta: float = 0.05
    usage_target: float = 0.3  # H: group tool-usage fraction below which callers get a bonus
    call_budget: int = 3       # N: calls beyond this are linearly penalized
    format_bonus: float = 0.5
    empty_clip_penalty: float = 10.0  # R_rep = exp(-this) when no clip happened

    def __post_init__(self):
        if min(self.lambda_div, self.lambda_rep, self.lambda_cur) < 0:
            raise InputError("reward weights must be non-negative")
        if self.alpha < 0 or self.beta < 0:
            raise InputError("alpha and beta must be non-negative")
        if not (0.0 <= self.usage_target <= 1.0):
            raise InputError(f"usage_target must be in [0,1], got {self.usage_target}")
        if self.call_budget < 1:
            raise InputError(f"call_budget must be positive, got {self.call_budget}")
        if self.format_bonus < 0:
            raise InputError("format_bonus must be non-negative")


@dataclass(frozen=True)
class RewardBreakdown:
    base: float
    diversity: float
    representativeness: float
    curiosity: float
    total: float


@dataclass(frozen=True)
class GroupCallStats:
    """Per-group tool-usage statistics feeding the curiosity term."""

    used_tool: tuple[bool, ...]
    call_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.used_tool) != len(self.call_counts):
            raise InputError("used_tool and call_counts must have equal length")

    @property
    def size(self) -> int:
        return len(self.used_tool)

    @classmethod
    def from_episodes(cls, episodes) -> "GroupCallStats":
        counts = tuple(ep.state.tool_call_count for ep in episodes)
        return cls(used_tool=tuple(c > 0 for c in counts), call_counts=counts)


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        raise InputError("cosine_distance requires nonzero vectors")
    return float(1.0 - np.dot(u, v) / (nu * nv))


def diversity_reward(regions) -> float:
    """Mean cosine distance over ordered pairs of selected regions.

    Fewer than two regions means no redundancy to measure, hence 0. The
    n(n-1) normalization keeps the value scale-comparable across region
    counts instead of growing with them.
    """
    regions = list(regions)
    n = len(regions)
    if n <= 1:
        return 0.0
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += cosine_distance(regions[i], regions[j])
    return total / (n * (n - 1))


def representativeness_reward(all_frames, last_clip,
                              empty_clip_penalty: float = 10.0) -> float:
    """exp(-mean over frames of distance to the nearest last-clip member).

    Only the most recent clip is scored. An episode that never clipped
    gets the floor exp(-empty_clip_penalty), strictly below any
    achievable nonempty-clip value at unit-norm features.
    """
    all_frames = list(all_frames)
    if not all_frames:
        raise InputError("representativeness_reward requires at least one frame")
    last_clip = list(last_clip)
    if not last_clip:
        return float(np.exp(-empty_clip_penalty))
    total = 0.0
    for v in all_frames:
        total += min(float(np.linalg.norm(v - c)) for c in last_clip)
    return float(np.exp(-total / len(all_frames)))


def curiosity_reward(stats: GroupCallStats, i: int, cfg: RewardConfig) -> float:
    """Bonus for tool use while the group underuses tools; linear penalty
    on calls beyond the budget."""
    if i < 0 or i >= stats.size:
        raise InputError(f"rollout index {i} out of range [0, {stats.size})")
    usage_fraction = sum(stats.used_tool) / stats.size
    bonus = cfg.alpha * max(0.0, cfg.usage_target - usage_fraction) * float(stats.used_tool[i])
    penalty = cfg.beta * max(0, stats.call_counts[i] - cfg.call_budget)
    return bonus - penalty


def base_reward(episode: EpisodeRecord, golds, cfg: RewardConfig) -> float:
    """Exact-match correctness plus the format bonus for well-formed episodes."""
    if not golds:
        raise InputError("base_reward requires at least one gold answer")
    correct = exact_match(episode.final_answer, golds) if episode.final_answer else 0
    return float(correct) + (cfg.format_bonus if episode.format_ok else 0.0)


def total_reward(episodes, golds, cfg: RewardConfig | None = None) -> list[RewardBreakdown]:
    """Per-rollout reward breakdowns for one group of episodes."""
    cfg = cfg or RewardConfig()
    episodes = list(episodes)
    if not episodes:
        raise InputError("total_reward requires a non-empty group")
    stats = GroupCallStats.from_episodes(episodes)
    out = []
    for i, ep in enumerate(episodes):
        base = base_reward(ep, golds, cfg)
        div = diversity_reward(ep.state.selected_region_features)
        rep = representativeness_reward(ep.state.all_frame_features,
                                        ep.state.last_clip_features,
                                        cfg.empty_clip_penalty)
        cur = curiosity_reward(stats, i, cfg)
        total = (base + cfg.lambda_div * div + cfg.lambda_rep * rep
                 + cfg.lambda_cur * cur)
        out.append(RewardBreakdown(base=base, diversity=div,
                                   representativeness=rep, curiosity=cur,
                                   total=total))
    return out


def breakdown_to_json(b: RewardBreakdown) -> dict:
    return {"base": b.base, "diversity": b.diversity,
            "representativeness": b.representativeness,
            "curiosity": b.curiosity, "total": b.total}
