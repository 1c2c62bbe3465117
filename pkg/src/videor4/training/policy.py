"""Differentiable toy policies over small discrete action spaces.

A decision context describes an episode as a fixed sequence of phases;
each phase offers a finite action list whose feature vectors may depend
on the actions taken so far. The softmax policy scores actions by a
linear model over those features, so log-probabilities, gradients, and
full-episode enumeration are all exact.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from ..errors import InputError

Action = tuple


class DecisionContext(Protocol):
    """Episode structure for one query: phases, legal actions, features."""

    def phases(self) -> tuple[str, ...]: ...

    def actions(self, phase: str, history: tuple[Action, ...]) -> tuple[Action, ...]: ...

    def features(self, phase: str, action: Action,
                 history: tuple[Action, ...]) -> np.ndarray: ...


class ToySoftmaxPolicy:
    """Linear-softmax policy: pi(a | phase) proportional to exp(theta . phi(a))."""

    def __init__(self, theta: np.ndarray):
        self.theta = np.asarray(theta, dtype=np.float64).copy()

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "ToySoftmaxPolicy":
        return ToySoftmaxPolicy(self.theta)

    def _phase_dist(self, ctx: DecisionContext, phase: str,
                    history: tuple[Action, ...]):
        actions = ctx.actions(phase, history)
        if not actions:
            raise InputError(f"phase {phase!r} offers no actions")
        feats = np.stack([ctx.features(phase, a, history) for a in actions])
        logits = feats @ self.theta
        shifted = logits - logits.max()
        log_z = np.log(np.exp(shifted).sum())
        log_probs = shifted - log_z
        return actions, feats, log_probs

    def log_prob(self, ctx: DecisionContext, episode: tuple[Action, ...]) -> float:
        total = 0.0
        history: tuple[Action, ...] = ()
        for phase, chosen in zip(ctx.phases(), episode, strict=True):
            actions, _, log_probs = self._phase_dist(ctx, phase, history)
            try:
                idx = actions.index(chosen)
            except ValueError:
                raise InputError(
                    f"action {chosen!r} outside the {phase!r} action space") from None
            total += float(log_probs[idx])
            history = history + (chosen,)
        return total

    def grad_log_prob(self, ctx: DecisionContext,
                      episode: tuple[Action, ...]) -> np.ndarray:
        grad = np.zeros(self.dim)
        history: tuple[Action, ...] = ()
        for phase, chosen in zip(ctx.phases(), episode, strict=True):
            actions, feats, log_probs = self._phase_dist(ctx, phase, history)
            try:
                idx = actions.index(chosen)
            except ValueError:
                raise InputError(
                    f"action {chosen!r} outside the {phase!r} action space") from None
            probs = np.exp(log_probs)
            grad += feats[idx] - probs @ feats
            history = history + (chosen,)
        return grad

    def sample(self, ctx: DecisionContext, rng: np.random.Generator) -> tuple[Action, ...]:
        history: tuple[Action, ...] = ()
        for phase in ctx.phases():
            actions, _, log_probs = self._phase_dist(ctx, phase, history)
            cumulative = np.cumsum(np.exp(log_probs))
            # guard against float round-off leaving the total < 1
            cumulative[-1] = 1.0
            idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
            history = history + (actions[min(idx, len(actions) - 1)],)
        return history

    def enumerate_episodes(self, ctx: DecisionContext) -> list[tuple[Action, ...]]:
        """All complete action sequences for the context, in stable order."""
        episodes: list[tuple[Action, ...]] = []

        def expand(history: tuple[Action, ...], phase_idx: int):
            phases = ctx.phases()
            if phase_idx == len(phases):
                episodes.append(history)
                return
            for action in ctx.actions(phases[phase_idx], history):
                expand(history + (action,), phase_idx + 1)

        expand((), 0)
        return episodes

    def episode_log_probs(self, ctx: DecisionContext) -> list[tuple[tuple[Action, ...], float]]:
        """Exact (episode, log-probability) pairs over the whole space."""
        out: list[tuple[tuple[Action, ...], float]] = []

        def expand(history: tuple[Action, ...], phase_idx: int, lp: float):
            phases = ctx.phases()
            if phase_idx == len(phases):
                out.append((history, lp))
                return
            actions, _, log_probs = self._phase_dist(ctx, phases[phase_idx], history)
            for action, alp in zip(actions, log_probs):
                expand(history + (action,), phase_idx + 1, lp + float(alp))

        expand((), 0, 0.0)
        return out
