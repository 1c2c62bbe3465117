"""Planted-word synthetic task for curriculum experiments.

Each instance is a tiny video with a bright patch planted in one grid
cell of one key frame, a question naming that frame and cell, and a
small candidate answer list. The correct answer becomes identifiable
only after the right tool use: ``clip_reveal`` instances need the key
frame clipped, ``crop_reveal`` instances need the key cell cropped, and
``mixed_reveal`` instances need both. An episode that fails to reveal
leaves the answer phase uninformed, so guessing is at chance; tool use
is therefore load-bearing, which is what makes stage orderings
measurable.

Episodes are three fixed phases (clip choice or skip, crop choice or
skip, answer choice), so the whole action space enumerates in the tens
of episodes and KL terms are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..corpus import Box, FrameAnnotation, QAInstance, Video
from ..env import CachingEncoder, run_trajectory
from ..errors import InputError
from ..trajectory import ToolCall, Trajectory, Turn
from .policy import Action

FEATURE_DIM = 7
# feature slots
_F_CLIP_NEEDED = 0
_F_CLIP_SKIP = 1
_F_CROP_NEEDED = 2
_F_CROP_SKIP = 3
_F_ANSWER_REVEAL = 4
_F_CLIP_EXTRA = 5
_F_CROP_EXTRA = 6

KINDS = ("clip_reveal", "crop_reveal", "mixed_reveal")

_WORDS = ("amber", "basil", "cobalt", "dune", "ember", "fjord", "garnet",
          "heron", "indigo", "juniper", "krill", "lotus", "maple", "nectar",
          "onyx", "pearl", "quartz", "raven", "sable", "tundra")


@dataclass(frozen=True)
class SyntheticTaskConfig:
    n_frames: int = 3
    grid: int = 2  # cells per side; grid*grid crop choices
    frame_size: int = 32
    n_candidates: int = 4
    n_single: int = 8   # clip_reveal + crop_reveal training instances
    n_mixed: int = 6    # mixed_reveal training instances
    n_eval: int = 12
    seed: int = 7

    def __post_init__(self):
        if self.n_frames < 2 or self.grid < 2 or self.n_candidates < 2:
            raise InputError("task needs >= 2 frames, a >= 2 grid, and >= 2 candidates")
        if self.frame_size < self.grid * 4:
            raise InputError("frame_size too small for the cell grid")
        if min(self.n_single, self.n_mixed, self.n_eval) < 1:
            raise InputError("instance counts must be positive")


@dataclass(frozen=True)
class SyntheticInstance:
    qa: QAInstance
    video: Video
    kind: str
    key_frame: int
    key_cell: int
    candidates: tuple[str, ...]
    gold_index: int
    grid: int

    @property
    def needs_clip(self) -> bool:
        return self.kind in ("clip_reveal", "mixed_reveal")

    @property
    def needs_crop(self) -> bool:
        return self.kind in ("crop_reveal", "mixed_reveal")

    def cell_box(self, cell: int) -> Box:
        size = self.video.frames[0].width
        step = size // self.grid
        row, col = divmod(cell, self.grid)
        return Box(col * step, row * step, (col + 1) * step, (row + 1) * step)


class SynthContext:
    """DecisionContext view of one instance for the toy policy."""

    def __init__(self, inst: SyntheticInstance, n_frames: int):
        self.inst = inst
        self.n_frames = n_frames
        self._cells = inst.grid * inst.grid

    def phases(self) -> tuple[str, ...]:
        return ("clip", "crop", "answer")

    def actions(self, phase: str, history: tuple[Action, ...]) -> tuple[Action, ...]:
        if phase == "clip":
            return tuple(("clip", f) for f in range(self.n_frames)) + (("clip", None),)
        if phase == "crop":
            return tuple(("crop", c) for c in range(self._cells)) + (("crop", None),)
        if phase == "answer":
            return tuple(("answer", i) for i in range(len(self.inst.candidates)))
        raise InputError(f"unknown phase {phase!r}")

    def revealed(self, history: tuple[Action, ...]) -> bool:
        clip_choice = history[0][1] if len(history) > 0 else None
        crop_choice = history[1][1] if len(history) > 1 else None
        clip_ok = (not self.inst.needs_clip) or clip_choice == self.inst.key_frame
        crop_ok = (not self.inst.needs_crop) or crop_choice == self.inst.key_cell
        return clip_ok and crop_ok

    def features(self, phase: str, action: Action,
                 history: tuple[Action, ...]) -> np.ndarray:
        vec = np.zeros(FEATURE_DIM)
        kind, choice = action
        if kind == "clip":
            if choice is None:
                vec[_F_CLIP_SKIP] = 1.0
            elif choice == self.inst.key_frame:
                vec[_F_CLIP_NEEDED if self.inst.needs_clip else _F_CLIP_EXTRA] = 1.0
        elif kind == "crop":
            if choice is None:
                vec[_F_CROP_SKIP] = 1.0
            elif choice == self.inst.key_cell:
                vec[_F_CROP_NEEDED if self.inst.needs_crop else _F_CROP_EXTRA] = 1.0
        elif kind == "answer":
            if choice == self.inst.gold_index and self.revealed(history):
                vec[_F_ANSWER_REVEAL] = 1.0
        else:
            raise InputError(f"unknown action kind {kind!r}")
        return vec


def _make_video(name: str, cfg: SyntheticTaskConfig, key_frame: int,
                key_cell: int, rng: np.random.Generator) -> Video:
    size = cfg.frame_size
    step = size // cfg.grid
    frames = []
    pixels = {}
    cols = np.linspace(0.0, 1.0, size)[None, :]
    rows = np.linspace(0.0, 1.0, size)[:, None]
    for f in range(cfg.n_frames):
        base = rng.uniform(0.05, 0.2)
        arr = (base
               + 0.3 * (f + 1) / cfg.n_frames * cols
               + 0.2 * rng.uniform() * rows
               + rng.normal(0.0, 0.02, (size, size)))
        arr = np.clip(arr, 0.0, 0.8)
        if f == key_frame:
            row, col = divmod(key_cell, cfg.grid)
            y0, x0 = row * step + step // 4, col * step + step // 4
            arr[y0:y0 + step // 2, x0:x0 + step // 2] = 0.95
        pixels[f] = arr
        frames.append(FrameAnnotation(index=f, width=size, height=size))
    video = Video(name=name, root=Path("."), frames=tuple(frames))
    video._pixel_cache.update(pixels)
    return video


def _make_instance(ordinal: int, kind: str, cfg: SyntheticTaskConfig,
                   rng: np.random.Generator) -> SyntheticInstance:
    key_frame = int(rng.integers(cfg.n_frames))
    key_cell = int(rng.integers(cfg.grid * cfg.grid))
    words = rng.choice(len(_WORDS), size=cfg.n_candidates, replace=False)
    candidates = tuple(_WORDS[i] for i in words)
    gold_index = int(rng.integers(cfg.n_candidates))
    name = f"synth-{ordinal:04d}"
    video = _make_video(name, cfg, key_frame, key_cell, rng)
    src = {"clip_reveal": ("multi", "visual"), "crop_reveal": ("single", "text"),
           "mixed_reveal": ("multi", "text")}[kind]
    qa = QAInstance(
        id=f"{name}-q",
        video=name,
        question=(f"What word is hidden in cell {key_cell} of frame {key_frame}? "
                  f"Options: {', '.join(candidates)}."),
        answers=(candidates[gold_index],),
        src_temporal=src[0],
        src_modality=src[1],
    )
    return SyntheticInstance(qa=qa, video=video, kind=kind, key_frame=key_frame,
                             key_cell=key_cell, candidates=candidates,
                             gold_index=gold_index, grid=cfg.grid)


class SyntheticTask:
    """Instance pools, demonstrations, and episode plumbing for training."""

    FEATURE_DIM = FEATURE_DIM

    def __init__(self, cfg: SyntheticTaskConfig | None = None):
        self.cfg = cfg or SyntheticTaskConfig()
        rng = np.random.default_rng(self.cfg.seed)
        single_kinds = ["clip_reveal", "crop_reveal"]
        self.single_instances = [
            _make_instance(i, single_kinds[i % 2], self.cfg, rng)
            for i in range(self.cfg.n_single)]
        self.mixed_instances = [
            _make_instance(1000 + i, "mixed_reveal", self.cfg, rng)
            for i in range(self.cfg.n_mixed)]
        self.eval_instances = [
            _make_instance(2000 + i, KINDS[i % 3], self.cfg, rng)
            for i in range(self.cfg.n_eval)]
        self.encoder = CachingEncoder()

    def context(self, inst: SyntheticInstance) -> SynthContext:
        return SynthContext(inst, self.cfg.n_frames)

    def rl_instances(self, data_filter: str) -> list[SyntheticInstance]:
        if data_filter == "single_tool":
            return list(self.single_instances)
        if data_filter == "mixed":
            return list(self.mixed_instances)
        raise InputError(f"unknown data filter {data_filter!r}")

    def demo_actions(self, inst: SyntheticInstance) -> tuple[Action, ...]:
        clip = ("clip", inst.key_frame if inst.needs_clip else None)
        crop = ("crop", inst.key_cell if inst.needs_crop else None)
        return (clip, crop, ("answer", inst.gold_index))

    def trajectory_for_actions(self, inst: SyntheticInstance,
                               episode: tuple[Action, ...], traj_id: str,
                               provenance: str = "model_rollout") -> Trajectory:
        """Materialize an action tuple as a wire-format trajectory."""
        (_, clip_choice), (_, crop_choice), (_, answer_idx) = episode
        turns = [Turn(think=f"The question is: {inst.qa.question}")]
        if clip_choice is not None:
            turns.append(Turn(think="Clipping the hinted frame.",
                              tool_call=ToolCall.clip([clip_choice])))
        if crop_choice is not None:
            turns.append(Turn(think="Zooming into the hinted cell.",
                              tool_call=ToolCall.crop(inst.key_frame,
                                                      inst.cell_box(crop_choice))))
        turns.append(Turn(think="Reading off the planted word.",
                          final_answer=inst.candidates[answer_idx]))
        return Trajectory(id=traj_id, instance_id=inst.qa.id,
                          provenance=provenance, turns=tuple(turns))

    def actions_from_trajectory(self, inst: SyntheticInstance,
                                traj: Trajectory) -> tuple[Action, ...]:
        """Invert trajectory_for_actions; errors on out-of-space content."""
        clip_choice = None
        crop_choice = None
        for call in traj.tool_calls:
            if call.name == "clip":
                if clip_choice is not None or len(call.frames) != 1:
                    raise InputError(f"trajectory {traj.id}: clip outside the action space")
                clip_choice = call.frames[0]
            else:
                if crop_choice is not None:
                    raise InputError(f"trajectory {traj.id}: repeated crop outside the action space")
                matches = [c for c in range(inst.grid * inst.grid)
                           if inst.cell_box(c) == call.box and call.frame == inst.key_frame]
                if not matches:
                    raise InputError(f"trajectory {traj.id}: crop box outside the action space")
                crop_choice = matches[0]
        answer = traj.final_answer
        if answer not in inst.candidates:
            raise InputError(f"trajectory {traj.id}: answer {answer!r} outside the action space")
        return (("clip", clip_choice), ("crop", crop_choice),
                ("answer", inst.candidates.index(answer)))

    def sft_data(self, data_filter: str) -> list[tuple[SyntheticInstance, Trajectory]]:
        """Demonstration trajectories for an SFT stage."""
        instances = self.rl_instances(data_filter)
        out = []
        for inst in instances:
            traj = self.trajectory_for_actions(
                inst, self.demo_actions(inst), traj_id=f"{inst.qa.id}.demo",
                provenance="synthesized")
            out.append((inst, traj))
        return out

    def run_episode(self, inst: SyntheticInstance, episode: tuple[Action, ...],
                    traj_id: str):
        traj = self.trajectory_for_actions(inst, episode, traj_id)
        return run_trajectory(traj, inst.video, self.encoder)
