"""Executable rumination environment: clip/crop against real pixels.

The environment re-encodes retrieved pixels into unit-norm feature
vectors and tracks which features an episode selected, grouped by clip
call. Rewards are computed downstream from this state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .corpus import Box, Video
from .errors import InputError, TurnParseError
from .trajectory import Trajectory, ToolCall, parse_turn, serialize_turn

FEATURE_DIM = 64
_POOL = 8


def encode_feature(pixels: np.ndarray) -> np.ndarray:
    """Encode an image patch as a 64-dim unit vector.

    Pixels are pooled onto an 8x8 mean-intensity grid, flattened,
    mean-centered (so a global brightness offset cancels), and
    L2-normalized. A constant image, whose centered vector is zero, maps
    to the first basis vector.
    """
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"encode_feature requires a non-empty 2-d array, got shape {arr.shape}")
    h, w = arr.shape
    pooled = np.empty((_POOL, _POOL), dtype=np.float64)
    for i in range(_POOL):
        r0 = i * h // _POOL
        r1 = max((i + 1) * h // _POOL, r0 + 1)
        for j in range(_POOL):
            c0 = j * w // _POOL
            c1 = max((j + 1) * w // _POOL, c0 + 1)
            pooled[i, j] = arr[r0:r1, c0:c1].mean()
    vec = pooled.reshape(FEATURE_DIM)
    vec = vec - vec.mean()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        basis = np.zeros(FEATURE_DIM)
        basis[0] = 1.0
        return basis
    return vec / norm


class CachingEncoder:
    """encode_feature memoized by pixel bytes; safe because inputs are
    read-only snapshots and the encoding is pure."""

    def __init__(self):
        self._cache: dict[bytes, np.ndarray] = {}

    def __call__(self, pixels: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(pixels, dtype=np.float64)
        key = hashlib.sha256(arr.tobytes()).digest() + arr.shape[0].to_bytes(4, "big")
        hit = self._cache.get(key)
        if hit is None:
            hit = encode_feature(arr)
            self._cache[key] = hit
        return hit


@dataclass
class RuminationState:
    """Feature bookkeeping for one episode.

    ``clip_groups`` holds references into ``all_frame_features``, so
    selected frame features are by construction a subset of the input
    frame features.
    """

    all_frame_features: list[np.ndarray]
    clip_groups: list[list[np.ndarray]] = field(default_factory=list)
    selected_region_features: list[np.ndarray] = field(default_factory=list)
    transcript: list = field(default_factory=list)

    @property
    def selected_frame_features(self) -> list[np.ndarray]:
        return [f for group in self.clip_groups for f in group]

    @property
    def last_clip_features(self) -> list[np.ndarray]:
        return list(self.clip_groups[-1]) if self.clip_groups else []

    @property
    def selected_features(self) -> list[np.ndarray]:
        return self.selected_frame_features + self.selected_region_features

    @property
    def tool_call_count(self) -> int:
        return len(self.transcript)


def init_state(video: Video, encoder) -> RuminationState:
    if not video.frames:
        raise InputError(f"video {video.name} has no frames")
    feats = [encoder(video.frame_pixels(i)) for i in range(len(video.frames))]
    return RuminationState(all_frame_features=feats)


def apply_clip(state: RuminationState, indices) -> RuminationState:
    indices = list(indices)
    if not indices:
        raise InputError("clip requires at least one frame index")
    if len(set(indices)) != len(indices):
        raise InputError(f"clip indices must be distinct, got {indices}")
    n = len(state.all_frame_features)
    bad = [i for i in indices if i < 0 or i >= n]
    if bad:
        raise InputError(f"clip indices {bad} out of range [0, {n})")
    state.clip_groups.append([state.all_frame_features[i] for i in indices])
    state.transcript.append(ToolCall.clip(indices))
    return state


def apply_crop(state: RuminationState, video: Video, frame_index: int,
               box: Box, encoder) -> RuminationState:
    pixels = video.crop_pixels(frame_index, box)
    state.selected_region_features.append(encoder(pixels))
    state.transcript.append(ToolCall.crop(frame_index, box))
    return state


@dataclass
class EpisodeRecord:
    """Outcome of executing one trajectory; construct via run_trajectory."""

    instance_id: str
    final_answer: str
    state: RuminationState
    format_ok: bool
    notes: tuple[str, ...] = ()


def run_trajectory(t: Trajectory, video: Video, encoder,
                   max_calls: int = 8) -> EpisodeRecord:
    """Execute a trajectory's tool calls in order against a fresh state.

    Calls beyond ``max_calls`` are ignored and mark the episode
    malformed; execution failures (bad frame index, out-of-bounds box)
    and wire-format failures likewise downgrade ``format_ok`` rather than
    raising.
    """
    state = init_state(video, encoder)
    format_ok = True
    notes: list[str] = []

    for idx, turn in enumerate(t.turns):
        try:
            if parse_turn(serialize_turn(turn)) != turn:
                format_ok = False
                notes.append(f"turn {idx}: wire round-trip mismatch")
        except TurnParseError as exc:
            format_ok = False
            notes.append(f"turn {idx}: {exc}")

    answers = [turn.final_answer for turn in t.turns if turn.final_answer is not None]
    if len(answers) != 1:
        format_ok = False
        notes.append(f"expected exactly one boxed answer, found {len(answers)}")
    final_answer = answers[-1] if answers else ""

    for idx, turn in enumerate(t.turns):
        call = turn.tool_call
        if call is None:
            continue
        if state.tool_call_count >= max_calls:
            format_ok = False
            notes.append(f"turn {idx}: call budget {max_calls} exhausted; remaining calls ignored")
            break
        try:
            if call.name == "clip":
                apply_clip(state, call.frames)
            else:
                apply_crop(state, video, call.frame, call.box, encoder)
        except InputError as exc:
            format_ok = False
            notes.append(f"turn {idx}: {exc}")

    return EpisodeRecord(instance_id=t.instance_id, final_answer=final_answer,
                         state=state, format_ok=format_ok, notes=tuple(notes))
