"""Shared data builders for the test suite.

Random in-memory corpora drive the matcher cross-checks, random wire
trajectories drive the round-trip tests, and a small deterministic
on-disk corpus drives the CLI and review-service tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from videor4.corpus import (Box, Corpus, FrameAnnotation, ObjectDetection,
                            OcrDetection, QAInstance, Video, save_video)
from videor4.trajectory import PROVENANCES, ToolCall, Trajectory, Turn

VOCAB = ("station", "play", "hello", "market", "orange", "bridge", "castle",
         "planet", "silver", "monkey", "guitar", "window", "bottle", "father",
         "garden", "rocket", "temple", "violet", "wizard", "yellow")

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def mutate_word(word: str, rng: np.random.Generator, n_edits: int) -> str:
    chars = list(word)
    for _ in range(n_edits):
        op = rng.integers(3)
        pos = int(rng.integers(len(chars))) if chars else 0
        letter = _LETTERS[rng.integers(len(_LETTERS))]
        if op == 0 and chars:
            chars[pos] = letter
        elif op == 1:
            chars.insert(pos, letter)
        elif chars and len(chars) > 1:
            del chars[pos]
    return "".join(chars) or "x"


def rand_box(rng: np.random.Generator, width: int, height: int,
             max_side: int = 24) -> Box:
    w = int(rng.integers(2, max_side))
    h = int(rng.integers(2, max_side))
    x1 = int(rng.integers(0, width - w))
    y1 = int(rng.integers(0, height - h))
    return Box(x1, y1, x1 + w, y1 + h)


def random_matching_corpus(rng: np.random.Generator) -> Corpus:
    """A corpus of annotation-only videos plus instances over all four
    (temporal, modality) combinations. Pixels are never touched."""
    size = 64
    n_videos = int(rng.integers(1, 6))
    videos: dict[str, Video] = {}
    planted: dict[str, str] = {}
    for v in range(n_videos):
        name = f"rv{v}"
        n_frames = int(rng.integers(2, 9))
        plant_word = VOCAB[rng.integers(len(VOCAB))]
        planted[name] = plant_word
        plant_frames = set(
            int(i) for i in rng.choice(n_frames,
                                       size=int(rng.integers(1, min(4, n_frames + 1))),
                                       replace=False))
        frames = []
        for f in range(n_frames):
            n_det = int(rng.integers(0, 11))
            ocr = []
            for _ in range(n_det):
                word = VOCAB[rng.integers(len(VOCAB))]
                if rng.random() < 0.4:
                    word = mutate_word(word, rng, int(rng.integers(1, 3)))
                level = "token" if rng.random() < 0.7 else "paragraph"
                ocr.append(OcrDetection(text=word, box=rand_box(rng, size, size),
                                        level=level))
            if f in plant_frames:
                token_box = rand_box(rng, size, size, max_side=12)
                ocr.append(OcrDetection(text=plant_word, box=token_box, level="token"))
                if rng.random() < 0.6:
                    # paragraph overlapping the planted token
                    x1 = max(0, token_box.x1 - int(rng.integers(0, 4)))
                    y1 = max(0, token_box.y1 - int(rng.integers(0, 4)))
                    x2 = min(size, token_box.x2 + int(rng.integers(0, 8)))
                    y2 = min(size, token_box.y2 + int(rng.integers(0, 8)))
                    ocr.append(OcrDetection(text=f"{plant_word} context",
                                            box=Box(x1, y1, x2, y2),
                                            level="paragraph"))
            objects = []
            for _ in range(int(rng.integers(0, 4))):
                label = plant_word if rng.random() < 0.5 else VOCAB[rng.integers(len(VOCAB))]
                if rng.random() < 0.3:
                    label = mutate_word(label, rng, 1)
                objects.append(ObjectDetection(label=label,
                                               box=rand_box(rng, size, size)))
            frames.append(FrameAnnotation(index=f, width=size, height=size,
                                          ocr=tuple(ocr), objects=tuple(objects)))
        videos[name] = Video(name=name, root=Path("/nonexistent"),
                             frames=tuple(frames))

    combos = [("single", "text"), ("single", "visual"),
              ("multi", "text"), ("multi", "visual")]
    instances = []
    serial = 0
    for temporal, modality in combos:
        for _ in range(int(rng.integers(2, 5))):
            vname = f"rv{int(rng.integers(n_videos))}"
            roll = rng.random()
            if roll < 0.5:
                answer = planted[vname]
            elif roll < 0.75:
                answer = VOCAB[rng.integers(len(VOCAB))]
            else:
                answer = "".join(_LETTERS[rng.integers(26)]
                                 for _ in range(int(rng.integers(4, 9))))
            answers = [answer]
            if rng.random() < 0.3:
                answers.append(VOCAB[rng.integers(len(VOCAB))])
            instances.append(QAInstance(
                id=f"q{serial:03d}",
                video=vname,
                question=f"what does the sign near the {VOCAB[rng.integers(len(VOCAB))]} say",
                answers=tuple(answers),
                src_temporal=temporal,
                src_modality=modality,
            ))
            serial += 1
    return Corpus(instances=tuple(instances), videos=videos)


# -- random wire trajectories --------------------------------------------

_SAFE_CHARS = ("abcdefghijklmnopqrstuvwxyz"
               "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,;:-()[]'\n")
_FORBIDDEN = ("<tool_call>", "</tool_call>", "\\boxed{")


def rand_text(rng: np.random.Generator, max_len: int = 60) -> str:
    while True:
        n = int(rng.integers(0, max_len))
        text = "".join(_SAFE_CHARS[rng.integers(len(_SAFE_CHARS))] for _ in range(n))
        if not any(marker in text for marker in _FORBIDDEN):
            return text


def rand_answer(rng: np.random.Generator) -> str:
    core = rand_text(rng, 20).replace("\n", " ")
    if rng.random() < 0.2:
        return f"{core}{{{rand_text(rng, 6).strip() or 'x'}}}"
    return core


def rand_tool_call(rng: np.random.Generator) -> ToolCall:
    if rng.random() < 0.5:
        n = int(rng.integers(1, 5))
        frames = sorted(int(i) for i in rng.choice(12, size=n, replace=False))
        return ToolCall.clip(frames)
    box = rand_box(rng, 64, 64)
    return ToolCall.crop(int(rng.integers(0, 12)), box)


def rand_trajectory(rng: np.random.Generator, serial: int) -> Trajectory:
    n_turns = int(rng.integers(1, 6))
    turns = []
    for i in range(n_turns - 1):
        call = rand_tool_call(rng) if rng.random() < 0.7 else None
        turns.append(Turn(think=rand_text(rng), tool_call=call))
    turns.append(Turn(think=rand_text(rng), final_answer=rand_answer(rng)))
    return Trajectory(
        id=f"rt{serial:04d}",
        instance_id=f"ri{serial:04d}",
        provenance=PROVENANCES[rng.integers(len(PROVENANCES))],
        turns=tuple(turns),
    )


# -- in-memory pixel videos ----------------------------------------------

def gradient_video(name: str, n_frames: int = 3, size: int = 48) -> Video:
    """Deterministic in-memory video whose frames differ from each other."""
    frames = []
    cache = {}
    cols = np.linspace(0.0, 1.0, size)[None, :]
    rows = np.linspace(0.0, 1.0, size)[:, None]
    for f in range(n_frames):
        arr = 0.1 + 0.5 * (f + 1) / n_frames * cols + 0.3 * rows / (f + 1)
        cache[f] = np.clip(arr, 0.0, 1.0)
        frames.append(FrameAnnotation(index=f, width=size, height=size))
    video = Video(name=name, root=Path("/nonexistent"), frames=tuple(frames))
    video._pixel_cache.update(cache)
    return video


# -- deterministic on-disk corpus -----------------------------------------

def _frame_pixels(f: int, size: int) -> np.ndarray:
    cols = np.linspace(0.0, 1.0, size)[None, :]
    rows = np.linspace(0.0, 1.0, size)[:, None]
    return np.clip(0.15 + 0.4 * (f + 1) / 3 * cols + 0.25 * rows, 0.0, 1.0)


def write_demo_corpus(root: Path) -> dict:
    """A 2-video, 5-instance corpus with pixels on disk.

    Layout matches the loader: instances.jsonl plus videos/<name>/ with
    annotations.json and frame_%06d.png. Returns expected match counts.
    """
    size = 48
    vid0 = [
        FrameAnnotation(index=0, width=size, height=size, ocr=(
            OcrDetection("delta", Box(8, 8, 20, 14), "token"),
            OcrDetection("kappa", Box(30, 8, 42, 14), "token"),
            OcrDetection("delta kappa menu", Box(6, 6, 44, 16), "paragraph"),
        ), objects=(
            ObjectDetection("delta", Box(28, 28, 40, 40)),
            ObjectDetection("chair", Box(2, 30, 10, 44)),
        )),
        FrameAnnotation(index=1, width=size, height=size, ocr=(
            OcrDetection("delte", Box(10, 20, 22, 26), "token"),
            OcrDetection("abcxyz", Box(26, 20, 40, 26), "token"),
        )),
        FrameAnnotation(index=2, width=size, height=size, ocr=(
            OcrDetection("omega", Box(12, 30, 24, 36), "token"),
        )),
    ]
    vid1 = [
        FrameAnnotation(index=0, width=size, height=size, ocr=(
            OcrDetection("omega", Box(10, 10, 22, 16), "token"),
        )),
        FrameAnnotation(index=1, width=size, height=size, ocr=(
            OcrDetection("sigma", Box(10, 10, 22, 16), "token"),
        )),
        FrameAnnotation(index=2, width=size, height=size, ocr=(
            OcrDetection("omega", Box(12, 20, 24, 26), "token"),
            OcrDetection("omega sign", Box(10, 18, 30, 30), "paragraph"),
        )),
    ]
    for name, frames in (("vid0", vid0), ("vid1", vid1)):
        pixels = [_frame_pixels(fr.index, size) for fr in frames]
        save_video(root / "videos" / name, list(frames), pixels)

    instances = [
        {"id": "inst-st", "video": "vid0", "question": "what does the sign say",
         "answers": ["delta"], "src_temporal": "single", "src_modality": "text"},
        {"id": "inst-sv", "video": "vid0", "question": "what is on the delta poster",
         "answers": ["delta"], "src_temporal": "single", "src_modality": "visual"},
        {"id": "inst-mt", "video": "vid1", "question": "which word repeats",
         "answers": ["omega"], "src_temporal": "multi", "src_modality": "text"},
        {"id": "inst-band", "video": "vid0", "question": "what is written in the corner",
         "answers": ["abcdef"], "src_temporal": "single", "src_modality": "text"},
        {"id": "inst-drop", "video": "vid1", "question": "what is the code",
         "answers": ["qqqqqqqq"], "src_temporal": "single", "src_modality": "text"},
    ]
    with (root / "instances.jsonl").open("w") as fh:
        for inst in instances:
            fh.write(json.dumps(inst) + "\n")
    return {"matched": 3, "unmatched": 2, "rl_kept": 1, "rl_dropped": 1}


def write_demo_config(path: Path, corpus_dir: Path, out_dir: Path,
                      **overrides) -> Path:
    """Minimal YAML config pointing at the demo corpus; keyword overrides
    are section dicts merged over the defaults."""
    import yaml

    raw = {
        "paths": {"corpus_dir": str(corpus_dir), "out_dir": str(out_dir)},
        "train": {
            "plans": ["full"],
            "sft_steps": 4,
            "rl_steps": 3,
            "task": {"n_frames": 2, "grid": 2, "frame_size": 16,
                     "n_candidates": 2, "n_single": 2, "n_mixed": 2,
                     "n_eval": 2, "seed": 7},
        },
    }
    for section, values in overrides.items():
        raw.setdefault(section, {}).update(values)
    path.write_text(yaml.safe_dump(raw))
    return path
