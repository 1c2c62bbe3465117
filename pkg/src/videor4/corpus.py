"""Corpus model: videos, frames, annotations, QA instances, and disk IO.

Box convention everywhere: integer pixel coordinates over a top-left
origin, half-open on the max edge, so a box covers pixels with
x1 <= x < x2 and y1 <= y < y2 and must satisfy x1 < x2, y1 < y2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CorpusError

FRAME_NAME = "frame_{:06d}.png"

VALID_TEMPORAL = ("single", "multi")
VALID_MODALITY = ("text", "visual")
VALID_OCR_LEVELS = ("paragraph", "token")


@dataclass(frozen=True)
class Box:
    """Axis-aligned integer pixel box, half-open max edge."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if not all(isinstance(v, int) for v in (self.x1, self.y1, self.x2, self.y2)):
            raise CorpusError(f"box coordinates must be integers, got {self.as_list()}")
        if self.x1 < 0 or self.y1 < 0:
            raise CorpusError(f"box min corner must be non-negative, got {self.as_list()}")
        if self.x1 >= self.x2 or self.y1 >= self.y2:
            raise CorpusError(f"box must have positive extent, got {self.as_list()}")

    @classmethod
    def from_list(cls, raw, *, context: str = "box") -> "Box":
        if not isinstance(raw, (list, tuple)) or len(raw) != 4:
            raise CorpusError(f"{context} must be a 4-element list, got {raw!r}")
        vals = []
        for v in raw:
            # bool is an int subclass; reject it explicitly.
            if isinstance(v, bool) or not isinstance(v, int):
                raise CorpusError(f"{context} coordinates must be integers, got {raw!r}")
            vals.append(v)
        return cls(*vals)

    def as_list(self) -> list[int]:
        return [self.x1, self.y1, self.x2, self.y2]

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def intersect(self, other: "Box") -> int:
        """Intersection area in pixels (0 when disjoint)."""
        w = min(self.x2, other.x2) - max(self.x1, other.x1)
        h = min(self.y2, other.y2) - max(self.y1, other.y1)
        if w <= 0 or h <= 0:
            return 0
        return w * h

    def iou(self, other: "Box") -> float:
        inter = self.intersect(other)
        if inter == 0:
            return 0.0
        return inter / (self.area + other.area - inter)

    def contains(self, other: "Box") -> bool:
        return (self.x1 <= other.x1 and self.y1 <= other.y1
                and self.x2 >= other.x2 and self.y2 >= other.y2)

    def union_box(self, other: "Box") -> "Box":
        """Smallest box covering both (bounding-box merge, not set union)."""
        return Box(min(self.x1, other.x1), min(self.y1, other.y1),
                   max(self.x2, other.x2), max(self.y2, other.y2))

    def clamp(self, width: int, height: int) -> "Box":
        """Clip to an image of the given size; raises if nothing remains."""
        x1 = max(0, min(self.x1, width - 1))
        y1 = max(0, min(self.y1, height - 1))
        x2 = max(x1 + 1, min(self.x2, width))
        y2 = max(y1 + 1, min(self.y2, height))
        return Box(x1, y1, x2, y2)


@dataclass(frozen=True)
class OcrDetection:
    """One OCR hit: recognized text, its box, and its granularity level."""

    text: str
    box: Box
    level: str  # "paragraph" or "token"

    def __post_init__(self):
        if self.level not in VALID_OCR_LEVELS:
            raise CorpusError(f"ocr level must be one of {VALID_OCR_LEVELS}, got {self.level!r}")


@dataclass(frozen=True)
class ObjectDetection:
    """One detected object: label and box."""

    label: str
    box: Box


@dataclass(frozen=True)
class FrameAnnotation:
    """Per-frame metadata: size plus OCR and object detections."""

    index: int
    width: int
    height: int
    ocr: tuple[OcrDetection, ...] = ()
    objects: tuple[ObjectDetection, ...] = ()

    def __post_init__(self):
        if self.index < 0:
            raise CorpusError(f"frame index must be >= 0, got {self.index}")
        if self.width <= 0 or self.height <= 0:
            raise CorpusError(f"frame size must be positive, got {self.width}x{self.height}")
        for det in self.ocr:
            if det.box.x2 > self.width or det.box.y2 > self.height:
                raise CorpusError(
                    f"ocr box {det.box.as_list()} exceeds frame {self.index} "
                    f"bounds {self.width}x{self.height}")
        for det in self.objects:
            if det.box.x2 > self.width or det.box.y2 > self.height:
                raise CorpusError(
                    f"object box {det.box.as_list()} exceeds frame {self.index} "
                    f"bounds {self.width}x{self.height}")


@dataclass(frozen=True)
class QAInstance:
    """One question over one video, with gold answers and source tags."""

    id: str
    video: str
    question: str
    answers: tuple[str, ...]
    src_temporal: str  # "single" or "multi"
    src_modality: str  # "text" or "visual"

    def __post_init__(self):
        if not self.id:
            raise CorpusError("instance id must be non-empty")
        if not self.answers:
            raise CorpusError(f"instance {self.id}: answers must be non-empty")
        if self.src_temporal not in VALID_TEMPORAL:
            raise CorpusError(
                f"instance {self.id}: src_temporal must be one of {VALID_TEMPORAL}, "
                f"got {self.src_temporal!r}")
        if self.src_modality not in VALID_MODALITY:
            raise CorpusError(
                f"instance {self.id}: src_modality must be one of {VALID_MODALITY}, "
                f"got {self.src_modality!r}")


@dataclass
class Video:
    """A video directory: ordered frame annotations plus lazily-read pixels."""

    name: str
    root: Path
    frames: tuple[FrameAnnotation, ...]
    _pixel_cache: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def frame_annotation(self, index: int) -> FrameAnnotation:
        if index < 0 or index >= len(self.frames):
            raise CorpusError(
                f"video {self.name}: frame index {index} out of range "
                f"[0, {len(self.frames)})")
        return self.frames[index]

    def frame_path(self, index: int) -> Path:
        return self.root / FRAME_NAME.format(index)

    def frame_pixels(self, index: int) -> np.ndarray:
        """Grayscale float array in [0, 1], shape (height, width).

        Color inputs are reduced by an unweighted channel average.
        """
        ann = self.frame_annotation(index)
        cached = self._pixel_cache.get(index)
        if cached is not None:
            return cached
        path = self.frame_path(index)
        if not path.exists():
            raise CorpusError(f"video {self.name}: missing frame file {path}")
        with Image.open(path) as im:
            arr = np.asarray(im, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr.mean(axis=2)
        arr = arr / 255.0
        if arr.shape != (ann.height, ann.width):
            raise CorpusError(
                f"video {self.name}: frame {index} pixels are {arr.shape[1]}x{arr.shape[0]} "
                f"but annotation says {ann.width}x{ann.height}")
        self._pixel_cache[index] = arr
        return arr

    def crop_pixels(self, index: int, box: Box) -> np.ndarray:
        """Pixels of ``box`` within frame ``index`` (half-open slicing)."""
        ann = self.frame_annotation(index)
        if box.x2 > ann.width or box.y2 > ann.height:
            raise CorpusError(
                f"video {self.name}: crop {box.as_list()} exceeds frame {index} "
                f"bounds {ann.width}x{ann.height}")
        pixels = self.frame_pixels(index)
        return pixels[box.y1:box.y2, box.x1:box.x2]


@dataclass
class Corpus:
    """Instances plus the videos they reference."""

    instances: tuple[QAInstance, ...]
    videos: dict[str, Video]

    def video_for(self, instance: QAInstance) -> Video:
        video = self.videos.get(instance.video)
        if video is None:
            raise CorpusError(f"instance {instance.id}: unknown video {instance.video!r}")
        return video


def _require(mapping: dict, key: str, *, file: str, line: int | None = None):
    if key not in mapping:
        raise CorpusError(f"missing required key {key!r}", file=file, line=line)
    return mapping[key]


def parse_instance(raw: dict, *, file: str = "instances.jsonl",
                   line: int | None = None) -> QAInstance:
    answers = _require(raw, "answers", file=file, line=line)
    if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
        raise CorpusError("answers must be a list of strings", file=file, line=line)
    try:
        return QAInstance(
            id=str(_require(raw, "id", file=file, line=line)),
            video=str(_require(raw, "video", file=file, line=line)),
            question=str(_require(raw, "question", file=file, line=line)),
            answers=tuple(answers),
            src_temporal=_require(raw, "src_temporal", file=file, line=line),
            src_modality=_require(raw, "src_modality", file=file, line=line),
        )
    except CorpusError as exc:
        if exc.file is not None:
            raise
        raise CorpusError(str(exc), file=file, line=line) from exc
    except (TypeError, ValueError) as exc:
        raise CorpusError(str(exc), file=file, line=line) from exc


def parse_frame_annotation(raw: dict, *, file: str) -> FrameAnnotation:
    ocr = []
    for det in raw.get("ocr", []):
        ocr.append(OcrDetection(
            text=str(_require(det, "text", file=file)),
            box=Box.from_list(_require(det, "box", file=file), context="ocr box"),
            level=_require(det, "level", file=file),
        ))
    objects = []
    for det in raw.get("objects", []):
        objects.append(ObjectDetection(
            label=str(_require(det, "label", file=file)),
            box=Box.from_list(_require(det, "box", file=file), context="object box"),
        ))
    return FrameAnnotation(
        index=int(_require(raw, "index", file=file)),
        width=int(_require(raw, "width", file=file)),
        height=int(_require(raw, "height", file=file)),
        ocr=tuple(ocr),
        objects=tuple(objects),
    )


def load_video(root: Path, name: str) -> Video:
    """Read one video directory: annotations.json plus frame files on demand."""
    ann_path = root / "annotations.json"
    if not ann_path.exists():
        raise CorpusError(f"video {name}: missing {ann_path}")
    try:
        raw = json.loads(ann_path.read_text())
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid JSON: {exc}", file=str(ann_path)) from exc
    frames_raw = _require(raw, "frames", file=str(ann_path))
    frames = tuple(parse_frame_annotation(fr, file=str(ann_path)) for fr in frames_raw)
    for pos, fr in enumerate(frames):
        if fr.index != pos:
            raise CorpusError(
                f"video {name}: frame annotations must be dense and ordered; "
                f"position {pos} has index {fr.index}")
    return Video(name=name, root=root, frames=frames)


def load_corpus(corpus_dir: str | Path) -> Corpus:
    """Read ``instances.jsonl`` plus every referenced ``videos/<name>/`` directory."""
    corpus_dir = Path(corpus_dir)
    inst_path = corpus_dir / "instances.jsonl"
    if not inst_path.exists():
        raise CorpusError(f"missing {inst_path}")
    instances = []
    seen_ids: set[str] = set()
    with inst_path.open() as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text:
                continue
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc}", file=str(inst_path),
                                  line=lineno) from exc
            inst = parse_instance(raw, file=str(inst_path), line=lineno)
            if inst.id in seen_ids:
                raise CorpusError(f"duplicate instance id {inst.id!r}",
                                  file=str(inst_path), line=lineno)
            seen_ids.add(inst.id)
            instances.append(inst)
    videos: dict[str, Video] = {}
    for inst in instances:
        if inst.video not in videos:
            videos[inst.video] = load_video(corpus_dir / "videos" / inst.video, inst.video)
    return Corpus(instances=tuple(instances), videos=videos)


def save_video(video_dir: Path, frames: list[FrameAnnotation],
               pixel_arrays: list[np.ndarray] | None = None) -> None:
    """Write annotations.json and, when given, frame PNGs.

    ``pixel_arrays`` entries are float arrays in [0, 1] or uint8 arrays.
    """
    video_dir.mkdir(parents=True, exist_ok=True)
    payload = {"frames": [frame_annotation_to_json(fr) for fr in frames]}
    (video_dir / "annotations.json").write_text(json.dumps(payload, indent=2) + "\n")
    if pixel_arrays is None:
        return
    if len(pixel_arrays) != len(frames):
        raise ValueError("pixel_arrays must match frames one-to-one")
    for fr, arr in zip(frames, pixel_arrays):
        write_frame_png(video_dir / FRAME_NAME.format(fr.index), arr)


def write_frame_png(path: Path, arr: np.ndarray) -> None:
    if arr.dtype != np.uint8:
        arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
        arr = np.round(arr * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def frame_annotation_to_json(fr: FrameAnnotation) -> dict:
    out: dict = {"index": fr.index, "width": fr.width, "height": fr.height}
    out["ocr"] = [{"text": d.text, "box": d.box.as_list(), "level": d.level}
                  for d in fr.ocr]
    out["objects"] = [{"label": d.label, "box": d.box.as_list()} for d in fr.objects]
    return out


def instance_to_json(inst: QAInstance) -> dict:
    return {
        "id": inst.id,
        "video": inst.video,
        "question": inst.question,
        "answers": list(inst.answers),
        "src_temporal": inst.src_temporal,
        "src_modality": inst.src_modality,
    }


def write_jsonl(path: str | Path, records: list[dict]) -> None:
    with Path(path).open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with Path(path).open() as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text:
                continue
            try:
                out.append(json.loads(text))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc}", file=str(path), line=lineno) from exc
    return out
