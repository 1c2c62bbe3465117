"""Rule-based evidence matching and difficulty-based candidate routing.

For each question the matcher scans every frame's token-level OCR for the
best fuzzy match against the gold answers, refines hits to their enclosing
paragraph region, pads the result, and (for visual questions) merges in
object boxes whose labels match answer or question tokens. Unmatched
questions get a difficulty score and are either kept as RL candidates or
dropped.

Ties anywhere are broken by lowest frame index, then smallest box area,
then lexicographic text, so identical inputs always yield identical
records.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field

from .corpus import Box, Corpus, FrameAnnotation, QAInstance
from .errors import ConfigError, CorpusError
from .text import score_name, score_text, tokenize


@dataclass(frozen=True)
class MatcherConfig:
    text_match_threshold: float = 0.8
    name_match_threshold: float = 0.8
    extend_pad_fraction: float = 0.1
    difficulty_band: tuple[float, float] = (0.2, 0.8)

    def __post_init__(self):
        for name in ("text_match_threshold", "name_match_threshold"):
            v = getattr(self, name)
            if not isinstance(v, numbers.Real) or not (0.0 < v <= 1.0):
                raise ConfigError(f"{name} must be in (0, 1], got {v!r}")
        if self.extend_pad_fraction < 0:
            raise ConfigError(
                f"extend_pad_fraction must be >= 0, got {self.extend_pad_fraction!r}")
        lo, hi = self.difficulty_band
        if not (0.0 <= lo < hi <= 1.0):
            raise ConfigError(
                f"difficulty_band must satisfy 0 <= lo < hi <= 1, got {self.difficulty_band!r}")


@dataclass(frozen=True)
class EvidenceRecord:
    """Matcher output for one question.

    ``text_box_per_frame`` holds the refined and padded text region;
    ``evidence_box_per_frame`` holds the final evidence region, which for
    visual questions may additionally cover matched object boxes and
    always contains the corresponding text box.
    """

    instance_id: str
    relevant_frames: frozenset[int]
    text_box_per_frame: dict[int, Box] = field(default_factory=dict)
    evidence_box_per_frame: dict[int, Box] = field(default_factory=dict)
    matched: bool = False

    def __post_init__(self):
        for f in self.text_box_per_frame:
            if f not in self.relevant_frames:
                raise ValueError(f"text box frame {f} not in relevant_frames")
        for f, box in self.evidence_box_per_frame.items():
            if f not in self.relevant_frames:
                raise ValueError(f"evidence box frame {f} not in relevant_frames")
            text = self.text_box_per_frame.get(f)
            if text is not None and not box.contains(text):
                raise ValueError(
                    f"evidence box {box.as_list()} does not contain text box "
                    f"{text.as_list()} in frame {f}")


def _round_half_up(x: float) -> int:
    # round() is banker's rounding; evidence geometry wants plain half-up.
    import math
    return math.floor(x + 0.5)


def extend_box(box: Box, frame_w: int, frame_h: int, pad_fraction: float) -> Box:
    """Pad each side outward by ``pad_fraction`` of the box's own dimension.

    Rounds half-up and clamps to the frame, so the result always contains
    the input and never leaves the image.
    """
    pad_x = _round_half_up(box.width * pad_fraction)
    pad_y = _round_half_up(box.height * pad_fraction)
    return Box(max(0, box.x1 - pad_x), max(0, box.y1 - pad_y),
               min(frame_w, box.x2 + pad_x), min(frame_h, box.y2 + pad_y))


def merge_boxes(boxes) -> Box:
    """Smallest axis-aligned box containing every input box."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("merge_boxes requires at least one box")
    merged = boxes[0]
    for b in boxes[1:]:
        merged = merged.union_box(b)
    return merged


def _best_token_match(frame: FrameAnnotation, answers: tuple[str, ...],
                      threshold: float):
    """Best token-level OCR hit at or above ``threshold``; None if absent.

    Returns (score, detection). Deterministic under score ties via
    (area, text) ordering; frame-level ties are handled by the caller
    iterating frames in index order.
    """
    best = None
    for det in frame.ocr:
        if det.level != "token":
            continue
        s = score_text(det.text, answers)
        if s < threshold:
            continue
        key = (-s, det.box.area, det.text)
        if best is None or key < best[0]:
            best = (key, s, det)
    if best is None:
        return None
    return best[1], best[2]


def _refine_to_paragraph(frame: FrameAnnotation, token_box: Box) -> Box:
    """Replace a token box with the paragraph region of maximal IoU.

    When no paragraph overlaps it at all the token box stands as-is.
    """
    best_key = None
    best_box = None
    for det in frame.ocr:
        if det.level != "paragraph":
            continue
        overlap = token_box.iou(det.box)
        if overlap <= 0.0:
            continue
        key = (-overlap, det.box.area, det.text)
        if best_key is None or key < best_key:
            best_key = key
            best_box = det.box
    return best_box if best_box is not None else token_box


def match_question(q: QAInstance, corpus: Corpus,
                   cfg: MatcherConfig | None = None) -> EvidenceRecord:
    """Extract supporting frames and evidence boxes for one question."""
    cfg = cfg or MatcherConfig()
    video = corpus.video_for(q)

    # Pass 1: best OCR token hit per frame.
    hits: dict[int, tuple[float, Box]] = {}
    for frame in video.frames:
        found = _best_token_match(frame, q.answers, cfg.text_match_threshold)
        if found is None:
            continue
        score, det = found
        refined = _refine_to_paragraph(frame, det.box)
        extended = extend_box(refined, frame.width, frame.height,
                              cfg.extend_pad_fraction)
        hits[frame.index] = (score, extended)

    if not hits:
        return EvidenceRecord(instance_id=q.id, relevant_frames=frozenset(),
                              matched=False)

    # Frame selection: single-frame questions keep only the best-scoring
    # frame (ties to the lowest index, which iteration order guarantees).
    if q.src_temporal == "single":
        best_frame = max(sorted(hits), key=lambda f: hits[f][0])
        selected = {best_frame: hits[best_frame]}
    else:
        selected = hits

    text_boxes = {f: box for f, (_, box) in selected.items()}

    if q.src_modality == "text":
        evidence = dict(text_boxes)
    else:
        name_pool = tokenize(" ".join(q.answers)) | tokenize(q.question)
        evidence = {}
        for f, tbox in text_boxes.items():
            frame = video.frame_annotation(f)
            parts = [tbox]
            for det in frame.objects:
                if score_name(det.label, name_pool) >= cfg.name_match_threshold:
                    parts.append(det.box)
            evidence[f] = merge_boxes(parts)

    return EvidenceRecord(
        instance_id=q.id,
        relevant_frames=frozenset(text_boxes),
        text_box_per_frame=text_boxes,
        evidence_box_per_frame=evidence,
        matched=True,
    )


def estimate_difficulty(q: QAInstance, corpus: Corpus) -> float:
    """1 minus the best OCR-to-answer similarity anywhere in the video.

    Verbatim answers give 0; videos whose OCR never resembles the answer
    approach 1. All OCR levels count.
    """
    video = corpus.video_for(q)
    best = 0.0
    for frame in video.frames:
        for det in frame.ocr:
            s = score_text(det.text, q.answers)
            if s > best:
                best = s
    return 1.0 - best


def partition_rl_candidates(instances, corpus: Corpus,
                            cfg: MatcherConfig | None = None):
    """Split unmatched instances into RL candidates vs dropped.

    Matched instances are excluded entirely; they flow to trajectory
    synthesis instead. Returns (kept, dropped) lists of instances.
    """
    cfg = cfg or MatcherConfig()
    lo, hi = cfg.difficulty_band
    kept, dropped = [], []
    for inst in instances:
        record = match_question(inst, corpus, cfg)
        if record.matched:
            continue
        difficulty = estimate_difficulty(inst, corpus)
        if lo <= difficulty <= hi:
            kept.append(inst)
        else:
            dropped.append(inst)
    return kept, dropped


def evidence_to_json(rec: EvidenceRecord) -> dict:
    return {
        "instance_id": rec.instance_id,
        "matched": rec.matched,
        "relevant_frames": sorted(rec.relevant_frames),
        "text_box_per_frame": {str(f): b.as_list()
                               for f, b in sorted(rec.text_box_per_frame.items())},
        "evidence_box_per_frame": {str(f): b.as_list()
                                   for f, b in sorted(rec.evidence_box_per_frame.items())},
    }


def evidence_from_json(raw: dict) -> EvidenceRecord:
    try:
        return EvidenceRecord(
            instance_id=raw["instance_id"],
            matched=bool(raw["matched"]),
            relevant_frames=frozenset(raw["relevant_frames"]),
            text_box_per_frame={int(f): Box.from_list(b)
                                for f, b in raw["text_box_per_frame"].items()},
            evidence_box_per_frame={int(f): Box.from_list(b)
                                    for f, b in raw["evidence_box_per_frame"].items()},
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise CorpusError(f"bad evidence record: {exc}") from exc
