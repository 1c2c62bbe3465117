"""Multi-turn rumination trajectories: wire format, templates, validation.

A trajectory is a sequence of turns. Each turn carries think text and at
most one of a tool call or a boxed final answer; the final answer appears
in the last turn and only there. Tool calls serialize as
``<tool_call>{"name":...,"arguments":{...}}</tool_call>`` and answers as
``\\boxed{...}``.

Rendered trajectories contain ``{{...}}`` placeholder directives in think
text; ``fill_placeholders`` resolves them through a captioner client.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from .corpus import Box, Corpus, QAInstance, Video
from .errors import InputError, TurnParseError
from .matching import EvidenceRecord
from .metrics import exact_match

PROVENANCES = ("synthesized", "edited", "model_rollout")
TEMPLATE_IDS = ("auto", "single_tool", "mixed")

TOOL_OPEN = "<tool_call>"
TOOL_CLOSE = "</tool_call>"
BOXED = "\\boxed{"

_PLACEHOLDER = re.compile(r"\{\{(.+?)\}\}")


@dataclass(frozen=True)
class ToolCall:
    """A clip (frame selection) or crop (region extraction) invocation."""

    name: str
    frames: tuple[int, ...] | None = None
    frame: int | None = None
    box: Box | None = None

    def __post_init__(self):
        if self.name == "clip":
            if not self.frames:
                raise InputError("clip requires at least one frame index")
            if len(set(self.frames)) != len(self.frames):
                raise InputError(f"clip frames must be distinct, got {list(self.frames)}")
            if any(f < 0 for f in self.frames):
                raise InputError(f"clip frames must be non-negative, got {list(self.frames)}")
            if self.frame is not None or self.box is not None:
                raise InputError("clip takes only frame indices")
        elif self.name == "crop":
            if self.frame is None or self.frame < 0:
                raise InputError(f"crop requires a non-negative frame index, got {self.frame}")
            if self.box is None:
                raise InputError("crop requires a box")
            if self.frames is not None:
                raise InputError("crop takes a single frame")
        else:
            raise InputError(f"unknown tool name {self.name!r}")

    @classmethod
    def clip(cls, frames) -> "ToolCall":
        return cls(name="clip", frames=tuple(frames))

    @classmethod
    def crop(cls, frame: int, box: Box) -> "ToolCall":
        return cls(name="crop", frame=frame, box=box)

    def to_json(self) -> dict:
        if self.name == "clip":
            return {"name": "clip", "arguments": {"frames": list(self.frames)}}
        return {"name": "crop",
                "arguments": {"frame": self.frame, "box": self.box.as_list()}}

    @classmethod
    def from_json(cls, raw: dict) -> "ToolCall":
        if not isinstance(raw, dict):
            raise InputError(f"tool call must be an object, got {raw!r}")
        name = raw.get("name")
        args = raw.get("arguments")
        if not isinstance(args, dict):
            raise InputError(f"tool call arguments must be an object, got {args!r}")
        if name == "clip":
            frames = args.get("frames")
            if (not isinstance(frames, list) or not frames
                    or not all(isinstance(f, int) and not isinstance(f, bool)
                               for f in frames)):
                raise InputError(f"clip frames must be a non-empty integer list, got {frames!r}")
            return cls.clip(frames)
        if name == "crop":
            frame = args.get("frame")
            if not isinstance(frame, int) or isinstance(frame, bool):
                raise InputError(f"crop frame must be an integer, got {frame!r}")
            return cls.crop(frame, Box.from_list(args.get("box"), context="crop box"))
        raise InputError(f"unknown tool name {name!r}")


@dataclass(frozen=True)
class Turn:
    """One dialogue turn: think text plus at most one call or final answer."""

    think: str = ""
    tool_call: ToolCall | None = None
    final_answer: str | None = None

    def __post_init__(self):
        if self.tool_call is not None and self.final_answer is not None:
            raise InputError("a turn cannot carry both a tool call and a final answer")


@dataclass(frozen=True)
class Trajectory:
    """Ordered turns ending in a boxed final answer."""

    id: str
    instance_id: str
    provenance: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise InputError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")
        if not self.turns:
            raise InputError("trajectory must have at least one turn")
        if self.turns[-1].final_answer is None:
            raise InputError("last turn must carry the final answer")
        for i, turn in enumerate(self.turns[:-1]):
            if turn.final_answer is not None:
                raise InputError(f"final answer before the last turn (turn {i})")

    @property
    def tool_calls(self) -> tuple[ToolCall, ...]:
        return tuple(t.tool_call for t in self.turns if t.tool_call is not None)

    @property
    def final_answer(self) -> str:
        return self.turns[-1].final_answer

    @property
    def drp_eligible(self) -> bool:
        """True when every tool call uses one tool kind (or none at all)."""
        return len({c.name for c in self.tool_calls}) <= 1


def serialize_turn(turn: Turn) -> str:
    segments = []
    if turn.think:
        segments.append(turn.think)
    if turn.tool_call is not None:
        payload = json.dumps(turn.tool_call.to_json(), separators=(",", ":"))
        segments.append(f"{TOOL_OPEN}{payload}{TOOL_CLOSE}")
    if turn.final_answer is not None:
        segments.append("\\boxed{" + turn.final_answer + "}")
    return "\n".join(segments)


def _find_boxed(text: str):
    """Locate the single boxed answer; returns (start, end, content) or None."""
    first = text.find(BOXED)
    if first == -1:
        return None
    second = text.find(BOXED, first + 1)
    if second != -1:
        raise TurnParseError("multiple boxed answers in one turn", second)
    depth = 1
    pos = first + len(BOXED)
    while pos < len(text):
        ch = text[pos]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return first, pos + 1, text[first + len(BOXED):pos]
        pos += 1
    raise TurnParseError("unterminated boxed answer", first)


def parse_turn(text: str) -> Turn:
    """Inverse of serialize_turn; rejects malformed wire text.

    Markers (one tool-call tag, one boxed answer) may appear at most once,
    never together, and only trailing whitespace may follow them.
    """
    open_idx = text.find(TOOL_OPEN)
    tool_call = None
    spans = []
    if open_idx != -1:
        second_open = text.find(TOOL_OPEN, open_idx + 1)
        if second_open != -1:
            raise TurnParseError("multiple tool calls in one turn", second_open)
        close_idx = text.find(TOOL_CLOSE, open_idx)
        if close_idx == -1:
            raise TurnParseError("unclosed tool call tag", open_idx)
        payload = text[open_idx + len(TOOL_OPEN):close_idx]
        try:
            raw = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise TurnParseError(f"tool call payload is not valid JSON: {exc.msg}",
                                 open_idx + len(TOOL_OPEN) + exc.pos) from exc
        try:
            tool_call = ToolCall.from_json(raw)
        except InputError as exc:
            raise TurnParseError(str(exc), open_idx + len(TOOL_OPEN)) from exc
        spans.append((open_idx, close_idx + len(TOOL_CLOSE)))
    else:
        close_idx = text.find(TOOL_CLOSE)
        if close_idx != -1:
            raise TurnParseError("closing tool call tag without opener", close_idx)

    boxed = _find_boxed(text)
    final_answer = None
    if boxed is not None:
        b_start, b_end, final_answer = boxed
        if tool_call is not None:
            raise TurnParseError("turn carries both a tool call and a final answer",
                                 b_start)
        spans.append((b_start, b_end))

    if not spans:
        return Turn(think=text)

    start, end = spans[0]
    trailing = text[end:]
    if trailing.strip():
        raise TurnParseError("unexpected text after turn marker",
                             end + len(trailing) - len(trailing.lstrip()))
    think = text[:start]
    if think.endswith("\n"):
        think = think[:-1]
    return Turn(think=think, tool_call=tool_call, final_answer=final_answer)


def turn_to_json(turn: Turn) -> dict:
    return {
        "think": turn.think,
        "tool_call": turn.tool_call.to_json() if turn.tool_call else None,
        "answer": turn.final_answer,
    }


def turn_from_json(raw: dict) -> Turn:
    tc = raw.get("tool_call")
    return Turn(
        think=raw.get("think", ""),
        tool_call=ToolCall.from_json(tc) if tc is not None else None,
        final_answer=raw.get("answer"),
    )


def trajectory_to_json(t: Trajectory) -> dict:
    return {
        "id": t.id,
        "instance_id": t.instance_id,
        "provenance": t.provenance,
        "turns": [turn_to_json(turn) for turn in t.turns],
    }


def trajectory_from_json(raw: dict) -> Trajectory:
    try:
        return Trajectory(
            id=str(raw["id"]),
            instance_id=str(raw["instance_id"]),
            provenance=raw["provenance"],
            turns=tuple(turn_from_json(t) for t in raw["turns"]),
        )
    except KeyError as exc:
        raise InputError(f"trajectory record missing key {exc}") from exc


def _overview_turn(q: QAInstance) -> Turn:
    return Turn(think=(f"The question is: {q.question} "
                       "First, an overview of the whole video. "
                       "{{video_caption}} {{think hint=plan}}"))


def _fmt_frames(frames) -> str:
    return ",".join(str(f) for f in frames)


def _fmt_box(box: Box) -> str:
    return ",".join(str(v) for v in box.as_list())


def render_trajectory(ev: EvidenceRecord, q: QAInstance,
                      template_id: str = "auto") -> Trajectory:
    """Expand an evidence record into a placeholder-bearing trajectory.

    Template family: overview, locate, read, answer. ``single_tool``
    renders crop-only (one evidence frame) or clip-only dialogues;
    ``mixed`` opens with a clip over the relevant frames and crops each
    evidence box; ``auto`` picks single_tool for single-frame evidence and
    mixed otherwise. Think slots hold ``{{...}}`` placeholders; the final
    turn pre-fills the boxed answer with the first gold answer.
    """
    if template_id not in TEMPLATE_IDS:
        raise InputError(f"unknown template {template_id!r}; expected one of {TEMPLATE_IDS}")
    if not ev.matched:
        raise InputError(f"instance {q.id}: cannot render an unmatched evidence record")
    frames = sorted(ev.relevant_frames)
    if template_id == "auto":
        template_id = "single_tool" if len(frames) == 1 else "mixed"
    gold = q.answers[0]
    turns = [_overview_turn(q)]

    if template_id == "single_tool" and len(frames) == 1:
        f = frames[0]
        box = ev.evidence_box_per_frame[f]
        turns.append(Turn(
            think=f"Zooming into the evidence region in frame {f}.",
            tool_call=ToolCall.crop(f, box)))
        turns.append(Turn(
            think=(f"{{{{region_caption frame={f} box={_fmt_box(box)}}}}} "
                   "{{think hint=answer}}"),
            final_answer=gold))
    elif template_id == "single_tool":
        turns.append(Turn(
            think="Clipping the frames that look relevant.",
            tool_call=ToolCall.clip(frames)))
        turns.append(Turn(
            think=(f"{{{{clip_caption frames={_fmt_frames(frames)}}}}} "
                   "{{think hint=answer}}"),
            final_answer=gold))
    else:
        turns.append(Turn(
            think="Clipping the frames that look relevant.",
            tool_call=ToolCall.clip(frames)))
        prev_caption = f"{{{{clip_caption frames={_fmt_frames(frames)}}}}}"
        for f in frames:
            box = ev.evidence_box_per_frame[f]
            turns.append(Turn(
                think=f"{prev_caption} Zooming into the evidence region in frame {f}.",
                tool_call=ToolCall.crop(f, box)))
            prev_caption = f"{{{{region_caption frame={f} box={_fmt_box(box)}}}}}"
        turns.append(Turn(
            think=f"{prev_caption} {{{{think hint=answer}}}}",
            final_answer=gold))

    return Trajectory(id=f"{q.id}.t0", instance_id=q.id,
                      provenance="synthesized", turns=tuple(turns))


def _parse_directive(directive: str, turn_index: int):
    tokens = directive.split()
    if not tokens:
        raise InputError(f"turn {turn_index}: empty placeholder")
    kind = tokens[0]
    args = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise InputError(f"turn {turn_index}: bad placeholder argument {tok!r}")
        key, value = tok.split("=", 1)
        args[key] = value
    return kind, args


def fill_placeholders(t: Trajectory, client, video: Video) -> Trajectory:
    """Resolve every ``{{...}}`` directive through the captioner client.

    Structure (turn count, tool calls, answer) is unchanged; client
    failures surface with the offending turn index; a placeholder
    surviving the pass is an error.
    """
    new_turns = []
    for idx, turn in enumerate(t.turns):
        def _sub(match: re.Match, _idx=idx) -> str:
            kind, args = _parse_directive(match.group(1), _idx)
            try:
                if kind == "video_caption":
                    frames = [video.frame_pixels(i) for i in range(len(video.frames))]
                    return client.caption_video(frames)
                if kind == "clip_caption":
                    indices = [int(x) for x in args["frames"].split(",")]
                    return client.caption_video([video.frame_pixels(i) for i in indices])
                if kind == "region_caption":
                    frame = int(args["frame"])
                    box = Box.from_list([int(x) for x in args["box"].split(",")])
                    return client.caption_region(video.frame_pixels(frame), box,
                                                 args.get("context", ""))
                if kind == "think":
                    return client.think(args.get("hint", ""))
            except (KeyError, ValueError) as exc:
                raise InputError(f"turn {_idx}: bad placeholder arguments: {exc}") from exc
            except InputError:
                raise
            except Exception as exc:
                raise InputError(f"turn {_idx}: captioner failed: {exc}") from exc
            raise InputError(f"turn {_idx}: unknown placeholder kind {kind!r}")

        think = _PLACEHOLDER.sub(_sub, turn.think)
        if "{{" in think:
            raise InputError(f"turn {idx}: unresolved placeholder after fill")
        new_turns.append(replace(turn, think=think))
    return replace(t, turns=tuple(new_turns))


@dataclass(frozen=True)
class Violation:
    code: str  # grounding | temporal | correctness | format
    turn_index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    trajectory_id: str
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.violations


def validate_trajectory(t: Trajectory, corpus: Corpus,
                        ev: EvidenceRecord) -> ValidationReport:
    """Check grounding, forward-scan temporal order, answer correctness,
    and wire-format round-tripping. Violations are data, not exceptions.
    """
    violations: list[Violation] = []

    instance = next((i for i in corpus.instances if i.id == t.instance_id), None)

    for idx, turn in enumerate(t.turns):
        try:
            if parse_turn(serialize_turn(turn)) != turn:
                violations.append(Violation(
                    "format", idx, "turn does not round-trip through the wire format"))
        except TurnParseError as exc:
            violations.append(Violation("format", idx, str(exc)))

    prev_window: tuple[int, int] | None = None
    for idx, turn in enumerate(t.turns):
        call = turn.tool_call
        if call is None:
            continue
        if call.name == "clip":
            outside = [f for f in call.frames if f not in ev.relevant_frames]
            if outside:
                violations.append(Violation(
                    "grounding", idx,
                    f"clip frames {outside} outside evidence frames "
                    f"{sorted(ev.relevant_frames)}"))
            if list(call.frames) != sorted(call.frames):
                violations.append(Violation(
                    "temporal", idx,
                    f"clip frames {list(call.frames)} not ascending"))
            window = (min(call.frames), max(call.frames))
            if prev_window is not None and (window[0] < prev_window[0]
                                            or window[1] < prev_window[1]):
                violations.append(Violation(
                    "temporal", idx,
                    f"clip window {window} precedes earlier window {prev_window}"))
            prev_window = window
        else:
            allowed = ev.evidence_box_per_frame.get(call.frame)
            if allowed is None:
                violations.append(Violation(
                    "grounding", idx,
                    f"crop on frame {call.frame} with no evidence box"))
            elif not allowed.contains(call.box):
                violations.append(Violation(
                    "grounding", idx,
                    f"crop box {call.box.as_list()} outside evidence box "
                    f"{allowed.as_list()} in frame {call.frame}"))

    if instance is None:
        violations.append(Violation(
            "correctness", len(t.turns) - 1,
            f"unknown instance {t.instance_id!r}"))
    elif not exact_match(t.final_answer, instance.answers):
        violations.append(Violation(
            "correctness", len(t.turns) - 1,
            f"final answer {t.final_answer!r} does not match any gold answer"))

    return ValidationReport(trajectory_id=t.id, violations=tuple(violations))
