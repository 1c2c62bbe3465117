"""Human quality-control service over synthesized trajectories.

State is event-sourced: the initial trajectories file plus an
append-only decision log fully determine every item's status, version,
and current body. Log entries form a sha256 digest chain, writes use
optimistic concurrency (expected_version), and the export is a pure
function of the folded state, so replaying the log onto the same input
reproduces the export byte-for-byte.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import Corpus
from .errors import InputError, VideoR4Error
from .matching import EvidenceRecord
from .trajectory import (Trajectory, trajectory_from_json, trajectory_to_json,
                         validate_trajectory)

STATUSES = ("pending", "accepted", "dropped", "edited")
DECISION_ACTIONS = ("accept", "drop")


class UnknownItemError(VideoR4Error):
    pass


class VersionConflictError(VideoR4Error):
    def __init__(self, item_id: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"item {item_id}: expected version {expected} but item is at {actual}")


class EditRejectedError(VideoR4Error):
    def __init__(self, message: str, violations: list[dict]):
        self.violations = violations
        super().__init__(message)


@dataclass
class ReviewItem:
    id: str
    trajectory: Trajectory
    status: str = "pending"
    version: int = 1
    history: list[dict] = field(default_factory=list)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _entry_digest(entry: dict, prev: str) -> str:
    body = {k: v for k, v in entry.items() if k != "digest"}
    body["prev"] = prev
    return hashlib.sha256(_canonical(body).encode()).hexdigest()


class ReviewStore:
    """Items, decision log, and export; all writes serialized and logged."""

    def __init__(self, corpus: Corpus, trajectories: list[Trajectory],
                 evidence: dict[str, EvidenceRecord], log_path: str | Path):
        self.corpus = corpus
        self.evidence = evidence
        self.log_path = Path(log_path)
        self._lock = threading.Lock()
        self._log_head = ""
        self._log_seq = 0
        self.items: dict[str, ReviewItem] = {}
        for traj in trajectories:
            if traj.id in self.items:
                raise InputError(f"duplicate trajectory id {traj.id!r}")
            if traj.instance_id not in evidence:
                raise InputError(
                    f"trajectory {traj.id}: no evidence record for instance "
                    f"{traj.instance_id!r}")
            self.items[traj.id] = ReviewItem(id=traj.id, trajectory=traj)
        if self.log_path.exists():
            self._replay_existing_log()

    # -- log plumbing ------------------------------------------------------

    def _replay_existing_log(self) -> None:
        with self.log_path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                digest = entry.get("digest")
                if digest != _entry_digest(entry, self._log_head):
                    raise InputError(
                        f"{self.log_path}:{lineno}: digest chain broken")
                self._apply_entry(entry)
                self._log_head = digest
                self._log_seq = entry["seq"]

    def _append_entry(self, entry: dict) -> dict:
        """Persist one log entry (digest-chained) before acknowledging."""
        self._log_seq += 1
        entry = {"seq": self._log_seq, **entry}
        entry["digest"] = _entry_digest(entry, self._log_head)
        with self.log_path.open("a") as fh:
            fh.write(_canonical(entry) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._log_head = entry["digest"]
        return entry

    def _apply_entry(self, entry: dict) -> None:
        item = self.items.get(entry["item"])
        if item is None:
            raise InputError(f"decision log names unknown item {entry['item']!r}")
        action = entry["action"]
        if action == "accept":
            item.status = "accepted"
        elif action == "drop":
            item.status = "dropped"
        elif action == "edit":
            item.status = "edited"
            item.trajectory = trajectory_from_json(entry["body"])
        else:
            raise InputError(f"decision log has unknown action {action!r}")
        item.version = entry["version"]
        item.history.append({"timestamp": entry["timestamp"],
                             "reviewer": entry["reviewer"],
                             "action": action, "version": entry["version"]})

    # -- reads -------------------------------------------------------------

    def get(self, item_id: str) -> ReviewItem:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItemError(f"unknown item {item_id!r}")
        return item

    def list_items(self, status: str | None = None, page: int = 1,
                   page_size: int = 20):
        if status is not None and status not in STATUSES:
            raise InputError(
                f"status filter must be one of {STATUSES}, got {status!r}")
        if page < 1 or page_size < 1:
            raise InputError("page and page_size must be >= 1")
        with self._lock:
            rows = [self.items[k] for k in sorted(self.items)]
            if status is not None:
                rows = [r for r in rows if r.status == status]
            total = len(rows)
            start = (page - 1) * page_size
            return rows[start:start + page_size], total

    def instance_for(self, item: ReviewItem):
        for inst in self.corpus.instances:
            if inst.id == item.trajectory.instance_id:
                return inst
        raise InputError(f"item {item.id}: unknown instance {item.trajectory.instance_id!r}")

    # -- writes ------------------------------------------------------------

    def _check_version(self, item: ReviewItem, expected_version: int) -> None:
        if item.version != expected_version:
            raise VersionConflictError(item.id, expected_version, item.version)

    def record_decision(self, item_id: str, action: str, reviewer: str,
                        expected_version: int) -> ReviewItem:
        if action not in DECISION_ACTIONS:
            raise InputError(
                f"action must be one of {DECISION_ACTIONS}, got {action!r}")
        with self._lock:
            item = self.get(item_id)
            self._check_version(item, expected_version)
            entry = self._append_entry({
                "item": item_id, "action": action, "reviewer": reviewer,
                "version": item.version + 1,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "body": None,
            })
            self._apply_entry(entry)
            return item

    def save_edit(self, item_id: str, body: dict, reviewer: str,
                  expected_version: int) -> ReviewItem:
        with self._lock:
            item = self.get(item_id)
            self._check_version(item, expected_version)
            try:
                traj = trajectory_from_json(body)
            except (InputError, TypeError) as exc:
                raise EditRejectedError(
                    "edited body does not parse",
                    [{"code": "format", "turn_index": -1, "message": str(exc)}]) from exc
            violations = []
            if traj.id != item.id:
                violations.append({"code": "format", "turn_index": -1,
                                   "message": f"body id {traj.id!r} != item id {item.id!r}"})
            if traj.instance_id != item.trajectory.instance_id:
                violations.append({
                    "code": "format", "turn_index": -1,
                    "message": f"body instance {traj.instance_id!r} != "
                               f"{item.trajectory.instance_id!r}"})
            if not violations:
                report = validate_trajectory(traj, self.corpus,
                                             self.evidence[traj.instance_id])
                violations = [{"code": v.code, "turn_index": v.turn_index,
                               "message": v.message} for v in report.violations]
            if violations:
                raise EditRejectedError("edited body failed validation", violations)
            entry = self._append_entry({
                "item": item_id, "action": "edit", "reviewer": reviewer,
                "version": item.version + 1,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "body": trajectory_to_json(traj),
            })
            self._apply_entry(entry)
            return item

    # -- export ------------------------------------------------------------

    def export(self, path: str | Path) -> dict:
        """Write accepted and edited bodies (sorted by id) plus a manifest."""
        path = Path(path)
        with self._lock:
            rows = [self.items[k] for k in sorted(self.items)]
            counts = {s: 0 for s in STATUSES}
            curated = []
            for item in rows:
                counts[item.status] += 1
                if item.status in ("accepted", "edited"):
                    curated.append(item.trajectory)
            head = self._log_head
        lines = [_canonical(trajectory_to_json(t)) for t in curated]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(line + "\n" for line in lines))
        manifest = {"total": sum(counts.values()), "exported": len(curated),
                    "counts": counts, "log_head": head}
        manifest_path = path.with_name(path.name + ".manifest.json")
        manifest_path.write_text(_canonical(manifest) + "\n")
        return manifest


def _png_bytes(pixels: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    img = Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def item_summary(item: ReviewItem) -> dict:
    return {"id": item.id, "instance_id": item.trajectory.instance_id,
            "status": item.status, "version": item.version,
            "turns": len(item.trajectory.turns),
            "provenance": item.trajectory.provenance}


def render_bundle(store: ReviewStore, item: ReviewItem) -> dict:
    """Per-call render data: frame references for clips, source frame and
    box for crops, plus the QA pair."""
    inst = store.instance_for(item)
    clips = []
    crops = []
    crop_ordinal = 0
    for turn_index, turn in enumerate(item.trajectory.turns):
        call = turn.tool_call
        if call is None:
            continue
        if call.name == "clip":
            clips.append({
                "turn_index": turn_index,
                "frames": list(call.frames),
                "frame_urls": [f"/items/{item.id}/frames/{f}" for f in call.frames],
            })
        else:
            crops.append({
                "turn_index": turn_index,
                "call_index": crop_ordinal,
                "frame": call.frame,
                "box": call.box.as_list(),
                "frame_url": f"/items/{item.id}/frames/{call.frame}",
                "crop_url": f"/items/{item.id}/crops/{crop_ordinal}",
            })
            crop_ordinal += 1
    return {"question": inst.question, "answers": list(inst.answers),
            "video": inst.video, "clips": clips, "crops": crops}


def make_app(store: ReviewStore):
    """FastAPI app exposing the review workflow over HTTP."""
    from fastapi import Body, FastAPI, Request
    from fastapi.responses import JSONResponse, Response

    app = FastAPI(title="videor4 quality control")

    def error(status: int, code: str, message: str, violations=None):
        body = {"code": code, "message": message}
        if violations is not None:
            body["violations"] = violations
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(UnknownItemError)
    async def _unknown(request: Request, exc: UnknownItemError):
        return error(404, "not_found", str(exc))

    @app.exception_handler(VersionConflictError)
    async def _conflict(request: Request, exc: VersionConflictError):
        return error(409, "version_conflict", str(exc))

    @app.exception_handler(EditRejectedError)
    async def _rejected(request: Request, exc: EditRejectedError):
        return error(422, "validation_failed", str(exc), exc.violations)

    @app.exception_handler(InputError)
    async def _input(request: Request, exc: InputError):
        return error(422, "invalid_request", str(exc))

    @app.get("/items")
    async def list_items(status: str | None = None, page: int = 1,
                         page_size: int = 20):
        rows, total = store.list_items(status, page, page_size)
        return {"items": [item_summary(r) for r in rows], "total": total,
                "page": page, "page_size": page_size}

    @app.get("/items/{item_id}")
    async def get_item(item_id: str):
        item = store.get(item_id)
        return {"item": item_summary(item),
                "trajectory": trajectory_to_json(item.trajectory),
                "history": list(item.history),
                "bundle": render_bundle(store, item)}

    @app.get("/items/{item_id}/frames/{index}")
    async def get_frame(item_id: str, index: int):
        item = store.get(item_id)
        inst = store.instance_for(item)
        video = store.corpus.videos.get(inst.video)
        if video is None or index < 0 or index >= len(video.frames):
            raise UnknownItemError(f"no frame {index} for item {item_id!r}")
        return Response(content=_png_bytes(video.frame_pixels(index)),
                        media_type="image/png")

    @app.get("/items/{item_id}/crops/{call_index}")
    async def get_crop(item_id: str, call_index: int):
        item = store.get(item_id)
        crop_calls = [c for c in item.trajectory.tool_calls if c.name == "crop"]
        if call_index < 0 or call_index >= len(crop_calls):
            raise UnknownItemError(f"no crop call {call_index} for item {item_id!r}")
        call = crop_calls[call_index]
        inst = store.instance_for(item)
        video = store.corpus.videos.get(inst.video)
        if video is None:
            raise UnknownItemError(f"no video for item {item_id!r}")
        return Response(content=_png_bytes(video.crop_pixels(call.frame, call.box)),
                        media_type="image/png")

    @app.post("/items/{item_id}/decision")
    async def post_decision(item_id: str, payload: dict = Body(...)):
        for key in ("action", "reviewer", "expected_version"):
            if key not in payload:
                raise InputError(f"decision body missing {key!r}")
        item = store.record_decision(item_id, payload["action"],
                                     str(payload["reviewer"]),
                                     int(payload["expected_version"]))
        return item_summary(item)

    @app.put("/items/{item_id}/body")
    async def put_body(item_id: str, payload: dict = Body(...)):
        for key in ("trajectory", "reviewer", "expected_version"):
            if key not in payload:
                raise InputError(f"edit body missing {key!r}")
        item = store.save_edit(item_id, payload["trajectory"],
                               str(payload["reviewer"]),
                               int(payload["expected_version"]))
        return item_summary(item)

    @app.post("/export")
    async def post_export(payload: dict = Body(...)):
        if "path" not in payload:
            raise InputError("export body missing 'path'")
        return store.export(payload["path"])

    return app
