"""Captioner clients that fill trajectory think-text placeholders.

The stub is fully offline and deterministic: its captions are derived
from pixel statistics and box coordinates, so synthesis is repeatable
byte-for-byte. The HTTP client posts frames as base64 PNG payloads to a
remote captioning service with the same three operations.
"""

from __future__ import annotations

import base64
import io
from typing import Protocol

import numpy as np

from .corpus import Box
from .errors import InputError

_THINK_PHRASES = {
    "plan": "I need to find where the question's subject appears in the video.",
    "answer": "That region should contain the answer to the question.",
}


class CaptionerClient(Protocol):
    def caption_video(self, frames: list[np.ndarray]) -> str: ...

    def caption_region(self, frame: np.ndarray, box: Box, context: str) -> str: ...

    def think(self, context: str) -> str: ...


class StubCaptioner:
    """Deterministic local captioner; no network, no model."""

    def caption_video(self, frames: list[np.ndarray]) -> str:
        if not frames:
            raise InputError("caption_video requires at least one frame")
        mean = float(np.mean([f.mean() for f in frames]))
        noun = "frame" if len(frames) == 1 else "frames"
        return f"A sequence of {len(frames)} {noun} with mean intensity {mean:.3f}."

    def caption_region(self, frame: np.ndarray, box: Box, context: str) -> str:
        region = frame[box.y1:box.y2, box.x1:box.x2]
        if region.size == 0:
            raise InputError(f"empty region for box {box.as_list()}")
        mean = float(region.mean())
        contrast = float(region.std())
        return (f"The region {box.as_list()} shows content with mean intensity "
                f"{mean:.3f} and contrast {contrast:.3f}.")

    def think(self, context: str) -> str:
        return _THINK_PHRASES.get(context, f"Considering {context or 'the evidence'}.")


def _png_b64(arr: np.ndarray) -> str:
    from PIL import Image

    a = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    img = Image.fromarray(np.round(a * 255.0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class HttpCaptioner:
    """Client for a remote captioning endpoint.

    Protocol: POST {base_url}/caption with a JSON body naming the kind
    ("video", "region", "think") and its arguments; frames travel as
    base64 PNG strings; the response is {"text": "..."}.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _post(self, payload: dict) -> str:
        import requests

        try:
            resp = requests.post(f"{self.base_url}/caption", json=payload,
                                 timeout=self.timeout)
            resp.raise_for_status()
            return str(resp.json()["text"])
        except requests.RequestException as exc:
            raise InputError(f"captioner endpoint unreachable: {exc}") from exc
        except (KeyError, ValueError) as exc:
            raise InputError(f"captioner returned a malformed response: {exc}") from exc

    def caption_video(self, frames: list[np.ndarray]) -> str:
        return self._post({"kind": "video", "frames": [_png_b64(f) for f in frames]})

    def caption_region(self, frame: np.ndarray, box: Box, context: str) -> str:
        return self._post({"kind": "region", "frame": _png_b64(frame),
                           "box": box.as_list(), "context": context})

    def think(self, context: str) -> str:
        return self._post({"kind": "think", "context": context})


def make_captioner(kind: str, base_url: str = "", timeout: float = 30.0):
    if kind == "stub":
        return StubCaptioner()
    if kind == "http":
        if not base_url:
            raise InputError("http captioner requires a base_url")
        return HttpCaptioner(base_url, timeout)
    raise InputError(f"unknown captioner kind {kind!r}; expected 'stub' or 'http'")
