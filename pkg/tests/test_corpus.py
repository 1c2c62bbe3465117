"""Corpus model: box geometry, annotation validation, and disk IO."""

from __future__ import annotations

import json

import numpy as np
import pytest

from oracles import iou_oracle
from videor4.corpus import (Box, FrameAnnotation, ObjectDetection, OcrDetection,
                            QAInstance, load_corpus, load_video, read_jsonl,
                            save_video, write_frame_png, write_jsonl)
from videor4.errors import CorpusError


class TestBox:
    def test_rejects_non_integer_coordinates(self):
        with pytest.raises(CorpusError):
            Box(0, 0, 1.5, 2)
        with pytest.raises(CorpusError):
            Box.from_list([0, 0, True, 2])
        with pytest.raises(CorpusError):
            Box.from_list([0, 0, "3", 2])

    def test_rejects_degenerate_and_negative(self):
        with pytest.raises(CorpusError):
            Box(5, 5, 5, 10)
        with pytest.raises(CorpusError):
            Box(5, 5, 4, 10)
        with pytest.raises(CorpusError):
            Box(-1, 0, 4, 4)

    def test_from_list_shape(self):
        with pytest.raises(CorpusError):
            Box.from_list([1, 2, 3])
        assert Box.from_list([1, 2, 3, 4]) == Box(1, 2, 3, 4)
        assert Box(1, 2, 3, 4).as_list() == [1, 2, 3, 4]

    def test_area_width_height(self):
        b = Box(2, 3, 7, 11)
        assert (b.width, b.height, b.area) == (5, 8, 40)

    def test_iou_worked_example(self):
        # inter 2, union 4 + 4 - 2
        assert Box(0, 0, 2, 2).iou(Box(1, 0, 3, 2)) == pytest.approx(1 / 3)

    def test_iou_identity_and_disjoint(self):
        b = Box(4, 4, 9, 9)
        assert b.iou(b) == 1.0
        assert b.iou(Box(9, 9, 12, 12)) == 0.0  # half-open: touching is disjoint
        assert b.intersect(Box(9, 4, 12, 9)) == 0

    def test_iou_matches_oracle_on_random_pairs(self, rng):
        for _ in range(1000):
            a = Box(*_rand_raw_box(rng))
            b = Box(*_rand_raw_box(rng))
            expected = iou_oracle(tuple(a.as_list()), tuple(b.as_list()))
            assert a.iou(b) == pytest.approx(expected, abs=1e-12)
            assert a.iou(b) == b.iou(a)
            assert 0.0 <= a.iou(b) <= 1.0

    def test_contains_and_union(self):
        outer = Box(0, 0, 10, 10)
        inner = Box(2, 2, 5, 5)
        assert outer.contains(inner)
        assert not inner.contains(outer)
        assert inner.union_box(Box(8, 1, 12, 4)) == Box(2, 1, 12, 5)

    def test_clamp(self):
        assert Box(2, 2, 100, 100).clamp(10, 8) == Box(2, 2, 10, 8)
        assert Box(2, 2, 5, 5).clamp(10, 10) == Box(2, 2, 5, 5)


def _rand_raw_box(rng):
    x1 = int(rng.integers(0, 30))
    y1 = int(rng.integers(0, 30))
    return x1, y1, x1 + int(rng.integers(1, 20)), y1 + int(rng.integers(1, 20))


class TestAnnotations:
    def test_ocr_level_validated(self):
        with pytest.raises(CorpusError):
            OcrDetection("hi", Box(0, 0, 2, 2), "word")

    def test_frame_bounds_checked(self):
        with pytest.raises(CorpusError):
            FrameAnnotation(index=0, width=10, height=10,
                            ocr=(OcrDetection("x", Box(0, 0, 11, 5), "token"),))
        with pytest.raises(CorpusError):
            FrameAnnotation(index=0, width=10, height=10,
                            objects=(ObjectDetection("x", Box(0, 0, 5, 11)),))

    def test_instance_fields_validated(self):
        ok = dict(id="a", video="v", question="q", answers=("x",),
                  src_temporal="single", src_modality="text")
        QAInstance(**ok)
        with pytest.raises(CorpusError):
            QAInstance(**{**ok, "answers": ()})
        with pytest.raises(CorpusError):
            QAInstance(**{**ok, "src_temporal": "one"})
        with pytest.raises(CorpusError):
            QAInstance(**{**ok, "src_modality": "audio"})
        with pytest.raises(CorpusError):
            QAInstance(**{**ok, "id": ""})


class TestVideoIO:
    def test_png_round_trip_and_grayscale(self, tmp_path):
        arr = np.linspace(0.0, 1.0, 64).reshape(8, 8)
        frames = [FrameAnnotation(index=0, width=8, height=8)]
        save_video(tmp_path / "v", frames, [arr])
        video = load_video(tmp_path / "v", "v")
        got = video.frame_pixels(0)
        assert got.shape == (8, 8)
        assert got.min() >= 0.0 and got.max() <= 1.0
        # uint8 quantization only
        assert np.abs(got - arr).max() <= 0.5 / 255 + 1e-9

    def test_crop_is_half_open(self, tmp_path):
        arr = np.arange(100, dtype=np.float64).reshape(10, 10) / 255.0
        frames = [FrameAnnotation(index=0, width=10, height=10)]
        save_video(tmp_path / "v", frames, [arr])
        video = load_video(tmp_path / "v", "v")
        crop = video.crop_pixels(0, Box(2, 3, 5, 7))
        assert crop.shape == (4, 3)
        assert crop[0, 0] == pytest.approx(arr[3, 2])
        with pytest.raises(CorpusError):
            video.crop_pixels(0, Box(2, 3, 11, 7))

    def test_shape_mismatch_rejected(self, tmp_path):
        arr = np.zeros((8, 8))
        frames = [FrameAnnotation(index=0, width=9, height=8)]
        (tmp_path / "v").mkdir()
        write_frame_png(tmp_path / "v" / "frame_000000.png", arr)
        payload = {"frames": [{"index": 0, "width": 9, "height": 8,
                               "ocr": [], "objects": []}]}
        (tmp_path / "v" / "annotations.json").write_text(json.dumps(payload))
        video = load_video(tmp_path / "v", "v")
        with pytest.raises(CorpusError, match="annotation says"):
            video.frame_pixels(0)

    def test_missing_frame_file(self, tmp_path):
        save_video(tmp_path / "v", [FrameAnnotation(index=0, width=8, height=8)])
        video = load_video(tmp_path / "v", "v")
        with pytest.raises(CorpusError, match="missing frame file"):
            video.frame_pixels(0)

    def test_frame_indices_must_be_dense(self, tmp_path):
        payload = {"frames": [{"index": 1, "width": 8, "height": 8,
                               "ocr": [], "objects": []}]}
        (tmp_path / "v").mkdir()
        (tmp_path / "v" / "annotations.json").write_text(json.dumps(payload))
        with pytest.raises(CorpusError, match="dense and ordered"):
            load_video(tmp_path / "v", "v")


class TestCorpusLoading:
    def _write(self, root, instances):
        save_video(root / "videos" / "v", [FrameAnnotation(index=0, width=8, height=8)],
                   [np.zeros((8, 8))])
        with (root / "instances.jsonl").open("w") as fh:
            for inst in instances:
                fh.write(json.dumps(inst) + "\n")

    def test_load_and_lookup(self, tmp_path):
        self._write(tmp_path, [
            {"id": "a", "video": "v", "question": "q", "answers": ["x"],
             "src_temporal": "single", "src_modality": "text"}])
        corpus = load_corpus(tmp_path)
        assert [i.id for i in corpus.instances] == ["a"]
        assert corpus.video_for(corpus.instances[0]).name == "v"

    def test_duplicate_ids_rejected(self, tmp_path):
        row = {"id": "a", "video": "v", "question": "q", "answers": ["x"],
               "src_temporal": "single", "src_modality": "text"}
        self._write(tmp_path, [row, row])
        with pytest.raises(CorpusError, match="duplicate instance id"):
            load_corpus(tmp_path)

    def test_errors_carry_file_and_line(self, tmp_path):
        self._write(tmp_path, [
            {"id": "a", "video": "v", "question": "q", "answers": ["x"],
             "src_temporal": "single", "src_modality": "text"},
            {"id": "b", "video": "v", "question": "q", "answers": [],
             "src_temporal": "single", "src_modality": "text"}])
        with pytest.raises(CorpusError, match=r"instances\.jsonl:2"):
            load_corpus(tmp_path)

    def test_bad_json_line_number(self, tmp_path):
        self._write(tmp_path, [])
        with (tmp_path / "instances.jsonl").open("a") as fh:
            fh.write("{not json\n")
        with pytest.raises(CorpusError, match=":1: invalid JSON"):
            load_corpus(tmp_path)


def test_jsonl_round_trip(tmp_path):
    rows = [{"a": 1}, {"b": [1, 2, 3]}, {"c": {"d": "e"}}]
    path = tmp_path / "rows.jsonl"
    write_jsonl(path, rows)
    assert read_jsonl(path) == rows
    path.write_text("{}\n\nnot json\n")
    with pytest.raises(CorpusError, match=":3"):
        read_jsonl(path)
