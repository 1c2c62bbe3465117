"""One structured configuration file for the whole pipeline.

YAML sections: paths, matcher, rewards, grpo, captioner, synthesis,
train, qc. Environment variables prefixed ``VIDEOR4_`` override file
values (``VIDEOR4_<SECTION>_<KEY>``, e.g.
``VIDEOR4_MATCHER_TEXT_MATCH_THRESHOLD=0.7``); command-line flags
override both. Every report records the merged config's hash so runs
are attributable.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .matching import MatcherConfig
from .rewards import RewardConfig
from .training.grpo import GrpoConfig
from .training.synthetic import SyntheticTaskConfig

ENV_PREFIX = "VIDEOR4_"

DEFAULTS: dict = {
    "paths": {
        "corpus_dir": "corpus",
        "out_dir": "out",
    },
    "matcher": {
        "text_match_threshold": 0.8,
        "name_match_threshold": 0.8,
        "extend_pad_fraction": 0.1,
        "difficulty_band": [0.2, 0.8],
    },
    "rewards": {
        "lambda_div": 1.0,
        "lambda_rep": 1.0,
        "lambda_cur": 1.0,
        "alpha": 0.5,
        "beta": 0.05,
        "usage_target": 0.3,
        "call_budget": 3,
        "format_bonus": 0.5,
        "empty_clip_penalty": 10.0,
    },
    "grpo": {
        "group_size": 8,
        "clip_range": 0.2,
        "kl_coeff": 0.04,
        "advantage_epsilon": 1e-8,
        "learning_rate": 1e-6,
    },
    "captioner": {
        "kind": "stub",
        "base_url": "",
        "timeout": 30.0,
    },
    "synthesis": {
        "template_id": "auto",
        "max_calls": 8,
    },
    "train": {
        "plans": ["full", "crp_rl", "crp_only"],
        "seed": 0,
        "sft_steps": 40,
        "rl_steps": 48,
        "sft_lr": 0.5,
        "rl_lr": 0.08,
        "task": {
            "n_frames": 3,
            "grid": 2,
            "frame_size": 32,
            "n_candidates": 4,
            "n_single": 8,
            "n_mixed": 6,
            "n_eval": 12,
            "seed": 7,
        },
    },
    "qc": {
        "host": "127.0.0.1",
        "port": 8400,
        "trajectories": "",   # defaults to <out_dir>/trajectories.jsonl
        "decision_log": "",   # defaults to <out_dir>/qc_decisions.jsonl
        "export_path": "",    # defaults to <out_dir>/curated.jsonl
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _apply_env(raw: dict, environ) -> dict:
    out = json.loads(json.dumps(raw))
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        for section in out:
            prefix = section + "_"
            if rest.startswith(prefix) and isinstance(out[section], dict):
                key = rest[len(prefix):]
                if key in out[section]:
                    out[section][key] = yaml.safe_load(value)
                    break
        else:
            raise ConfigError(f"environment override {name} matches no config key")
    return out


@dataclass(frozen=True)
class PipelineConfig:
    corpus_dir: Path
    out_dir: Path
    matcher: MatcherConfig
    rewards: RewardConfig
    grpo: GrpoConfig
    captioner: dict
    synthesis: dict
    train: dict
    qc: dict
    config_hash: str

    def qc_path(self, key: str, default_name: str) -> Path:
        value = self.qc.get(key) or ""
        return Path(value) if value else self.out_dir / default_name


def config_hash(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


def load_config(path: str | Path | None = None, *, environ=None) -> PipelineConfig:
    raw = DEFAULTS
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config root must be a mapping, got {type(user).__name__}")
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        raw = _deep_merge(DEFAULTS, user)
    raw = _apply_env(raw, environ if environ is not None else os.environ)

    try:
        matcher = MatcherConfig(
            text_match_threshold=raw["matcher"]["text_match_threshold"],
            name_match_threshold=raw["matcher"]["name_match_threshold"],
            extend_pad_fraction=raw["matcher"]["extend_pad_fraction"],
            difficulty_band=tuple(raw["matcher"]["difficulty_band"]),
        )
        rewards = RewardConfig(**raw["rewards"])
        grpo = GrpoConfig(**raw["grpo"])
        SyntheticTaskConfig(**raw["train"]["task"])  # validate eagerly
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    return PipelineConfig(
        corpus_dir=Path(raw["paths"]["corpus_dir"]),
        out_dir=Path(raw["paths"]["out_dir"]),
        matcher=matcher,
        rewards=rewards,
        grpo=grpo,
        captioner=dict(raw["captioner"]),
        synthesis=dict(raw["synthesis"]),
        train=json.loads(json.dumps(raw["train"])),
        qc=dict(raw["qc"]),
        config_hash=config_hash(raw),
    )
