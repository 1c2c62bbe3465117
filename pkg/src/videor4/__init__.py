"""Rumination-style video QA toolkit.

Library surface: corpus IO, rule-based evidence matching, trajectory
synthesis and validation, an executable clip/crop environment, composite
rewards, toy-scale GRPO training with a staged curriculum, answer
metrics, and an event-sourced review service.
"""

from .corpus import Box, Corpus, FrameAnnotation, ObjectDetection, OcrDetection, QAInstance, Video, load_corpus
from .env import EpisodeRecord, RuminationState, encode_feature, init_state, run_trajectory
from .errors import ConfigError, CorpusError, InputError, TurnParseError, VideoR4Error
from .matching import EvidenceRecord, MatcherConfig, estimate_difficulty, extend_box, match_question, merge_boxes, partition_rl_candidates
from .metrics import MetricReport, anls_score, evaluate, exact_match, macro_f1
from .rewards import (GroupCallStats, RewardBreakdown, RewardConfig, base_reward,
                      cosine_distance, curiosity_reward, diversity_reward,
                      representativeness_reward, total_reward)
from .text import normalized_levenshtein, score_name, score_text
from .trajectory import (ToolCall, Trajectory, Turn, ValidationReport,
                         fill_placeholders, parse_turn, render_trajectory,
                         serialize_turn, validate_trajectory)

__version__ = "0.1.0"
