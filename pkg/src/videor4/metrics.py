"""Answer-quality metrics: ANLS with a similarity cutoff, exact match,
and macro-averaged bag-of-tokens F1, plus batch evaluation reports.

Normalization: EM and ANLS lowercase, trim, and collapse internal
whitespace; token bags additionally strip punctuation and keep
multiplicity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import InputError
from .text import normalize_answer, normalized_levenshtein, token_bag

ANLS_TAU = 0.5


def anls_score(pred: str, golds, tau: float = ANLS_TAU) -> float:
    """Best similarity across golds; similarities at or below 1-tau score 0.

    Per gold: s = 1 - NL when NL < tau, else 0, with NL the normalized
    Levenshtein distance between normalized strings. The cutoff is
    strict, so NL exactly at tau scores 0.
    """
    if not golds:
        raise InputError("anls_score requires at least one gold answer")
    p = normalize_answer(pred)
    best = 0.0
    for g in golds:
        nl = normalized_levenshtein(p, normalize_answer(g))
        s = 1.0 - nl if nl < tau else 0.0
        if s > best:
            best = s
    return best


def exact_match(pred: str, golds) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise InputError("exact_match requires at least one gold answer")
    p = normalize_answer(pred)
    return int(any(p == normalize_answer(g) for g in golds))


def _bag_f1(pred_bag: Counter, gold_bag: Counter) -> float:
    if not pred_bag and not gold_bag:
        return 1.0
    if not pred_bag or not gold_bag:
        return 0.0
    overlap = sum((pred_bag & gold_bag).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred_bag.values())
    recall = overlap / sum(gold_bag.values())
    return 2 * precision * recall / (precision + recall)


def macro_f1(pred: str, golds) -> float:
    """Best bag-of-tokens F1 across golds; repeated tokens count."""
    if not golds:
        raise InputError("macro_f1 requires at least one gold answer")
    pred_bag = Counter(token_bag(pred))
    return max(_bag_f1(pred_bag, Counter(token_bag(g))) for g in golds)


@dataclass(frozen=True)
class QuestionMetrics:
    question_id: str
    anls: float
    em: int
    f1: float


@dataclass(frozen=True)
class MetricReport:
    anls: float
    em: float
    macro_f1: float
    rows: tuple[QuestionMetrics, ...]


def evaluate(entries) -> MetricReport:
    """Score (question_id, prediction, golds) triples and average.

    Detail rows keep input order; aggregates are plain means.
    """
    entries = list(entries)
    if not entries:
        raise InputError("evaluate requires at least one prediction")
    seen: set[str] = set()
    rows = []
    for qid, pred, golds in entries:
        if qid in seen:
            raise InputError(f"duplicate question id {qid!r}")
        seen.add(qid)
        rows.append(QuestionMetrics(
            question_id=qid,
            anls=anls_score(pred, golds),
            em=exact_match(pred, golds),
            f1=macro_f1(pred, golds),
        ))
    n = len(rows)
    return MetricReport(
        anls=sum(r.anls for r in rows) / n,
        em=sum(r.em for r in rows) / n,
        macro_f1=sum(r.f1 for r in rows) / n,
        rows=tuple(rows),
    )


def report_to_json(report: MetricReport) -> dict:
    return {
        "anls": report.anls,
        "em": report.em,
        "macro_f1": report.macro_f1,
        "per_question": [
            {"id": r.question_id, "anls": r.anls, "em": r.em, "f1": r.f1}
            for r in report.rows
        ],
    }


def report_to_table(report: MetricReport) -> str:
    """Aligned plain-text table, one row per question plus a mean row."""
    header = f"{'id':<24} {'anls':>8} {'em':>4} {'f1':>8}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(f"{r.question_id:<24} {r.anls:>8.4f} {r.em:>4d} {r.f1:>8.4f}")
    lines.append("-" * len(header))
    lines.append(f"{'mean':<24} {report.anls:>8.4f} {report.em:>4.2f} "
                 f"{report.macro_f1:>8.4f}")
    return "\n".join(lines)
