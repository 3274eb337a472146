"""Domain-independent data types shared by every module.

Scores are extended reals: ordinary floats, exact `Fraction`s (functions
domain), or ``-inf`` for unparsable hypotheses. Records serialize scores as
strings so rationals and infinities survive the JSON round trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

NEG_INF = float("-inf")

DOMAINS = ("functions", "colours", "translation")
SETTING_KINDS = ("few_shot", "zs_cot", "true_instruction", "instruction_inference")
RERANK_METHODS = ("verbal_conf", "p_data", "p_answer", "external_validator")

RECORD_SCHEMA = 1


@dataclass(frozen=True)
class Example:
    """One input/output pair, the unit of in-context data."""

    source: str
    target: str

    def __post_init__(self):
        if not self.source:
            raise ValueError("example source must be non-empty")


@dataclass(frozen=True)
class TaskInstance:
    """One query together with the in-context examples shown for it."""

    id: str
    domain: str
    in_context: tuple[Example, ...]
    query: Example

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if len(self.in_context) < 1:
            raise ValueError("at least one in-context example is required")
        object.__setattr__(self, "in_context", tuple(self.in_context))


@dataclass(frozen=True)
class Setting:
    """An experiment condition: the prompting regime plus reranker, if any."""

    kind: str
    rerank: str | None = None

    def __post_init__(self):
        if self.kind not in SETTING_KINDS:
            raise ValueError(f"unknown setting kind {self.kind!r}")
        if (self.rerank is not None) != (self.kind == "instruction_inference"):
            raise ValueError("rerank must be set exactly when kind is instruction_inference")
        if self.rerank is not None and self.rerank not in RERANK_METHODS:
            raise ValueError(f"unknown rerank method {self.rerank!r}")

    def key(self) -> str:
        return self.kind if self.rerank is None else f"{self.kind}:{self.rerank}"

    @classmethod
    def parse(cls, text: str) -> "Setting":
        kind, _, rerank = text.partition(":")
        return cls(kind=kind, rerank=rerank or None)


@dataclass(frozen=True)
class Hypothesis:
    """Raw model-proposed rule text, optionally parsed into a domain payload.

    ``word`` is set for per-word hypotheses (colours, translation);
    ``parsed`` is a domain-specific structure or None when unparsable.
    """

    raw: str
    word: str | None = None
    parsed: Any = None

    def __post_init__(self):
        if not self.raw:
            raise ValueError("hypothesis raw text must be non-empty")


@dataclass(frozen=True)
class ScoredHypothesis:
    hypothesis: Hypothesis
    method: str
    score: float | Fraction

    def unparsable(self) -> bool:
        return self.score == NEG_INF


def score_to_str(score: float | Fraction) -> str:
    if score == NEG_INF:
        return "-inf"
    if isinstance(score, Fraction):
        return str(score)
    return repr(float(score))


def score_from_str(text: str) -> float | Fraction:
    if text == "-inf":
        return NEG_INF
    if "/" in text:
        return Fraction(text)
    value = float(text)
    # integers serialized from Fractions come back exact
    if text.lstrip("+-").isdigit():
        return Fraction(text)
    return value


def _hypothesis_to_dict(h: Hypothesis) -> dict:
    parsed = h.parsed
    if isinstance(parsed, tuple):
        parsed = list(parsed)
    return {"raw": h.raw, "word": h.word, "parsed": parsed}


def _hypothesis_from_dict(d: dict) -> Hypothesis:
    parsed = d.get("parsed")
    return Hypothesis(raw=d["raw"], word=d.get("word"), parsed=parsed)


def scored_to_dict(s: ScoredHypothesis) -> dict:
    return {
        "hypothesis": _hypothesis_to_dict(s.hypothesis),
        "method": s.method,
        "score": score_to_str(s.score),
    }


def scored_from_dict(d: dict) -> ScoredHypothesis:
    return ScoredHypothesis(
        hypothesis=_hypothesis_from_dict(d["hypothesis"]),
        method=d["method"],
        score=score_from_str(d["score"]),
    )


@dataclass
class ResultRecord:
    """One evaluated query: raw output, parsed answer, and scoring context."""

    instance_id: str
    domain: str
    model_id: str
    setting: Setting
    trial_index: int
    temperature: float
    raw_output: str
    parsed_output: str | None
    marked: bool
    correct: bool | None
    segment_chrf: float | None = None
    squared_error: float | None = None
    chosen_hypothesis: ScoredHypothesis | None = None
    candidates: list[ScoredHypothesis] = field(default_factory=list)
    word_winners: list[ScoredHypothesis] = field(default_factory=list)
    hypothesis_correct: bool | None = None
    hyp_evals: dict[str, str] = field(default_factory=dict)
    fallback_used: bool = False
    query_source: str = ""
    reference: str = ""
    truth: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": RECORD_SCHEMA,
            "instance_id": self.instance_id,
            "domain": self.domain,
            "model_id": self.model_id,
            "setting": self.setting.key(),
            "trial_index": self.trial_index,
            "temperature": self.temperature,
            "raw_output": self.raw_output,
            "parsed_output": self.parsed_output,
            "marked": self.marked,
            "correct": self.correct,
            "segment_chrf": self.segment_chrf,
            "squared_error": self.squared_error,
            "chosen_hypothesis": (
                scored_to_dict(self.chosen_hypothesis) if self.chosen_hypothesis else None
            ),
            "candidates": [scored_to_dict(c) for c in self.candidates],
            "word_winners": [scored_to_dict(w) for w in self.word_winners],
            "hypothesis_correct": self.hypothesis_correct,
            "hyp_evals": self.hyp_evals,
            "fallback_used": self.fallback_used,
            "query_source": self.query_source,
            "reference": self.reference,
            "truth": self.truth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        return cls(
            instance_id=d["instance_id"],
            domain=d["domain"],
            model_id=d["model_id"],
            setting=Setting.parse(d["setting"]),
            trial_index=d["trial_index"],
            temperature=d["temperature"],
            raw_output=d["raw_output"],
            parsed_output=d.get("parsed_output"),
            marked=d.get("marked", False),
            correct=d.get("correct"),
            segment_chrf=d.get("segment_chrf"),
            squared_error=d.get("squared_error"),
            chosen_hypothesis=(
                scored_from_dict(d["chosen_hypothesis"]) if d.get("chosen_hypothesis") else None
            ),
            candidates=[scored_from_dict(c) for c in d.get("candidates", [])],
            word_winners=[scored_from_dict(w) for w in d.get("word_winners", [])],
            hypothesis_correct=d.get("hypothesis_correct"),
            hyp_evals=d.get("hyp_evals", {}),
            fallback_used=d.get("fallback_used", False),
            query_source=d.get("query_source", ""),
            reference=d.get("reference", ""),
            truth=d.get("truth", {}),
        )
