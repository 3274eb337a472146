"""Hypothesis scoring and winner selection.

Four interchangeable scorers: verbalized confidence (self-evaluation at
T=0), full-context logprobs, answer-only logprobs, and a domain-supplied
external validator. All are argmax-selected; unparsable candidates carry
-inf so a parseable zero-confidence hypothesis still beats garbage.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .backends import Backend, GenerationRequest, LogprobQuery
from .errors import EmptyCandidatesError, NoAnswerTokensError
from .templates import TemplateSet
from .types import NEG_INF, Hypothesis, ScoredHypothesis

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


@dataclass
class RerankContext:
    """Everything a scorer needs about one instance's in-context block.

    ``answer_spans`` are character ranges of the example targets within
    ``rendered_examples``; span intersection is how answer-restricted
    scoring stays tokenizer-agnostic.
    """

    rendered_examples: str
    answer_spans: list[tuple[int, int]] = field(default_factory=list)
    templates: TemplateSet | None = None
    word: str | None = None
    model_id: str = ""
    scorer_model_id: str = ""
    tag: str = ""
    confidence_temperature: float = 0.0


def parse_confidence_reply(reply: str) -> float:
    """First real number in the reply, clamped to [0, 1]; -inf if none."""
    m = _NUMBER_RE.search(reply)
    if m is None:
        return NEG_INF
    return max(0.0, min(1.0, float(m.group(0))))


def score_verbal(h: Hypothesis, ctx: RerankContext, backend: Backend) -> float:
    """Ask the model itself for a probability estimate of the hypothesis."""
    assert ctx.templates is not None
    available = {"examples": ctx.rendered_examples, "hypothesis": h.raw,
                 "word": ctx.word or ""}
    prompt = ctx.templates.render_for("confidence", available)
    system = ctx.templates.render("system_base")
    reply = backend.chat_generate(GenerationRequest(
        system=system, user=prompt, temperature=ctx.confidence_temperature,
        model_id=ctx.model_id, tag=f"{ctx.tag}:conf"))
    return parse_confidence_reply(reply)


def _logprob_result(h: Hypothesis, ctx: RerankContext, backend: Backend):
    assert ctx.templates is not None
    available = {"hypothesis": h.raw, "word": ctx.word or ""}
    prefix = ctx.templates.render_for("logprob_prefix", available) + "\n"
    continuation = ctx.rendered_examples
    query = LogprobQuery(prefix=prefix, continuation=continuation,
                         model_id=ctx.scorer_model_id or ctx.model_id)
    return backend.completion_logprobs(query).validate(continuation)


def score_p_data(h: Hypothesis, ctx: RerankContext, backend: Backend) -> float:
    """Sum of log-probabilities of the whole in-context block given the
    hypothesis."""
    return _logprob_result(h, ctx, backend).total()


def score_p_answer(h: Hypothesis, ctx: RerankContext, backend: Backend) -> float:
    """Like score_p_data, but only tokens whose character span intersects an
    answer span count."""
    result = _logprob_result(h, ctx, backend)
    total = 0.0
    any_hit = False
    for _, logprob, start, end in result.tokens:
        if any(start < b and a < end for a, b in ctx.answer_spans):
            total += logprob
            any_hit = True
    if not any_hit:
        raise NoAnswerTokensError("no token intersects any answer span")
    return total


def score_candidates(candidates: list[Hypothesis], ctx: RerankContext, method: str,
                     backend: Backend, external_fn=None) -> list[ScoredHypothesis]:
    """Score every candidate under one method, in generation order.

    external_validator needs a domain-supplied ``external_fn`` mapping a
    Hypothesis to an extended-real score.
    """
    out: list[ScoredHypothesis] = []
    for h in candidates:
        if method == "verbal_conf":
            score: float | Fraction = score_verbal(h, ctx, backend)
        elif method == "p_data":
            score = score_p_data(h, ctx, backend) if h.parsed is not None else NEG_INF
        elif method == "p_answer":
            score = score_p_answer(h, ctx, backend) if h.parsed is not None else NEG_INF
        elif method == "external_validator":
            if external_fn is None:
                raise ValueError("external_validator needs a domain validator")
            score = external_fn(h)
        else:
            raise ValueError(f"unknown rerank method {method!r}")
        out.append(ScoredHypothesis(hypothesis=h, method=method, score=score))
    return out


def select_best(candidates: list[ScoredHypothesis]) -> tuple[ScoredHypothesis | None, bool]:
    """Argmax with generation-order tie-breaking.

    When every candidate scored -inf there is no usable hypothesis: the
    caller answers in plain few-shot mode and flags the fallback.
    """
    if not candidates:
        raise EmptyCandidatesError("no candidates to select from")
    best = candidates[0]
    for c in candidates[1:]:
        if c.score > best.score:
            best = c
    if best.score == NEG_INF:
        return None, True
    return best, False
