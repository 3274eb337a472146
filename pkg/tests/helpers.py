"""Scripted ground-truth backends for end-to-end tests.

Each oracle answers any prompt the harness can produce by recomputing the
right answer from the prompt text itself (fitting the in-context pairs,
interpreting with the gold grammar, or consulting the gold wordlist/sketch),
so every setting should hit its ceiling metric when driven by one.
"""

from __future__ import annotations

import re
from fractions import Fraction

from ruleharness.backends import FunctionBackend, LogprobResult
from ruleharness.colours import (
    ColourGrammar,
    gold_grammar,
    interpret_colours,
    parse_colour_rule,
    validate_colour_hypothesis,
)
from ruleharness.functions import ParsedLinear, parse_linear_hypothesis
from ruleharness.translation import (
    TranslationData,
    strip_markers,
)
from ruleharness.types import Example

_PAIR_RE = re.compile(r"Input: (.+)\nOutput: (.+)")
_INPUT_RE = re.compile(r"Input: (.+)")


def _fit_pairs(pairs: list[tuple[Fraction, Fraction]]) -> ParsedLinear:
    for (x1, y1), (x2, y2) in zip(pairs, pairs[1:]):
        if x1 != x2:
            slope = (y2 - y1) / (x2 - x1)
            return ParsedLinear(slope=slope, intercept=y1 - slope * x1)
    return ParsedLinear(slope=Fraction(0), intercept=pairs[0][1])


def _single_token(continuation: str, logprob: float) -> LogprobResult:
    return LogprobResult(((continuation, logprob, 0, len(continuation)),))


def functions_oracle() -> FunctionBackend:
    def chat(request) -> str:
        user = request.user
        if "Probability:" in user:
            return "1.0"
        pairs = [(Fraction(a), Fraction(b)) for a, b in _PAIR_RE.findall(user)]
        if "Write the function" in user:
            f = _fit_pairs(pairs)
            return f"Output: y = {f.intercept}x^0 + {f.slope}x^1"
        parsed = None
        for line in user.splitlines():
            candidate = parse_linear_hypothesis(line)
            if candidate is not None:
                parsed = candidate
                break
        if parsed is None:
            parsed = _fit_pairs(pairs)
        query = Fraction(_INPUT_RE.findall(user)[-1].strip())
        y = parsed.slope * query + parsed.intercept
        y_text = str(int(y)) if y.denominator == 1 else str(y)
        if "Final Output:" in user:
            return f"The pattern is linear. Final Output: {y_text}"
        return f"Output: {y_text}"

    def logprobs(query) -> LogprobResult:
        hyp = None
        for line in query.prefix.splitlines():
            hyp = parse_linear_hypothesis(line)
            if hyp is not None:
                break
        pairs = [(Fraction(a), Fraction(b)) for a, b in _PAIR_RE.findall(query.continuation)]
        fits = hyp is not None and all(
            hyp.slope * x + hyp.intercept == y for x, y in pairs)
        return _single_token(query.continuation, -0.01 if fits else -10.0)

    return FunctionBackend(chat, logprobs)


def colours_oracle(grammar: ColourGrammar | None = None) -> FunctionBackend:
    grammar = grammar or gold_grammar()

    def chat(request) -> str:
        user = request.user
        if "Probability:" in user:
            return "1.0"
        m = re.search(r"deduce what (\S+) means", user)
        if m:
            word = m.group(1)
            return f"{word} -> {grammar.rules[word].render()}"
        query = _INPUT_RE.findall(user)[-1].strip()
        output = interpret_colours(query.split(), grammar)
        if "Final Output:" in user:
            return f"Working token by token. Final Output: {output}"
        return f"Output: {output}"

    def logprobs(query) -> LogprobResult:
        consistent = False
        examples = [Example(s, t) for s, t in _PAIR_RE.findall(query.continuation)]
        for line in query.prefix.splitlines():
            if "->" not in line:
                continue
            try:
                word, meaning = parse_colour_rule(line.split(":", 1)[-1])
            except Exception:
                continue
            consistent = validate_colour_hypothesis(word, meaning, examples) == 0
            break
        return _single_token(query.continuation, -0.01 if consistent else -10.0)

    return FunctionBackend(chat, logprobs)


def translation_oracle(data: TranslationData) -> FunctionBackend:
    truth = {row.source: row.target for row in data.corpus.rows + data.corpus.test_rows}
    question_to_gold = {f.question: f.gold for f in data.features}

    def chat(request) -> str:
        user = request.user
        if "Probability:" in user:
            return "1.0"
        for question, gold in question_to_gold.items():
            if question in user:
                return f"Answer: {gold}"
        m = re.search(r"translation of the word '([^']+)'", user)
        if m:
            word = m.group(1)
            translations = data.wordlist.entries.get(word)
            if not translations:
                return "I don't know"
            return f"{word} -> {strip_markers(translations[0])}"
        m = re.search(r"Translate the following sentence from .+ to .+:\n(.+)", user)
        assert m, f"oracle cannot read prompt: {user[:120]!r}"
        return truth[m.group(1).strip()]

    def logprobs(query) -> LogprobResult:
        m = re.search(r"This is the translation of the word: .*-> (.+)", query.prefix)
        stem = strip_markers(m.group(1).strip()) if m else ""
        targets = re.findall(r"translation: (.+)", query.continuation)
        consistent = bool(stem) and all(stem.lower() in t.lower() for t in targets)
        return _single_token(query.continuation, -0.01 if consistent else -10.0)

    return FunctionBackend(chat, logprobs)
