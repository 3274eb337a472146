"""Evaluation statistics: chrF, rank/biserial correlations, FDR, aggregation.

chrF here is the plain character n-gram F-score (no word-order component):
n-grams are taken over whitespace-stripped text, per-order precisions and
recalls come from clipped counts, and the score is the F_beta of their
means over orders with nonzero denominators, scaled to [0, 100].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import permutations
from statistics import fmean, median, stdev

from scipy.stats import t as student_t

from .errors import DegenerateInputError, EmptyInputError, OutOfRangeError


@dataclass(frozen=True)
class ChrfParams:
    max_n: int = 6
    beta: float = 2.0
    level: str = "corpus"  # corpus | segment

    def __post_init__(self):
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.level not in ("corpus", "segment"):
            raise ValueError(f"unknown chrF level {self.level!r}")


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int


def _strip_ws(text: str) -> str:
    return "".join(text.split())


def _ngram_counts(chars: str, n: int) -> Counter:
    return Counter(chars[i:i + n] for i in range(len(chars) - n + 1))


def _fscore(precision: float, recall: float, beta: float) -> float:
    if precision + recall == 0:
        return 0.0
    b2 = beta * beta
    return 100.0 * (1 + b2) * precision * recall / (b2 * precision + recall)


def chrf(pairs: list[tuple[str, str]], params: ChrfParams = ChrfParams()) -> float:
    """chrF over (reference, hypothesis) pairs.

    Corpus level pools n-gram counts over all pairs before computing
    precision/recall; segment level scores each pair separately and returns
    the unweighted mean.
    """
    if not pairs:
        raise EmptyInputError("chrf needs at least one pair")
    if params.level == "segment":
        return fmean(segment_chrf(ref, hyp, params) for ref, hyp in pairs)

    match_n = [0] * params.max_n
    hyp_n = [0] * params.max_n
    ref_n = [0] * params.max_n
    for ref, hyp in pairs:
        ref_chars = _strip_ws(ref)
        hyp_chars = _strip_ws(hyp)
        for n in range(1, params.max_n + 1):
            ref_counts = _ngram_counts(ref_chars, n)
            hyp_counts = _ngram_counts(hyp_chars, n)
            match_n[n - 1] += sum((ref_counts & hyp_counts).values())
            hyp_n[n - 1] += sum(hyp_counts.values())
            ref_n[n - 1] += sum(ref_counts.values())
    precisions = [match_n[i] / hyp_n[i] for i in range(params.max_n) if hyp_n[i] > 0]
    recalls = [match_n[i] / ref_n[i] for i in range(params.max_n) if ref_n[i] > 0]
    precision = fmean(precisions) if precisions else 0.0
    recall = fmean(recalls) if recalls else 0.0
    return _fscore(precision, recall, params.beta)


def segment_chrf(reference: str, hypothesis: str, params: ChrfParams = ChrfParams()) -> float:
    return chrf([(reference, hypothesis)],
                ChrfParams(max_n=params.max_n, beta=params.beta, level="corpus"))


def _average_ranks(values: list[float]) -> list[float]:
    """Ranks starting at 1; tied values share the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _pearson(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    mx = fmean(xs)
    my = fmean(ys)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError("constant input to correlation")
    return sxy / math.sqrt(sxx * syy)


def _t_p_value(coefficient: float, n: int) -> float:
    if abs(coefficient) >= 1.0:
        return 0.0
    t_stat = coefficient * math.sqrt((n - 2) / (1 - coefficient * coefficient))
    return 2.0 * float(student_t.sf(abs(t_stat), n - 2))


def spearman(xs: list[float], ys: list[float], p_method: str = "t") -> CorrelationResult:
    """Spearman rank correlation with average ranks for ties.

    The two-sided p-value uses the t approximation by default; pass
    ``p_method="permutation"`` for an exact test on tiny samples (n <= 8).
    """
    if len(xs) != len(ys) or len(xs) < 3:
        raise DegenerateInputError("need equal-length inputs with n >= 3")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateInputError("constant input to spearman")
    rx = _average_ranks(list(xs))
    ry = _average_ranks(list(ys))
    rho = _pearson(rx, ry)
    rho = max(-1.0, min(1.0, rho))
    if p_method == "permutation":
        if len(xs) > 8:
            raise ValueError("permutation p-values are only supported for n <= 8")
        hits = 0
        total = 0
        for perm in permutations(ry):
            total += 1
            if abs(_pearson(rx, list(perm))) >= abs(rho) - 1e-12:
                hits += 1
        return CorrelationResult(rho, hits / total, len(xs))
    return CorrelationResult(rho, _t_p_value(rho, len(xs)), len(xs))


def point_biserial(flags: list[bool], values: list[float]) -> CorrelationResult:
    """Correlation between a binary variable and a continuous one.

    Uses the classical formula with the population standard deviation;
    identical to the Pearson correlation of the 0/1 encoding with values.
    """
    if len(flags) != len(values) or len(flags) < 3:
        raise DegenerateInputError("need equal-length inputs with n >= 3")
    ones = [v for f, v in zip(flags, values) if f]
    zeros = [v for f, v in zip(flags, values) if not f]
    if not ones or not zeros:
        raise DegenerateInputError("both flag classes must be present")
    if len(set(values)) == 1:
        raise DegenerateInputError("constant values")
    n = len(values)
    mean_all = fmean(values)
    s_pop = math.sqrt(sum((v - mean_all) ** 2 for v in values) / n)
    p = len(ones) / n
    q = 1.0 - p
    r = (fmean(ones) - fmean(zeros)) / s_pop * math.sqrt(p * q)
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r, _t_p_value(r, n), n)


def bh_fdr(p_values: list[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjustment, returned in input order."""
    for p in p_values:
        if not (0.0 <= p <= 1.0):
            raise OutOfRangeError(p)
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        idx = order[rank - 1]
        running = min(running, m * p_values[idx] / rank)
        adjusted[idx] = running
    return adjusted


def aggregate(values: list[float]) -> tuple[float, float]:
    """Mean and standard error over trials; one trial has zero error."""
    if not values:
        raise EmptyInputError("aggregate needs at least one value")
    if len(values) == 1:
        return values[0], 0.0
    return fmean(values), stdev(values) / math.sqrt(len(values))


def median_of(values: list[float]) -> float:
    if not values:
        raise EmptyInputError("median needs at least one value")
    return median(values)
