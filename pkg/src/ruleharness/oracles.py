"""Brute-force reference implementations used only for verification.

Each function here recomputes a statistic from first principles with a
different algorithm than `metrics`, so agreement between the two is
meaningful. `harness oracle-check` and the test suite compare them on
randomized inputs.
"""

from __future__ import annotations

import math
import random

import numpy as np
from scipy.stats import t as student_t

from .metrics import ChrfParams


def chrf_reference(pairs: list[tuple[str, str]], params: ChrfParams = ChrfParams()) -> float:
    """chrF by explicit n-gram list matching (consume-one-per-match)."""
    if params.level == "segment":
        singles = [chrf_reference([p], ChrfParams(params.max_n, params.beta, "corpus"))
                   for p in pairs]
        return sum(singles) / len(singles)

    def grams(text: str, n: int) -> list[str]:
        chars = "".join(text.split())
        return [chars[i:i + n] for i in range(max(0, len(chars) - n + 1))]

    precisions: list[float] = []
    recalls: list[float] = []
    for n in range(1, params.max_n + 1):
        matched = 0
        hyp_total = 0
        ref_total = 0
        for ref, hyp in pairs:
            ref_list = grams(ref, n)
            hyp_list = grams(hyp, n)
            hyp_total += len(hyp_list)
            ref_total += len(ref_list)
            pool = list(ref_list)
            for g in hyp_list:
                if g in pool:
                    pool.remove(g)
                    matched += 1
        if hyp_total > 0:
            precisions.append(matched / hyp_total)
        if ref_total > 0:
            recalls.append(matched / ref_total)
    precision = sum(precisions) / len(precisions) if precisions else 0.0
    recall = sum(recalls) / len(recalls) if recalls else 0.0
    if precision + recall == 0:
        return 0.0
    b2 = params.beta ** 2
    return 100.0 * (1 + b2) * precision * recall / (b2 * precision + recall)


def ranks_reference(values: list[float]) -> list[float]:
    """Rank of v = (count below v) + (count equal to v + 1) / 2."""
    out = []
    for v in values:
        below = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        out.append(below + (equal + 1) / 2)
    return out


def spearman_reference(xs: list[float], ys: list[float]) -> tuple[float, float]:
    rx = ranks_reference(xs)
    ry = ranks_reference(ys)
    rho = float(np.corrcoef(rx, ry)[0, 1])
    if abs(rho) >= 1.0:
        return rho, 0.0
    n = len(xs)
    t_stat = rho * math.sqrt((n - 2) / (1 - rho * rho))
    return rho, 2.0 * float(student_t.sf(abs(t_stat), n - 2))


def point_biserial_reference(flags: list[bool], values: list[float]) -> tuple[float, float]:
    """Point-biserial as the Pearson correlation of the 0/1 encoding."""
    encoded = [1.0 if f else 0.0 for f in flags]
    r = float(np.corrcoef(encoded, values)[0, 1])
    if abs(r) >= 1.0:
        return r, 0.0
    n = len(values)
    t_stat = r * math.sqrt((n - 2) / (1 - r * r))
    return r, 2.0 * float(student_t.sf(abs(t_stat), n - 2))


def bh_fdr_reference(p_values: list[float]) -> list[float]:
    """Literal step-up definition: adjusted_(i) = min(1, min_{j>=i} m p_(j) / j)."""
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    for pos, idx in enumerate(order, start=1):
        candidates = [m * p_values[order[j - 1]] / j for j in range(pos, m + 1)]
        adjusted[idx] = min(1.0, min(candidates))
    return adjusted


def aggregate_reference(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    sample_var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(sample_var) / math.sqrt(n)


def _random_text(rng: random.Random, alphabet: str = "abcdef ", lo: int = 0, hi: int = 14) -> str:
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi)))


def run_oracle_checks(cases: int = 120, seed: int = 2024,
                      tol: float = 1e-9, agg_tol: float = 1e-12) -> list[tuple[str, int, float]]:
    """Compare metrics against every reference on randomized cases.

    Returns (name, n_cases, max_abs_difference) rows; raises AssertionError
    on any disagreement beyond tolerance.
    """
    from . import metrics

    rng = random.Random(seed)
    report: list[tuple[str, int, float]] = []

    worst = 0.0
    for _ in range(cases):
        pairs = [(_random_text(rng), _random_text(rng)) for _ in range(rng.randint(1, 4))]
        params = ChrfParams(max_n=rng.randint(1, 6), beta=rng.choice([1.0, 2.0, 3.0]),
                            level=rng.choice(["corpus", "segment"]))
        got = metrics.chrf(pairs, params)
        want = chrf_reference(pairs, params)
        worst = max(worst, abs(got - want))
    assert worst <= tol, f"chrf disagrees with reference by {worst}"
    report.append(("chrf", cases, worst))

    worst = 0.0
    for _ in range(cases):
        n = rng.randint(3, 40)
        xs = [rng.choice([rng.uniform(-5, 5), float(rng.randint(-3, 3))]) for _ in range(n)]
        ys = [rng.choice([rng.uniform(-5, 5), float(rng.randint(-3, 3))]) for _ in range(n)]
        if len(set(xs)) == 1 or len(set(ys)) == 1:
            continue
        got = metrics.spearman(xs, ys)
        rho, p = spearman_reference(xs, ys)
        worst = max(worst, abs(got.coefficient - rho), abs(got.p_value - p))
    assert worst <= tol, f"spearman disagrees with reference by {worst}"
    report.append(("spearman", cases, worst))

    worst = 0.0
    for _ in range(cases):
        n = rng.randint(4, 40)
        flags = [rng.random() < 0.5 for _ in range(n)]
        if all(flags) or not any(flags):
            flags[0] = True
            flags[1] = False
        values = [rng.uniform(-10, 10) for _ in range(n)]
        got = metrics.point_biserial(flags, values)
        r, p = point_biserial_reference(flags, values)
        worst = max(worst, abs(got.coefficient - r), abs(got.p_value - p))
    assert worst <= tol, f"point_biserial disagrees with reference by {worst}"
    report.append(("point_biserial", cases, worst))

    worst = 0.0
    for _ in range(cases):
        m = rng.randint(1, 12)
        ps = [round(rng.random(), rng.randint(1, 4)) for _ in range(m)]
        got = metrics.bh_fdr(ps)
        want = bh_fdr_reference(ps)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    assert worst <= tol, f"bh_fdr disagrees with reference by {worst}"
    report.append(("bh_fdr", cases, worst))

    worst = 0.0
    for _ in range(cases):
        n = rng.randint(1, 12)
        values = [rng.uniform(-3, 3) for _ in range(n)]
        got = metrics.aggregate(values)
        want = aggregate_reference(values)
        worst = max(worst, abs(got[0] - want[0]), abs(got[1] - want[1]))
    assert worst <= agg_tol, f"aggregate disagrees with reference by {worst}"
    report.append(("aggregate", cases, worst))

    return report
