"""Summary tables from persisted record files.

Pure post-processing: everything here is a function of the records on disk,
with no backend access. Output is CSV (headline numbers, correlation
tables) plus a plot-data file with one row per bar so figures can be
regenerated by any plotting tool.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import metrics
from .errors import DegenerateInputError, EmptyInputError
from .types import ResultRecord


def load_records(records_dir: str | Path) -> list[ResultRecord]:
    paths = sorted(Path(records_dir).rglob("records*.jsonl"))
    records: list[ResultRecord] = []
    for path in paths:
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(ResultRecord.from_dict(json.loads(line)))
    if not records:
        raise EmptyInputError(f"no record files under {records_dir}")
    return records


@dataclass
class GroupSummary:
    model_id: str
    domain: str
    setting: str
    n_records: int
    n_trials: int
    accuracy_mean: float | None = None
    accuracy_se: float | None = None
    median_squared_error: float | None = None
    corpus_chrf_mean: float | None = None
    corpus_chrf_se: float | None = None
    fallback_rate: float = 0.0


@dataclass
class CorrelationRow:
    model_id: str
    domain: str
    setting: str
    quantity: str  # e.g. slope, intercept, hyp_vs_fewshot, word:<w>
    coefficient: float
    p_value: float
    p_adjusted: float | None
    n: int


@dataclass
class Summary:
    groups: list[GroupSummary] = field(default_factory=list)
    correlations: list[CorrelationRow] = field(default_factory=list)


def _group_key(r: ResultRecord) -> tuple[str, str, str]:
    return (r.model_id, r.domain, r.setting.key())


def _per_trial(records: list[ResultRecord]) -> dict[int, list[ResultRecord]]:
    trials: dict[int, list[ResultRecord]] = defaultdict(list)
    for r in records:
        trials[r.trial_index].append(r)
    return trials


def summarize(records: list[ResultRecord]) -> Summary:
    if not records:
        raise EmptyInputError("no records to summarize")
    summary = Summary()
    groups: dict[tuple[str, str, str], list[ResultRecord]] = defaultdict(list)
    for r in records:
        groups[_group_key(r)].append(r)

    for (model, domain, setting), rows in sorted(groups.items()):
        trials = _per_trial(rows)
        group = GroupSummary(model_id=model, domain=domain, setting=setting,
                             n_records=len(rows), n_trials=len(trials))
        group.fallback_rate = sum(r.fallback_used for r in rows) / len(rows)
        if domain in ("functions", "colours"):
            per_trial_acc = [
                sum(1 for r in t_rows if r.correct) / len(t_rows)
                for _, t_rows in sorted(trials.items())
            ]
            group.accuracy_mean, group.accuracy_se = metrics.aggregate(per_trial_acc)
        if domain == "functions":
            errors = [r.squared_error for r in rows if r.squared_error is not None]
            if errors:
                group.median_squared_error = metrics.median_of(errors)
        if domain in ("colours", "translation"):
            per_trial_chrf = []
            for _, t_rows in sorted(trials.items()):
                pairs = [(r.reference, r.parsed_output or "") for r in t_rows]
                per_trial_chrf.append(metrics.chrf(pairs))
            group.corpus_chrf_mean, group.corpus_chrf_se = metrics.aggregate(per_trial_chrf)
        summary.groups.append(group)

    summary.correlations = _correlation_tables(groups)
    return summary


def _coefficient_rows(model: str, setting: str, rows: list[ResultRecord]) -> list[CorrelationRow]:
    true_slope, hyp_slope, true_int, hyp_int = [], [], [], []
    for r in rows:
        if r.chosen_hypothesis is None or r.chosen_hypothesis.hypothesis.parsed is None:
            continue
        parsed = r.chosen_hypothesis.hypothesis.parsed
        if not r.truth:
            continue
        true_slope.append(float(Fraction(r.truth["slope"])))
        hyp_slope.append(float(Fraction(parsed[0])))
        true_int.append(float(Fraction(r.truth["intercept"])))
        hyp_int.append(float(Fraction(parsed[1])))
    out = []
    for name, xs, ys in (("slope", true_slope, hyp_slope),
                         ("intercept", true_int, hyp_int)):
        if len(xs) < 3:
            continue
        try:
            result = metrics.spearman(xs, ys)
        except DegenerateInputError:
            continue
        out.append(CorrelationRow(model, "functions", setting, name,
                                  result.coefficient, result.p_value, None, result.n))
    return out


def _correlation_tables(groups) -> list[CorrelationRow]:
    out: list[CorrelationRow] = []
    fewshot_correct: dict[tuple[str, str, str, int], bool] = {}
    fewshot_chrf: dict[tuple[str, str, str, int], float] = {}
    for (model, domain, setting), rows in groups.items():
        if setting != "few_shot":
            continue
        for r in rows:
            key = (model, domain, r.instance_id, r.trial_index)
            fewshot_correct[key] = bool(r.correct)
            if r.segment_chrf is not None:
                fewshot_chrf[key] = r.segment_chrf

    per_model_rows: dict[str, list[CorrelationRow]] = defaultdict(list)
    for (model, domain, setting), rows in sorted(groups.items()):
        if not setting.startswith("instruction_inference"):
            continue
        if domain == "functions":
            out.extend(_coefficient_rows(model, setting, rows))
            flags, values = [], []
            for r in rows:
                if r.hypothesis_correct is None:
                    continue
                key = (model, domain, r.instance_id, r.trial_index)
                if key in fewshot_correct:
                    flags.append(bool(r.hypothesis_correct))
                    values.append(1.0 if fewshot_correct[key] else 0.0)
            row = _safe_biserial(model, domain, setting, "hyp_vs_fewshot", flags, values)
            if row:
                per_model_rows[model].append(row)
        elif domain == "colours":
            by_word: dict[str, tuple[list[bool], list[float]]] = defaultdict(
                lambda: ([], []))
            for r in rows:
                key = (model, domain, r.instance_id, r.trial_index)
                if key not in fewshot_correct:
                    continue
                for word, verdict in r.hyp_evals.items():
                    flags, values = by_word[word]
                    flags.append(verdict == "correct")
                    values.append(1.0 if fewshot_correct[key] else 0.0)
            for word, (flags, values) in sorted(by_word.items()):
                row = _safe_biserial(model, domain, setting, f"word:{word}", flags, values)
                if row:
                    per_model_rows[model].append(row)
        elif domain == "translation":
            flags, values = [], []
            for r in rows:
                key = (model, domain, r.instance_id, r.trial_index)
                if key not in fewshot_chrf:
                    continue
                for word, verdict in r.hyp_evals.items():
                    if verdict == "skipped":
                        continue
                    flags.append(verdict == "correct")
                    values.append(fewshot_chrf[key])
            row = _safe_biserial(model, domain, setting, "vocab_vs_fewshot_chrf",
                                 flags, values)
            if row:
                per_model_rows[model].append(row)

    # FDR correction is applied per model
    for model, rows in sorted(per_model_rows.items()):
        adjusted = metrics.bh_fdr([row.p_value for row in rows])
        for row, p_adj in zip(rows, adjusted):
            row.p_adjusted = p_adj
            out.append(row)
    return out


def _safe_biserial(model, domain, setting, quantity, flags, values) -> CorrelationRow | None:
    if len(flags) < 3:
        return None
    try:
        result = metrics.point_biserial(flags, values)
    except DegenerateInputError:
        return None
    return CorrelationRow(model, domain, setting, quantity,
                          result.coefficient, result.p_value, None, result.n)


def write_summary(summary: Summary, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.csv"
    with summary_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "domain", "setting", "n_records", "n_trials",
                         "accuracy_mean", "accuracy_se", "median_squared_error",
                         "corpus_chrf_mean", "corpus_chrf_se", "fallback_rate"])
        for g in summary.groups:
            writer.writerow([g.model_id, g.domain, g.setting, g.n_records, g.n_trials,
                             _fmt(g.accuracy_mean), _fmt(g.accuracy_se),
                             _fmt(g.median_squared_error),
                             _fmt(g.corpus_chrf_mean), _fmt(g.corpus_chrf_se),
                             _fmt(g.fallback_rate)])

    corr_path = out / "correlations.csv"
    with corr_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "domain", "setting", "quantity",
                         "coefficient", "p_value", "p_adjusted", "n"])
        for c in summary.correlations:
            writer.writerow([c.model_id, c.domain, c.setting, c.quantity,
                             _fmt(c.coefficient), _fmt(c.p_value),
                             _fmt(c.p_adjusted), c.n])

    plot_path = out / "plot_data.csv"
    with plot_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "domain", "setting", "metric", "value", "error"])
        for g in summary.groups:
            if g.accuracy_mean is not None:
                writer.writerow([g.model_id, g.domain, g.setting, "accuracy",
                                 _fmt(g.accuracy_mean), _fmt(g.accuracy_se)])
            if g.corpus_chrf_mean is not None:
                writer.writerow([g.model_id, g.domain, g.setting, "corpus_chrf",
                                 _fmt(g.corpus_chrf_mean), _fmt(g.corpus_chrf_se)])
            if g.median_squared_error is not None:
                writer.writerow([g.model_id, g.domain, g.setting,
                                 "median_squared_error",
                                 _fmt(g.median_squared_error), ""])
    return {"summary": summary_path, "correlations": corr_path, "plot_data": plot_path}


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.10g}"
