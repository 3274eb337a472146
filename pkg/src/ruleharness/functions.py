"""Linear-function task: dataset generation, hypothesis parsing, external
validation, and evaluation.

Coefficients live on the integer grid [-20, 20]; hypothesis arithmetic uses
`Fraction` throughout so validator scores are exact and ties are real ties.
The naming here is always slope/intercept; prompt text uses whatever letter
scheme the template asks for.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import metrics
from .errors import EmptyInputError, NonNumericExampleError
from .types import NEG_INF, Example, Hypothesis, TaskInstance

COEFF_MIN, COEFF_MAX = -20, 20
N_FUNCTIONS = 40
TESTS_PER_FUNCTION = 5
IN_CONTEXT_K = 5


@dataclass(frozen=True)
class LinearFunction:
    slope: int
    intercept: int

    def __post_init__(self):
        for c in (self.slope, self.intercept):
            if not (COEFF_MIN <= c <= COEFF_MAX):
                raise ValueError(f"coefficient {c} outside [{COEFF_MIN}, {COEFF_MAX}]")


@dataclass(frozen=True)
class ParsedLinear:
    slope: Fraction
    intercept: Fraction


@dataclass
class FunctionSuite:
    functions: list[tuple[LinearFunction, list[TaskInstance]]]
    seed: int

    def instances(self) -> list[TaskInstance]:
        return [t for _, tests in self.functions for t in tests]

    def truth_by_id(self) -> dict[str, LinearFunction]:
        return {t.id: f for f, tests in self.functions for t in tests}


def apply_linear(f: ParsedLinear | LinearFunction, x: int | Fraction) -> Fraction:
    return Fraction(f.slope) * Fraction(x) + Fraction(f.intercept)


def render_linear(f: LinearFunction | ParsedLinear) -> str:
    """Human form, signs folded: ``y = 20x - 13``."""
    slope, intercept = f.slope, f.intercept
    sign = "-" if intercept < 0 else "+"
    return f"y = {slope}x {sign} {abs(intercept)}"


def render_linear_power_form(f: LinearFunction | ParsedLinear) -> str:
    """The induction-prompt form: constant term first, then the x term."""
    return f"y = {f.intercept}x^0 + {f.slope}x^1"


def gen_function_suite(seed: int) -> FunctionSuite:
    """40 functions x 5 tests, coefficients and inputs uniform on [-20, 20].

    Query inputs are resampled until they differ from all five in-context
    inputs, so copying an in-context answer can never look like learning.
    """
    rng = random.Random(seed)
    functions: list[tuple[LinearFunction, list[TaskInstance]]] = []
    for fi in range(N_FUNCTIONS):
        f = LinearFunction(rng.randint(COEFF_MIN, COEFF_MAX), rng.randint(COEFF_MIN, COEFF_MAX))
        tests = []
        for ti in range(TESTS_PER_FUNCTION):
            xs = [rng.randint(COEFF_MIN, COEFF_MAX) for _ in range(IN_CONTEXT_K)]
            qx = rng.randint(COEFF_MIN, COEFF_MAX)
            while qx in xs:
                qx = rng.randint(COEFF_MIN, COEFF_MAX)
            in_context = tuple(
                Example(str(x), str(f.slope * x + f.intercept)) for x in xs
            )
            query = Example(str(qx), str(f.slope * qx + f.intercept))
            tests.append(TaskInstance(f"fn{fi:02d}-t{ti}", "functions", in_context, query))
        functions.append((f, tests))
    return FunctionSuite(functions=functions, seed=seed)


_LEAD_RE = re.compile(r"^\s*(?:y|f\s*\(\s*x\s*\))\s*=\s*", re.IGNORECASE)
# a term may carry two signs (`+ -13x^0`): the induction answer format
# concatenates an operator with a signed coefficient
_TERM_RE = re.compile(
    r"\s*(?P<sign>[+-](?:\s*[+-])?)?\s*"
    r"(?P<coef>(?:\d+(?:\.\d+)?|\.\d+)(?:\s*/\s*\d+)?)?"
    r"(?P<var>\s*\*?\s*x(?:\s*\^\s*(?P<exp>[+-]?\d+))?)?",
    re.IGNORECASE,
)


def _parse_expression(text: str) -> ParsedLinear | None:
    m = _LEAD_RE.match(text)
    if not m:
        return None
    pos = m.end()
    slope = Fraction(0)
    intercept = Fraction(0)
    first = True
    saw_term = False
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m or m.end() == pos:
            return None
        sign, coef, var, exp = m.group("sign"), m.group("coef"), m.group("var"), m.group("exp")
        if coef is None and not var:
            return None
        if not first and sign is None:
            return None
        try:
            value = Fraction(coef.replace(" ", "")) if coef is not None else Fraction(1)
        except (ValueError, ZeroDivisionError):
            return None
        if sign is not None and sign.count("-") % 2 == 1:
            value = -value
        if var:
            exponent = int(exp) if exp is not None else 1
        else:
            exponent = 0
        if exponent == 0:
            intercept += value
        elif exponent == 1:
            slope += value
        else:
            return None
        pos = m.end()
        first = False
        saw_term = True
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if not saw_term:
        return None
    return ParsedLinear(slope=slope, intercept=intercept)


def parse_linear_hypothesis(raw: str) -> ParsedLinear | None:
    """Parse a proposed linear rule; None means unparsable.

    Accepts ``y = C0x^0 + C1x^1`` in either term order, plain ``y = Ax + B``
    and ``f(x) = Ax + B`` forms, folded signs, missing terms, and a bare
    ``x``. Symbolic placeholders (``y = ax + b``) and refusals are
    unparsable by design.
    """
    text = raw.strip()
    marker = text.lower().rfind("output:")
    if marker >= 0:
        text = text[marker + len("output:"):]
    candidates = [text] + text.splitlines()
    for candidate in candidates:
        candidate = candidate.strip().strip("`'\"").rstrip(" .")
        if not candidate:
            continue
        parsed = _parse_expression(candidate)
        if parsed is not None:
            return parsed
    return None


def external_validate(h: Hypothesis, in_context) -> Fraction | float:
    """Negative mean squared error of the parsed hypothesis on the examples.

    Exact-fit hypotheses score 0 (the maximum); unparsable ones get -inf so
    any parseable candidate beats them.
    """
    if not in_context:
        raise EmptyInputError("external_validate needs in-context examples")
    parsed = h.parsed if isinstance(h.parsed, ParsedLinear) else parse_linear_hypothesis(h.raw)
    if parsed is None:
        return NEG_INF
    total = Fraction(0)
    for ex in in_context:
        try:
            x = Fraction(ex.source)
            y = Fraction(ex.target)
        except (ValueError, ZeroDivisionError):
            raise NonNumericExampleError(ex.target)
        residual = apply_linear(parsed, x) - y
        total += residual * residual
    return -total / len(in_context)


@dataclass
class FunctionsReport:
    accuracy: float
    median_squared_error: float | None
    slope_corr: metrics.CorrelationResult | None
    intercept_corr: metrics.CorrelationResult | None
    n_records: int
    n_parsed_outputs: int
    n_parsed_hypotheses: int


def _as_fraction(text: str | None) -> Fraction | None:
    if text is None:
        return None
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        return None


def eval_functions(records, truth: FunctionSuite) -> FunctionsReport:
    """Accuracy, median squared error, and coefficient correlations.

    Accuracy is exact match against the true output; squared errors cover
    parseable outputs only; correlations cover records whose chosen
    hypothesis parsed.
    """
    if not records:
        raise EmptyInputError("no records to evaluate")
    truth_map = truth.truth_by_id()
    query_map = {t.id: t.query for _, tests in truth.functions for t in tests}
    hits = 0
    squared_errors: list[float] = []
    true_slopes: list[float] = []
    hyp_slopes: list[float] = []
    true_intercepts: list[float] = []
    hyp_intercepts: list[float] = []
    for record in records:
        f = truth_map[record.instance_id]
        target = Fraction(query_map[record.instance_id].target)
        predicted = _as_fraction(record.parsed_output)
        if predicted is not None:
            squared_errors.append(float((predicted - target) ** 2))
            if predicted == target:
                hits += 1
        if record.chosen_hypothesis is not None:
            parsed = record.chosen_hypothesis.hypothesis.parsed
            if isinstance(parsed, ParsedLinear):
                true_slopes.append(float(f.slope))
                hyp_slopes.append(float(parsed.slope))
                true_intercepts.append(float(f.intercept))
                hyp_intercepts.append(float(parsed.intercept))
            elif isinstance(parsed, (list, tuple)) and len(parsed) == 2:
                true_slopes.append(float(f.slope))
                hyp_slopes.append(float(Fraction(parsed[0])))
                true_intercepts.append(float(f.intercept))
                hyp_intercepts.append(float(Fraction(parsed[1])))
    slope_corr = intercept_corr = None
    if len(true_slopes) >= 3:
        try:
            slope_corr = metrics.spearman(true_slopes, hyp_slopes)
        except Exception:
            slope_corr = None
        try:
            intercept_corr = metrics.spearman(true_intercepts, hyp_intercepts)
        except Exception:
            intercept_corr = None
    return FunctionsReport(
        accuracy=hits / len(records),
        median_squared_error=metrics.median_of(squared_errors) if squared_errors else None,
        slope_corr=slope_corr,
        intercept_corr=intercept_corr,
        n_records=len(records),
        n_parsed_outputs=len(squared_errors),
        n_parsed_hypotheses=len(true_slopes),
    )


def suite_to_jsonl(suite: FunctionSuite, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for f, tests in suite.functions:
            for t in tests:
                row = {
                    "id": t.id,
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "in_context": [[int(e.source), int(e.target)] for e in t.in_context],
                    "query_x": int(t.query.source),
                    "query_y": int(t.query.target),
                }
                fh.write(json.dumps(row) + "\n")


def suite_from_jsonl(path: str | Path, seed: int = -1) -> FunctionSuite:
    grouped: dict[tuple[int, int, str], list[TaskInstance]] = {}
    order: list[tuple[int, int, str]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        prefix = row["id"].split("-")[0]
        key = (row["slope"], row["intercept"], prefix)
        instance = TaskInstance(
            row["id"], "functions",
            tuple(Example(str(x), str(y)) for x, y in row["in_context"]),
            Example(str(row["query_x"]), str(row["query_y"])),
        )
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(instance)
    functions = [(LinearFunction(s, i), grouped[(s, i, p)]) for s, i, p in order]
    return FunctionSuite(functions=functions, seed=seed)
