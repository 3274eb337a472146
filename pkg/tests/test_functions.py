from __future__ import annotations

import random
from fractions import Fraction

import pytest

from ruleharness import functions
from ruleharness.errors import EmptyInputError, NonNumericExampleError
from ruleharness.types import NEG_INF, Example, Hypothesis, ResultRecord, Setting


def hyp(raw: str) -> Hypothesis:
    return Hypothesis(raw=raw, parsed=functions.parse_linear_hypothesis(raw))


# --- generation ---------------------------------------------------------------

def test_suite_counts_and_ranges():
    suite = functions.gen_function_suite(0)
    assert len(suite.functions) == 40
    instances = suite.instances()
    assert len(instances) == 200
    for f, tests in suite.functions:
        assert -20 <= f.slope <= 20 and -20 <= f.intercept <= 20
        assert len(tests) == 5
        for t in tests:
            assert len(t.in_context) == 5
            for ex in t.in_context:
                x, y = int(ex.source), int(ex.target)
                assert -20 <= x <= 20
                assert y == f.slope * x + f.intercept
            assert int(t.query.target) == f.slope * int(t.query.source) + f.intercept


def test_suite_deterministic_per_seed():
    assert functions.gen_function_suite(7) == functions.gen_function_suite(7)
    assert functions.gen_function_suite(7) != functions.gen_function_suite(8)


def test_query_never_collides_with_in_context():
    suite = functions.gen_function_suite(3)
    for t in suite.instances():
        assert t.query.source not in {ex.source for ex in t.in_context}


def test_known_function_example_pair():
    f = functions.LinearFunction(slope=20, intercept=-13)
    assert functions.apply_linear(f, 15) == 287
    assert functions.apply_linear(f, -10) == -213


def test_coefficient_marginals_near_uniform():
    # >= 10^4 coefficient draws across seeds; each grid value ~ 1/41
    counts: dict[int, int] = {}
    total = 0
    for seed in range(125):  # 125 suites x 80 coefficients = 10000 draws
        for f, _ in functions.gen_function_suite(seed).functions:
            for c in (f.slope, f.intercept):
                counts[c] = counts.get(c, 0) + 1
                total += 1
    assert total >= 10_000
    for value in range(-20, 21):
        freq = counts.get(value, 0) / total
        assert abs(freq - 1 / 41) < 0.015


def test_apply_linear_edge_cases():
    assert functions.apply_linear(functions.LinearFunction(0, 0), 123) == 0
    assert functions.apply_linear(functions.LinearFunction(1, 0), 7) == 7
    parsed = functions.ParsedLinear(Fraction(1, 2), Fraction(1, 3))
    assert functions.apply_linear(parsed, 6) == Fraction(10, 3)


# --- hypothesis parsing ---------------------------------------------------------

@pytest.mark.parametrize("raw,slope,intercept", [
    ("f(x) = 20x - 13", 20, -13),
    ("y = 20x - 13", 20, -13),
    ("Output: y = -13x^0 + 20x^1", 20, -13),
    ("y = -13x^0 + 20x^1", 20, -13),
    ("y = 20x^1 + -13x^0", 20, -13),
    ("y = 20x^1 - 13x^0", 20, -13),
    ("y = x", 1, 0),
    ("y = -x + 4", -1, 4),
    ("y = 7", 0, 7),
    ("y = 5x", 5, 0),
    ("Y = 2X + 3", 2, 3),
    ("f(x)=3x+2", 3, 2),
    ("y = 2*x + 1", 2, 1),
    ("The rule is clear.\nOutput: y = 4x^0 + 9x^1", 9, 4),
    ("y = 2.5x + 0.5", Fraction(5, 2), Fraction(1, 2)),
])
def test_parse_accepts(raw, slope, intercept):
    parsed = functions.parse_linear_hypothesis(raw)
    assert parsed is not None
    assert parsed.slope == Fraction(slope)
    assert parsed.intercept == Fraction(intercept)


@pytest.mark.parametrize("raw", [
    "I don't know",
    "y = ax^0 + bx^1",
    "y = ax + b",
    "the function is linear",
    "y = 2x^2 + 1",
    "",
    "y =",
    "x + 3",
])
def test_parse_rejects(raw):
    assert functions.parse_linear_hypothesis(raw) is None


def test_parse_round_trips_through_renderer():
    rng = random.Random(1)
    for _ in range(100):
        f = functions.LinearFunction(rng.randint(-20, 20), rng.randint(-20, 20))
        for render in (functions.render_linear, functions.render_linear_power_form):
            parsed = functions.parse_linear_hypothesis(render(f))
            assert parsed == functions.ParsedLinear(Fraction(f.slope), Fraction(f.intercept))


# --- external validation ----------------------------------------------------------

TABLE_PAIRS = [Example("-10", "-213"), Example("9", "167"), Example("4", "67")]


def test_exact_fit_scores_zero():
    assert functions.external_validate(hyp("f(x) = 20x - 13"), TABLE_PAIRS) == 0


def test_residual_one_scores_minus_one():
    examples = [Example("1", "2"), Example("2", "3")]
    assert functions.external_validate(hyp("y = x"), examples) == -1


def test_unparsable_scores_neg_inf():
    assert functions.external_validate(hyp("I don't know"), TABLE_PAIRS) == NEG_INF


def test_validator_is_exact_rational():
    examples = [Example("1", "1"), Example("2", "2"), Example("4", "4")]
    score = functions.external_validate(hyp("y = x + 1/3"), examples)
    assert score == Fraction(-1, 9)


def test_zero_score_iff_exact_fit():
    rng = random.Random(4)
    for _ in range(200):
        f = functions.LinearFunction(rng.randint(-20, 20), rng.randint(-20, 20))
        examples = [Example(str(x), str(f.slope * x + f.intercept))
                    for x in rng.sample(range(-20, 21), 5)]
        assert functions.external_validate(hyp(functions.render_linear(f)), examples) == 0
        ds, di = rng.choice([(1, 0), (0, 1), (2, -1)])
        wrong = functions.ParsedLinear(Fraction(f.slope + ds), Fraction(f.intercept + di))
        wrong_hyp = Hypothesis(raw="w", parsed=wrong)
        assert functions.external_validate(wrong_hyp, examples) < 0


def test_non_numeric_example_raises():
    with pytest.raises(NonNumericExampleError):
        functions.external_validate(hyp("y = x"), [Example("1", "blue")])
    with pytest.raises(EmptyInputError):
        functions.external_validate(hyp("y = x"), [])


# --- evaluation ----------------------------------------------------------------

def _record(instance_id: str, parsed_output: str | None, suite) -> ResultRecord:
    query = {t.id: t.query for t in suite.instances()}[instance_id]
    return ResultRecord(
        instance_id=instance_id, domain="functions", model_id="m",
        setting=Setting("few_shot"), trial_index=0, temperature=0.0,
        raw_output="", parsed_output=parsed_output, marked=True, correct=None,
        query_source=query.source, reference=query.target)


def test_eval_all_exact():
    suite = functions.gen_function_suite(0)
    records = [_record(t.id, t.query.target, suite) for t in suite.instances()[:20]]
    report = functions.eval_functions(records, suite)
    assert report.accuracy == 1.0
    assert report.median_squared_error == 0


def test_eval_empty_raises():
    with pytest.raises(EmptyInputError):
        functions.eval_functions([], functions.gen_function_suite(0))


def test_eval_mixed_batch_matches_rank_oracle():
    from ruleharness.oracles import spearman_reference
    from ruleharness.types import ScoredHypothesis

    suite = functions.gen_function_suite(2)
    rng = random.Random(6)
    records = []
    true_slopes, hyp_slopes, true_ints, hyp_ints = [], [], [], []
    truth = suite.truth_by_id()
    for t in suite.instances()[:60]:
        f = truth[t.id]
        noise = rng.choice([0, 0, 1, -2])
        answer = str(int(t.query.target) + rng.choice([0, 0, 0, 3]))
        record = _record(t.id, answer, suite)
        h_slope, h_int = f.slope + noise, f.intercept - noise
        record.chosen_hypothesis = ScoredHypothesis(
            hypothesis=Hypothesis(raw="h", parsed=[str(h_slope), str(h_int)]),
            method="external_validator", score=0.0)
        records.append(record)
        true_slopes.append(float(f.slope))
        hyp_slopes.append(float(h_slope))
        true_ints.append(float(f.intercept))
        hyp_ints.append(float(h_int))
    report = functions.eval_functions(records, suite)
    rho_s, p_s = spearman_reference(true_slopes, hyp_slopes)
    rho_i, p_i = spearman_reference(true_ints, hyp_ints)
    assert report.slope_corr.coefficient == pytest.approx(rho_s, abs=1e-9)
    assert report.slope_corr.p_value == pytest.approx(p_s, abs=1e-9)
    assert report.intercept_corr.coefficient == pytest.approx(rho_i, abs=1e-9)
    assert report.intercept_corr.p_value == pytest.approx(p_i, abs=1e-9)


def test_eval_identical_coefficients_rho_one():
    from ruleharness.types import ScoredHypothesis

    suite = functions.gen_function_suite(5)
    truth = suite.truth_by_id()
    records = []
    for t in suite.instances()[:30]:
        f = truth[t.id]
        record = _record(t.id, t.query.target, suite)
        record.chosen_hypothesis = ScoredHypothesis(
            hypothesis=Hypothesis(raw="h", parsed=[str(f.slope), str(f.intercept)]),
            method="external_validator", score=0.0)
        records.append(record)
    report = functions.eval_functions(records, suite)
    assert report.slope_corr.coefficient == pytest.approx(1.0)
    assert report.intercept_corr.coefficient == pytest.approx(1.0)


# --- serialization ---------------------------------------------------------------

def test_suite_jsonl_round_trip(tmp_path):
    suite = functions.gen_function_suite(9)
    path = tmp_path / "functions.jsonl"
    functions.suite_to_jsonl(suite, path)
    loaded = functions.suite_from_jsonl(path, seed=9)
    assert loaded == suite
