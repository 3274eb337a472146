from __future__ import annotations

from fractions import Fraction

import pytest

from ruleharness.types import (
    NEG_INF,
    Example,
    Hypothesis,
    ScoredHypothesis,
    Setting,
    TaskInstance,
    score_from_str,
    score_to_str,
    scored_from_dict,
    scored_to_dict,
)


def test_example_requires_source():
    with pytest.raises(ValueError):
        Example("", "target")
    assert Example("src", "").target == ""  # raw corpus rows may lack targets


def test_task_instance_invariants():
    ex = Example("1", "2")
    with pytest.raises(ValueError):
        TaskInstance("i", "functions", (), ex)
    with pytest.raises(ValueError):
        TaskInstance("i", "geometry", (ex,), ex)
    instance = TaskInstance("i", "functions", [ex], ex)
    assert isinstance(instance.in_context, tuple)


def test_setting_rerank_pairing():
    assert Setting("few_shot").key() == "few_shot"
    full = Setting("instruction_inference", "p_answer")
    assert full.key() == "instruction_inference:p_answer"
    assert Setting.parse(full.key()) == full
    with pytest.raises(ValueError):
        Setting("few_shot", "p_data")
    with pytest.raises(ValueError):
        Setting("instruction_inference")
    with pytest.raises(ValueError):
        Setting("instruction_inference", "magic")


def test_hypothesis_requires_raw():
    with pytest.raises(ValueError):
        Hypothesis(raw="")


@pytest.mark.parametrize("score", [
    NEG_INF,
    Fraction(-1, 3),
    Fraction(0),
    Fraction(287),
    0.0,
    1.0,
    -0.017,
    -1234.5,
])
def test_score_serialization_round_trip(score):
    restored = score_from_str(score_to_str(score))
    assert restored == score
    assert isinstance(restored, Fraction) == isinstance(score, Fraction) or score == NEG_INF


def test_scored_hypothesis_round_trip():
    scored = ScoredHypothesis(
        hypothesis=Hypothesis(raw="y = 2x + 1", word=None, parsed=["2", "1"]),
        method="external_validator", score=Fraction(-5, 4))
    assert scored_from_dict(scored_to_dict(scored)) == scored
    assert not scored.unparsable()
    dead = ScoredHypothesis(Hypothesis(raw="?"), "verbal_conf", NEG_INF)
    assert dead.unparsable()
    assert scored_from_dict(scored_to_dict(dead)) == dead
