"""Batch harness for few-shot, instruction-following, and multi-hypothesis
instruction-inference experiments with reranking."""

__version__ = "0.1.0"

from .types import (  # noqa: F401
    Example,
    Hypothesis,
    ResultRecord,
    ScoredHypothesis,
    Setting,
    TaskInstance,
)
