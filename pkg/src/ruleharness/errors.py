"""Exception hierarchy shared by all harness modules."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for every error raised by this package."""


class MissingSlotError(HarnessError):
    def __init__(self, name: str):
        super().__init__(f"template slot {name!r} has no binding")
        self.name = name


class UnknownSlotError(HarnessError):
    def __init__(self, name: str):
        super().__init__(f"binding {name!r} does not match any slot in the template")
        self.name = name


class TransportError(HarnessError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend HTTP failure: status={status} body={body[:200]!r}")
        self.status = status
        self.body = body


class ReplayMissError(HarnessError):
    def __init__(self, key: str):
        super().__init__(f"no recording for request key {key}")
        self.key = key


class UnsupportedError(HarnessError):
    """The configured backend cannot serve this kind of request."""


class CorruptRecordingError(HarnessError):
    """A recorded logprob result violates its own span invariants."""


class NonNumericExampleError(HarnessError):
    def __init__(self, target: str):
        super().__init__(f"in-context target {target!r} is not numeric")
        self.target = target


class EmptyInputError(HarnessError):
    """An aggregate operation received no data."""


class UnknownTokenError(HarnessError):
    def __init__(self, token: str):
        super().__init__(f"token {token!r} has no rule in the grammar")
        self.token = token


class RepeatWithoutAntecedentError(HarnessError):
    """A repeat token appeared before any colour token."""


class WordAbsentError(HarnessError):
    def __init__(self, word: str):
        super().__init__(f"no example contains the word {word!r}")
        self.word = word


class NoArrowError(HarnessError):
    """A rule hypothesis did not contain the `->` separator."""


class UnknownWordError(HarnessError):
    def __init__(self, word: str):
        super().__init__(f"word {word!r} is not in the gold grammar")
        self.word = word


class FormatError(HarnessError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingComponentError(HarnessError):
    def __init__(self, component: str):
        super().__init__(f"prompt component {component!r} required by this setting is missing")
        self.component = component


class NoAnswerTokensError(HarnessError):
    """No scored token intersects any answer span."""


class EmptyCandidatesError(HarnessError):
    """select_best received an empty candidate list."""


class DegenerateInputError(HarnessError):
    """A correlation input is constant or one-class."""


class OutOfRangeError(HarnessError):
    def __init__(self, value: float):
        super().__init__(f"p-value {value} outside [0, 1]")
        self.value = value


class ConfigError(HarnessError):
    """A run configuration file is invalid."""
