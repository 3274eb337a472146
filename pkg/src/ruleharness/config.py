"""Run configuration: a flat `key = value` file plus per-domain defaults.

Default generation temperatures follow the experiment protocol: chat answers
at T in {0, 1} three times each for the synthetic domains, a single
translation pass at T=0.05, hypothesis sampling at T=1, confidence scoring
at T=0, and grammar-feature induction at T=0.7. Every one of these is a
config key.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .types import Setting

DEFAULT_SCHEDULES = {
    "functions": ((0.0, 3), (1.0, 3)),
    "colours": ((0.0, 3), (1.0, 3)),
    "translation": ((0.05, 1),),
}
DEFAULT_TRIALS = {"functions": 6, "colours": 6, "translation": 1}


@dataclass
class RunConfig:
    domain: str
    setting: Setting
    model_id: str = "test-model"
    scorer_model_id: str = ""
    n_hypotheses: int = 5
    trials: int = 0  # 0 = domain default
    temperature_schedule: tuple[tuple[float, int], ...] = ()
    hypothesis_temperature: float = 1.0
    confidence_temperature: float = 0.0
    grammar_temperature: float = 0.7
    seed: int = 0
    parallelism: int = 1
    limit: int = 0  # 0 = all instances
    max_tokens: int = 0  # 0 = unset
    data_dir: str = ""
    out_dir: str = "run_out"
    direction: str = "ek"
    backend_mode: str = "replay"  # live | replay
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "HARNESS_API_KEY"
    replay_dir: str = ""
    record_dir: str = ""
    refs_per_word: int = 2
    examples_per_word: int = 5
    grammar_batch: int = 5
    grammar_max_iters: int = 10

    def __post_init__(self):
        if self.trials == 0:
            self.trials = DEFAULT_TRIALS[self.domain]
        if not self.temperature_schedule:
            self.temperature_schedule = DEFAULT_SCHEDULES[self.domain]
            if self.trials != sum(r for _, r in self.temperature_schedule):
                # schedule must track an explicit trial count
                self.temperature_schedule = ((self.temperature_schedule[0][0], self.trials),)
        if not self.scorer_model_id:
            self.scorer_model_id = self.model_id
        total = sum(r for _, r in self.temperature_schedule)
        if total != self.trials:
            raise ConfigError(
                f"temperature schedule covers {total} trials but trials={self.trials}")
        if self.n_hypotheses < 1:
            raise ConfigError("n_hypotheses must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.domain == "translation" and self.direction not in ("ek", "ke"):
            raise ConfigError(f"unknown direction {self.direction!r}")

    def temperatures(self) -> list[float]:
        out: list[float] = []
        for temp, reps in self.temperature_schedule:
            out.extend([temp] * reps)
        return out


def parse_schedule(text: str) -> tuple[tuple[float, int], ...]:
    """`0:3,1:3` -> ((0.0, 3), (1.0, 3))."""
    pairs = []
    for part in text.split(","):
        if ":" not in part:
            raise ConfigError(f"bad schedule entry {part!r}, expected temp:reps")
        temp, reps = part.split(":", 1)
        try:
            pairs.append((float(temp), int(reps)))
        except ValueError as exc:
            raise ConfigError(f"bad schedule entry {part!r}: {exc}") from exc
    return tuple(pairs)


_INT_KEYS = {"n_hypotheses", "trials", "seed", "parallelism", "limit", "max_tokens",
             "refs_per_word", "examples_per_word", "grammar_batch", "grammar_max_iters"}
_FLOAT_KEYS = {"hypothesis_temperature", "confidence_temperature", "grammar_temperature"}


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse a `key = value` file; '#' starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    if overrides:
        values.update(overrides)
    return config_from_values(values)


def config_from_values(values: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    kwargs: dict = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "setting":
            kwargs[key] = Setting.parse(value) if isinstance(value, str) else value
        elif key == "temperature_schedule":
            kwargs[key] = parse_schedule(value) if isinstance(value, str) else value
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    if "domain" not in kwargs or "setting" not in kwargs:
        raise ConfigError("config must set at least domain and setting")
    try:
        return RunConfig(**kwargs)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
