"""The six-token colours language: interpreter, generator, and hypothesis
handling.

Repeat tokens mean TOTAL emissions, pinned by the canonical data: "lug bluf"
-> "blue blue" and "wif walm" -> "red red red". Sentence length is counted
in colour words; repeat tokens ride on top.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from importlib import resources

from .errors import (
    NoArrowError,
    RepeatWithoutAntecedentError,
    UnknownTokenError,
    UnknownWordError,
    WordAbsentError,
)
from .types import NEG_INF, Example

LENGTH_WEIGHTS = (0.4, 0.3, 0.15, 0.1, 0.05)  # colour-word counts 1..5
REPEAT_WEIGHTS = (0.8, 0.1, 0.1)  # 0, 1, or 2 repeat insertions

TRAIN_SIZE = 800
TEST_SIZE = 200


@dataclass(frozen=True)
class ColourRule:
    kind: str  # "colour" | "repeat"
    colour: str | None = None
    count: int | None = None

    @classmethod
    def for_colour(cls, name: str) -> "ColourRule":
        return cls(kind="colour", colour=name)

    @classmethod
    def for_repeat(cls, count: int) -> "ColourRule":
        if count not in (2, 3):
            raise ValueError("repeat count must be 2 or 3")
        return cls(kind="repeat", count=count)

    def render(self) -> str:
        if self.kind == "colour":
            return self.colour or ""
        word = "twice" if self.count == 2 else "three times"
        return f"repeat the last action {word}"


@dataclass(frozen=True)
class ColourGrammar:
    rules: dict[str, ColourRule]

    def colour_tokens(self) -> list[str]:
        return [t for t, r in self.rules.items() if r.kind == "colour"]

    def repeat_tokens(self) -> list[str]:
        return [t for t, r in self.rules.items() if r.kind == "repeat"]


_REPEAT_TEXT_RE = re.compile(r"repeat the last action (twice|three times)")


def load_grammar(text: str) -> ColourGrammar:
    rules: dict[str, ColourRule] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        word, meaning = parse_colour_rule(line)
        if isinstance(meaning, ColourRule):
            rules[word] = meaning
        else:
            m = _REPEAT_TEXT_RE.search(meaning.lower())
            if not m:
                raise ValueError(f"cannot interpret grammar meaning {meaning!r}")
            rules[word] = ColourRule.for_repeat(2 if m.group(1) == "twice" else 3)
    return ColourGrammar(rules=rules)


def gold_grammar() -> ColourGrammar:
    text = resources.files("ruleharness").joinpath("data", "colours", "grammar.txt") \
        .read_text(encoding="utf-8")
    return ColourGrammar(rules=load_grammar(text).rules)


def interpret_colours(tokens: list[str] | str, grammar: ColourGrammar) -> str:
    """Evaluate left to right: colours emit once, a repeat token rewrites the
    preceding colour's emission to its total count."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    emissions: list[list] = []  # [colour, count]
    for token in tokens:
        rule = grammar.rules.get(token)
        if rule is None:
            raise UnknownTokenError(token)
        if rule.kind == "colour":
            emissions.append([rule.colour, 1])
        else:
            if not emissions:
                raise RepeatWithoutAntecedentError(token)
            emissions[-1][1] = rule.count
    return " ".join(" ".join([colour] * count) for colour, count in emissions)


def is_valid_sentence(tokens: list[str], grammar: ColourGrammar) -> bool:
    """Adjacency constraints: no leading repeat, no repeat after repeat, and
    no colour word equal to the nearest preceding colour word."""
    last_colour = None
    previous_was_repeat = False
    for i, token in enumerate(tokens):
        rule = grammar.rules.get(token)
        if rule is None:
            return False
        if rule.kind == "repeat":
            if i == 0 or previous_was_repeat:
                return False
            previous_was_repeat = True
        else:
            if token == last_colour:
                return False
            last_colour = token
            previous_was_repeat = False
    return True


def draw_length(rng: random.Random) -> int:
    return rng.choices(range(1, 6), weights=LENGTH_WEIGHTS)[0]


def draw_repeat_class(rng: random.Random) -> int:
    return rng.choices(range(3), weights=REPEAT_WEIGHTS)[0]


def sample_sentence(rng: random.Random, grammar: ColourGrammar | None = None) -> list[str]:
    """One source sentence: colour words first, then repeat insertions.

    The repeat draw is capped at the colour-word count (two repeats cannot
    attach to one colour without breaking adjacency constraints).
    """
    grammar = grammar or gold_grammar()
    colour_tokens = grammar.colour_tokens()
    repeat_tokens = grammar.repeat_tokens()
    length = draw_length(rng)
    words: list[str] = []
    for _ in range(length):
        options = [c for c in colour_tokens if c != (words[-1] if words else None)]
        words.append(rng.choice(options))
    n_repeats = min(draw_repeat_class(rng), length)
    positions = sorted(rng.sample(range(length), n_repeats))
    sentence: list[str] = []
    for i, word in enumerate(words):
        sentence.append(word)
        if i in positions:
            sentence.append(rng.choice(repeat_tokens))
    return sentence


def gen_colours_dataset(seed: int, train_size: int = TRAIN_SIZE, test_size: int = TEST_SIZE,
                        dedup: bool = False) -> tuple[list[Example], list[Example]]:
    """Train/test splits sampled independently; targets come from the
    interpreter, so generator/interpreter agreement holds by construction.

    Exact-duplicate sources across splits are allowed unless ``dedup`` is
    set; the token space is tiny.
    """
    grammar = gold_grammar()
    rng = random.Random(seed)

    def draw(count: int, seen: set[str]) -> list[Example]:
        out = []
        while len(out) < count:
            tokens = sample_sentence(rng, grammar)
            source = " ".join(tokens)
            if dedup and source in seen:
                continue
            seen.add(source)
            out.append(Example(source, interpret_colours(tokens, grammar)))
        return out

    seen: set[str] = set()
    train = draw(train_size, seen)
    test = draw(test_size, seen if dedup else set())
    return train, test


def fixed_fewshot() -> list[Example]:
    """The canonical five in-context pairs; every nonce token appears."""
    return [
        Example("lug dax", "blue green"),
        Example("wif zup", "red yellow"),
        Example("lug bluf", "blue blue"),
        Example("wif walm", "red red red"),
        Example("lug walm dax bluf", "blue blue blue green green"),
    ]


def retrieve_word_examples(word: str, pool: list[Example], k: int = 5,
                           seed: int = 0) -> list[Example]:
    """Uniform sample (without replacement) of pool rows containing the word."""
    matching = [ex for ex in pool if word in ex.source.split()]
    if not matching:
        raise WordAbsentError(word)
    rng = random.Random(seed)
    if len(matching) <= k:
        return matching
    return rng.sample(matching, k)


def parse_colour_rule(raw: str) -> tuple[str, ColourRule | str]:
    """Split a `word -> meaning` line; bare one-word meanings become colour
    rules, anything else stays free text for lenient evaluation."""
    if "->" not in raw:
        raise NoArrowError(raw)
    left, right = raw.split("->", 1)
    left = left.strip().strip("`'\"")
    if not left:
        raise NoArrowError(raw)
    word = left.split()[-1].strip("`'\":")
    meaning = right.strip().strip("`'\"").rstrip(".").strip()
    if meaning and len(meaning.split()) == 1 and meaning.isalpha():
        return word, ColourRule.for_colour(meaning.lower())
    return word, meaning


def _meaning_text(meaning: ColourRule | str) -> str:
    return meaning.render() if isinstance(meaning, ColourRule) else meaning


def eval_colour_hypothesis(word: str, meaning: ColourRule | str, gold: ColourGrammar) -> bool:
    """Exact match for colour words; lenient rule for repeat words (text
    mentions "repeat" or the matching numeral)."""
    rule = gold.rules.get(word)
    if rule is None:
        raise UnknownWordError(word)
    if rule.kind == "colour":
        return (isinstance(meaning, ColourRule) and meaning.kind == "colour"
                and (meaning.colour or "").lower() == (rule.colour or "").lower())
    text = _meaning_text(meaning).lower()
    return "repeat" in text or str(rule.count) in text


def assemble_colour_grammar_text(rules: list[tuple[str, ColourRule | str]]) -> str:
    """Render `word -> meaning` lines for the self-induced-grammar prompt."""
    if not rules:
        raise ValueError("cannot assemble an empty grammar")
    return "\n".join(f"{word} -> {_meaning_text(meaning)}" for word, meaning in rules)


_REPEAT_HINTS = (("three times", 3), ("thrice", 3), ("twice", 2),
                 ("two times", 2), ("3", 3), ("2", 2))


def repeat_count_from_text(text: str) -> int | None:
    lowered = text.lower()
    for hint, count in _REPEAT_HINTS:
        if hint in lowered:
            return count
    return None


def _max_run(target_tokens: list[str]) -> int:
    best = run = 0
    previous = None
    for token in target_tokens:
        run = run + 1 if token == previous else 1
        previous = token
        best = max(best, run)
    return best


def validate_colour_hypothesis(word: str, meaning: ColourRule | str,
                               examples: list[Example]) -> float:
    """Consistency of a per-word hypothesis with retrieved examples.

    Colour meanings check that the colour appears in each target; repeat
    meanings check the necessary condition that some colour runs at least
    `count` times. Score is the negative failure fraction; meanings with no
    executable reading get -inf.
    """
    if not examples:
        return NEG_INF
    if isinstance(meaning, ColourRule) and meaning.kind == "colour":
        failures = sum(1 for ex in examples if meaning.colour not in ex.target.split())
        return -failures / len(examples)
    count = (meaning.count if isinstance(meaning, ColourRule)
             else repeat_count_from_text(meaning))
    if count is None:
        return NEG_INF
    failures = sum(1 for ex in examples if _max_run(ex.target.split()) < count)
    return -failures / len(examples)
