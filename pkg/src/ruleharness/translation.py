"""Low-resource translation plumbing: corpus/wordlist/sketch loading,
similarity retrieval, vocabulary and grammar-feature induction, and the
correctness rules for both.

The package ships a small synthetic fixture language so every test runs
without the real low-resource data; the real corpus drops into the same
file layout. Reverse-direction training data is produced by swapping source
and target of the forward training file.
"""

from __future__ import annotations

import json
import random
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .backends import Backend, GenerationRequest
from .dataio import read_pairs, write_pairs
from .errors import FormatError, MissingComponentError, WordAbsentError
from .templates import TemplateSet, format_examples_with_spans
from .types import NEG_INF, Example, Hypothesis, ScoredHypothesis

SKETCH_START = "=== Start of grammar sketch ==="
SKETCH_END = "=== End of grammar sketch ==="
UNSURE = "Unsure"
MIN_FIXTURE_ROWS = 10


@dataclass(frozen=True)
class TranslationMeta:
    language: str
    other_lang: str
    intro: str


@dataclass
class ParallelCorpus:
    direction: str  # "ek" (other -> low-resource) or "ke"
    rows: list[Example]
    test_rows: list[Example]

    def __post_init__(self):
        if self.direction not in ("ek", "ke"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if len(self.rows) < MIN_FIXTURE_ROWS:
            raise ValueError(f"corpus needs at least {MIN_FIXTURE_ROWS} training rows")


@dataclass
class Wordlist:
    """source-word -> translations; affix markers `*` and `-` are verbatim."""

    entries: dict[str, list[str]]

    def __post_init__(self):
        for word, translations in self.entries.items():
            if not translations:
                raise ValueError(f"wordlist entry {word!r} has no translations")

    def reversed(self) -> "Wordlist":
        """Swap sides for the other direction.

        Marker characters describe the low-resource form, so they are
        stripped from the new key side (the corpus never carries them) and
        dropped from the plain-text translations.
        """
        flipped: dict[str, list[str]] = {}
        for word, translations in self.entries.items():
            for t in translations:
                key = strip_markers(t)
                flipped.setdefault(key, [])
                if word not in flipped[key]:
                    flipped[key].append(word)
        return Wordlist(entries=flipped)


@dataclass(frozen=True)
class GrammarFeature:
    id: str
    label: str
    question: str
    domain: tuple[str, ...]
    gold: str

    def __post_init__(self):
        if self.gold not in self.domain:
            raise ValueError(f"gold answer {self.gold!r} not in domain for {self.id}")


@dataclass
class TranslationData:
    corpus: ParallelCorpus
    wordlist: Wordlist
    features: list[GrammarFeature]
    sketch_text: str
    meta: TranslationMeta


def has_marker(translation: str) -> bool:
    return "*" in translation or "-" in translation


def strip_markers(translation: str) -> str:
    return translation.replace("*", "").replace("-", "")


def tokenize_words(sentence: str) -> list[str]:
    """Unique lowercase word tokens in first-appearance order."""
    seen: list[str] = []
    for w in re.findall(r"[A-Za-z']+", sentence.lower()):
        if w not in seen:
            seen.append(w)
    return seen


def load_wordlist(path: str | Path) -> Wordlist:
    entries: dict[str, list[str]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise FormatError(lineno, f"expected 'word,translation', got {line!r}")
        word, translation = parts[0].strip(), parts[1].strip()
        entries.setdefault(word, [])
        if translation not in entries[word]:
            entries[word].append(translation)
    return Wordlist(entries=entries)


def load_features(path: str | Path) -> list[GrammarFeature]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        GrammarFeature(id=r["id"], label=r["label"], question=r["question"],
                       domain=tuple(r["answers"]), gold=r["gold"])
        for r in rows
    ]


def parse_sketch_text(text: str) -> list[tuple[str, str]]:
    """(label, answer) pairs from the delimited line format."""
    inside = False
    pairs: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped == SKETCH_START:
            inside = True
            continue
        if stripped == SKETCH_END:
            inside = False
            continue
        if not inside or not stripped:
            continue
        if ":" not in stripped:
            raise FormatError(lineno, f"sketch line has no 'Label: answer' form: {stripped!r}")
        label, answer = stripped.split(":", 1)
        pairs.append((label.strip(), answer.strip()))
    return pairs


def render_sketch_text(pairs: list[tuple[str, str]]) -> str:
    lines = [SKETCH_START]
    lines += [f"{label}: {answer}" for label, answer in pairs]
    lines.append(SKETCH_END)
    return "\n".join(lines)


def _reverse(rows: list[Example]) -> list[Example]:
    return [Example(r.target, r.source) for r in rows]


def load_corpus(data_dir: str | Path, direction: str = "ek") -> TranslationData:
    """Load corpus, wordlist, gold grammar features, and prompt metadata.

    File layout: train.ek.jsonl, test.ek.jsonl, test.ke.jsonl, wordlist.csv,
    sketch.txt, features.json, meta.json. The ke training set is the ek one
    reversed.
    """
    base = Path(data_dir)
    train_ek = read_pairs(base / "train.ek.jsonl")
    if direction == "ek":
        rows = train_ek
        test_rows = read_pairs(base / "test.ek.jsonl")
        wordlist = load_wordlist(base / "wordlist.csv")
    else:
        rows = _reverse(train_ek)
        ke_path = base / "test.ke.jsonl"
        test_rows = read_pairs(ke_path) if ke_path.exists() \
            else _reverse(read_pairs(base / "test.ek.jsonl"))
        wordlist = load_wordlist(base / "wordlist.csv").reversed()
    features = load_features(base / "features.json")
    sketch_text = (base / "sketch.txt").read_text(encoding="utf-8").strip()
    meta_path = base / "meta.json"
    if meta_path.exists():
        m = json.loads(meta_path.read_text(encoding="utf-8"))
        meta = TranslationMeta(m["language"], m["other_lang"], m["intro"])
    else:
        meta = TranslationMeta("Kalamang", "English",
                               "Kalamang is a language spoken on the Karas Islands "
                               "in West Papua.")
    corpus = ParallelCorpus(direction=direction, rows=rows, test_rows=test_rows)
    return TranslationData(corpus=corpus, wordlist=wordlist, features=features,
                           sketch_text=sketch_text, meta=meta)


def fixture_data_dir() -> Path:
    return Path(str(resources.files("ruleharness").joinpath("data", "fixture_translation")))


def lcs_length(a: str, b: str) -> int:
    """Longest common subsequence length over raw characters."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for ca in a:
        current = [0]
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def common_substring_length(a: str, b: str) -> int:
    """Longest common contiguous substring length."""
    if not a or not b:
        return 0
    best = 0
    previous = [0] * (len(b) + 1)
    for ca in a:
        current = [0]
        for j, cb in enumerate(b, start=1):
            run = previous[j - 1] + 1 if ca == cb else 0
            current.append(run)
            best = max(best, run)
        previous = current
    return best


def retrieve_refs(word: str, corpus: ParallelCorpus, n: int = 2) -> list[Example]:
    """Top-n corpus rows by character-level LCS with the word (case-folded);
    ties go to the earlier corpus row."""
    lowered = word.lower()
    scored = [(lcs_length(lowered, row.source.lower()), i) for i, row in enumerate(corpus.rows)]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [corpus.rows[i] for _, i in scored[:n]]


def retrieve_wordlist_entry(word: str, wl: Wordlist) -> tuple[str, list[str]]:
    """Wordlist entry maximizing longest common substring with the word;
    ties go to the lexicographically smallest entry word."""
    lowered = word.lower()
    best_word = None
    best_len = -1
    for entry in wl.entries:
        score = common_substring_length(lowered, entry.lower())
        if score > best_len or (score == best_len and entry < (best_word or "")):
            best_word, best_len = entry, score
    assert best_word is not None, "wordlist must be non-empty"
    return best_word, wl.entries[best_word]


class VocabHypothesisCache:
    """First parseable winner per (direction, word); checked before any
    backend call, populated under a per-key lock."""

    def __init__(self):
        self._entries: dict[tuple[str, str], ScoredHypothesis] = {}
        self._guard = threading.Lock()
        self._key_locks: dict[tuple[str, str], threading.Lock] = {}

    def lock_for(self, direction: str, word: str) -> threading.Lock:
        key = (direction, word)
        with self._guard:
            if key not in self._key_locks:
                self._key_locks[key] = threading.Lock()
            return self._key_locks[key]

    def get(self, direction: str, word: str) -> ScoredHypothesis | None:
        with self._guard:
            return self._entries.get((direction, word))

    def put(self, direction: str, word: str, winner: ScoredHypothesis) -> None:
        if winner.hypothesis.parsed is None:
            raise ValueError("only parseable hypotheses may be cached")
        with self._guard:
            self._entries.setdefault((direction, word), winner)

    def size(self) -> int:
        with self._guard:
            return len(self._entries)


def parse_vocab_hypothesis(raw: str, word: str) -> str | None:
    """Extract the proposed translation from a `word -> translation` reply."""
    for line in raw.splitlines():
        if "->" not in line:
            continue
        _, right = line.split("->", 1)
        translation = right.strip("`'\". \t")
        if translation:
            return translation
    return None


def examples_containing(word: str, corpus: ParallelCorpus, k: int = 5,
                        seed: int = 0) -> list[Example]:
    matching = [row for row in corpus.rows if word in tokenize_words(row.source)]
    if not matching:
        raise WordAbsentError(word)
    if len(matching) <= k:
        return matching
    return random.Random(seed).sample(matching, k)


def validate_vocab_hypothesis(translation: str | None, examples: list[Example]) -> float:
    """External check: the proposed translation should surface in the target
    of sentences containing the word. Score is the negative miss fraction."""
    if translation is None or not examples:
        return NEG_INF
    stem = strip_markers(translation).lower()
    if not stem:
        return NEG_INF
    misses = sum(1 for ex in examples if stem not in ex.target.lower())
    return -misses / len(examples)


def induce_vocab(word: str, corpus: ParallelCorpus, cache: VocabHypothesisCache,
                 backend: Backend, templates: TemplateSet, meta: TranslationMeta,
                 rerank_method: str, model_id: str, scorer_model_id: str = "",
                 n_hyp: int = 5, seed: int = 0, temperature: float = 1.0,
                 k_examples: int = 5, tag: str = "",
                 confidence_temperature: float = 0.0) -> tuple[ScoredHypothesis, list[ScoredHypothesis]]:
    """Propose and rerank translations for one word, with caching.

    Returns (winner, candidates). A cache hit returns the stored winner and
    issues no backend call. When nothing parses, the winner is a null marker
    scored -inf (evaluated incorrect) and is not cached.
    """
    from . import rerank

    cached = cache.get(corpus.direction, word)
    if cached is not None:
        return cached, []
    with cache.lock_for(corpus.direction, word):
        cached = cache.get(corpus.direction, word)
        if cached is not None:
            return cached, []
        try:
            examples = examples_containing(word, corpus, k=k_examples, seed=seed)
        except WordAbsentError:
            examples = retrieve_refs(word, corpus, n=k_examples)
        src_lang, tgt_lang = direction_names(corpus.direction, meta)
        rendered, spans = format_examples_with_spans(
            examples, f"{src_lang} sentence:", f"{tgt_lang} translation:")
        prompt = templates.render(
            "induction", word=word, src_lang=src_lang, tgt_lang=tgt_lang, examples=rendered)
        system = templates.render("system_hypothesis")
        candidates: list[Hypothesis] = []
        for i in range(n_hyp):
            reply = backend.chat_generate(GenerationRequest(
                system=system, user=prompt, temperature=temperature,
                model_id=model_id, tag=f"{tag}:vocab:{word}:{i}"))
            candidates.append(Hypothesis(raw=reply or "(empty reply)", word=word,
                                         parsed=parse_vocab_hypothesis(reply, word)))
        ctx = rerank.RerankContext(
            rendered_examples=rendered, answer_spans=spans, templates=templates,
            word=word, model_id=model_id, scorer_model_id=scorer_model_id or model_id,
            tag=f"{tag}:vocab:{word}", confidence_temperature=confidence_temperature)
        scored = rerank.score_candidates(
            candidates, ctx, rerank_method, backend,
            external_fn=lambda h: validate_vocab_hypothesis(h.parsed, examples))
        winner, fallback = rerank.select_best(scored)
        if fallback or winner is None or winner.hypothesis.parsed is None:
            null = ScoredHypothesis(
                hypothesis=Hypothesis(raw=candidates[0].raw if candidates else "(no candidates)",
                                      word=word, parsed=None),
                method=rerank_method, score=NEG_INF)
            return null, scored
        cache.put(corpus.direction, word, winner)
        return winner, scored


def _normalize_answer(text: str) -> str:
    return text.strip().strip("`'\".").strip()


def match_feature_answer(reply: str, feature: GrammarFeature) -> str:
    """Canonicalize a model reply against the feature's answer domain.

    Only the first non-empty line after the last "Answer:" marker counts;
    anything that is not an exact (case-insensitive) domain answer is
    Unsure, including explicit unsureness.
    """
    text = reply
    marker = text.rfind("Answer:")
    if marker >= 0:
        text = text[marker + len("Answer:"):]
    for line in text.splitlines():
        line = _normalize_answer(line)
        if not line:
            continue
        for answer in feature.domain:
            if line.lower() == answer.lower():
                return answer
        return UNSURE
    return UNSURE


def induce_grammar_feature(feature: GrammarFeature, corpus: ParallelCorpus,
                           backend: Backend, templates: TemplateSet,
                           meta: TranslationMeta, model_id: str,
                           batch: int = 5, max_iters: int = 10, seed: int = 0,
                           temperature: float = 0.7, tag: str = "") -> str:
    """Ask the feature question over fresh sampled pairs until the model
    commits to a domain answer; give up as Unsure after max_iters rounds."""
    rng = random.Random(seed)
    system = templates.render("system_hypothesis")
    options = ", ".join(feature.domain)
    src_lang, tgt_lang = direction_names(corpus.direction, meta)
    for iteration in range(max_iters):
        batch_rows = rng.sample(corpus.rows, min(batch, len(corpus.rows)))
        rendered, _ = format_examples_with_spans(
            batch_rows, f"{src_lang} sentence:", f"{tgt_lang} translation:")
        prompt = templates.render(
            "grammar_induction", language=meta.language, other_lang=meta.other_lang,
            examples=rendered, question=feature.question, options=options)
        reply = backend.chat_generate(GenerationRequest(
            system=system, user=prompt, temperature=temperature, model_id=model_id,
            tag=f"{tag}:feature:{feature.id}:{iteration}"))
        answer = match_feature_answer(reply, feature)
        if answer != UNSURE:
            return answer
    return UNSURE


def induce_sketch(features: list[GrammarFeature], corpus: ParallelCorpus,
                  backend: Backend, templates: TemplateSet, meta: TranslationMeta,
                  model_id: str, batch: int = 5, max_iters: int = 10,
                  seed: int = 0, temperature: float = 0.7, tag: str = "") -> dict[str, str]:
    return {
        f.id: induce_grammar_feature(f, corpus, backend, templates, meta, model_id,
                                     batch=batch, max_iters=max_iters,
                                     seed=seed + i, temperature=temperature, tag=tag)
        for i, f in enumerate(features)
    }


def eval_vocab_hypothesis(word: str, hyp_translation: str | None, wl: Wordlist,
                          exclude_morphology: bool = False) -> str:
    """correct | incorrect | skipped, per the dictionary-matching rules.

    Words without an entry are skipped; with exclude_morphology, entries
    whose every translation is affix-marked are skipped too. Null hypotheses
    for evaluable words are incorrect. Affix-marked translations match by
    their prefix/suffix characters when morphology is included.
    """
    translations = wl.entries.get(word)
    if translations is None:
        return "skipped"
    marked = [t for t in translations if has_marker(t)]
    plain = [t for t in translations if not has_marker(t)]
    if exclude_morphology and not plain:
        return "skipped"
    if hyp_translation is None:
        return "incorrect"
    hyp = hyp_translation.strip().lower()
    for t in plain:
        if hyp == t.lower():
            return "correct"
    if not exclude_morphology:
        for t in marked:
            if _affix_match(hyp, t.lower()):
                return "correct"
    return "incorrect"


def _affix_match(hyp: str, translation: str) -> bool:
    stem = strip_markers(translation)
    if not stem:
        return False
    if translation.endswith("-"):  # prefix form: abc-
        return hyp.startswith(stem)
    if translation.startswith("-"):  # suffix form: -abc
        return hyp.endswith(stem)
    return stem in hyp  # bound root marked with *


def eval_grammar_sketch(predicted: dict[str, str], gold: list[GrammarFeature]) -> float:
    """Fraction of features answered exactly; Unsure is never correct."""
    if not gold:
        raise ValueError("gold feature list is empty")
    hits = 0
    for feature in gold:
        answer = predicted.get(feature.id, UNSURE)
        if answer != UNSURE and answer == feature.gold:
            hits += 1
    return hits / len(gold)


def direction_names(direction: str, meta: TranslationMeta) -> tuple[str, str]:
    if direction == "ek":
        return meta.other_lang, meta.language
    return meta.language, meta.other_lang


def build_ref_blocks(refs_by_word: list[tuple[str, list[Example]]],
                     templates: TemplateSet, meta: TranslationMeta,
                     src_lang: str, tgt_lang: str) -> str:
    blocks = []
    for word, refs in refs_by_word:
        for ref in refs:
            blocks.append(templates.render(
                "ref_block", word=word, language=meta.language,
                other_lang=meta.other_lang, src_lang=src_lang, tgt_lang=tgt_lang,
                source_sentence=ref.source, target_sentence=ref.target))
    return "\n".join(blocks)


def build_dict_blocks(entries: list[tuple[str, str]], templates: TemplateSet,
                      meta: TranslationMeta, src_lang: str, tgt_lang: str) -> str:
    blocks = [
        templates.render("dict_block", word=word, language=meta.language,
                         other_lang=meta.other_lang, src_lang=src_lang,
                         tgt_lang=tgt_lang, translation=translation)
        for word, translation in entries
    ]
    return "\n".join(blocks)


def assemble_translation_prompt(setting_kind: str, query: str,
                                refs_by_word: list[tuple[str, list[Example]]],
                                dict_entries: list[tuple[str, str]] | None,
                                sketch_text: str | None,
                                templates: TemplateSet, meta: TranslationMeta,
                                direction: str) -> str:
    """Render the full translation prompt for a setting.

    few_shot/zs_cot use reference blocks only; true_instruction and
    instruction-inference prompts add the dictionary block (gold entries or
    hypothesis translations) and a grammar sketch (gold or induced).
    """
    src_lang, tgt_lang = direction_names(direction, meta)
    if not refs_by_word:
        raise MissingComponentError("reference sentences")
    ref_blocks = build_ref_blocks(refs_by_word, templates, meta, src_lang, tgt_lang)
    available = {
        "intro": meta.intro, "src_lang": src_lang, "tgt_lang": tgt_lang,
        "query": query, "reference_blocks": ref_blocks, "language": meta.language,
    }
    if setting_kind in ("few_shot", "zs_cot"):
        return templates.render_for(setting_kind, available)
    if setting_kind in ("true_instruction", "instruction_inference"):
        if dict_entries is None:
            raise MissingComponentError("dictionary entries")
        if sketch_text is None:
            raise MissingComponentError("grammar sketch")
        template_id = "true_instruction" if setting_kind == "true_instruction" else "self_induced"
        available["dictionary_blocks"] = build_dict_blocks(
            dict_entries, templates, meta, src_lang, tgt_lang)
        available["sketch"] = sketch_text
        return templates.render_for(template_id, available)
    raise ValueError(f"unknown setting kind {setting_kind!r}")


# --- synthetic fixture language ------------------------------------------

_NOUNS = ["dog", "cat", "bird", "fish", "child", "woman", "man", "house", "tree",
          "river", "stone", "boat", "moon", "sun", "star", "friend", "mother",
          "father", "island", "wind", "water", "fire", "rain"]
_VERBS = ["sees", "hears", "eats", "makes", "takes", "gives", "holds", "finds",
          "loves", "fears"]
_ADJECTIVES = ["big", "small", "old", "young", "red", "black"]
_NUMERALS = ["one", "two", "three"]
_OTHER = ["not", "many", "near", "far", "quickly", "slowly", "today", "tomorrow"]

_MARKED = {"quickly": "-{form}", "near": "{form}-", "many": "*{form}"}
_EXTRA_TRANSLATIONS = ["water", "big", "sees"]

_CONSONANTS = "ptkmnswlrv"
_VOWELS = "aeiou"


@dataclass
class FixtureLanguage:
    vocab: dict[str, str]  # english word -> fixture form
    train: list[Example]
    test_ek: list[Example]
    test_ke: list[Example]
    wordlist_rows: list[tuple[str, str]]
    features: list[GrammarFeature] = field(default_factory=list)
    sketch_pairs: list[tuple[str, str]] = field(default_factory=list)
    meta: TranslationMeta = TranslationMeta(
        "Veylan", "English",
        "Veylan is a small constructed language used for translation-harness testing.")


def _invent_form(rng: random.Random, taken: set[str]) -> str:
    while True:
        n_syllables = rng.randint(2, 3)
        form = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS)
                       for _ in range(n_syllables))
        if form not in taken:
            taken.add(form)
            return form


def _fixture_sentence(rng: random.Random, vocab: dict[str, str]) -> tuple[str, str]:
    """One parallel pair. Source is rough English; the target applies the
    fixture grammar: SOV, numeral after noun, adjective after noun,
    negation clause-final."""
    subj = rng.choice(_NOUNS)
    verb = rng.choice(_VERBS)
    obj = rng.choice([n for n in _NOUNS if n != subj])
    pattern = rng.randint(0, 5)
    w = vocab
    if pattern == 0:
        source = [subj, verb, obj]
        target = [w[subj], w[obj], w[verb]]
    elif pattern == 1:
        source = [subj, "not", verb, obj]
        target = [w[subj], w[obj], w[verb], w["not"]]
    elif pattern == 2:
        num = rng.choice(_NUMERALS)
        source = [num, subj, verb, obj]
        target = [w[subj], w[num], w[obj], w[verb]]
    elif pattern == 3:
        adj = rng.choice(_ADJECTIVES)
        source = [subj, verb, adj, obj]
        target = [w[subj], w[obj], w[adj], w[verb]]
    elif pattern == 4:
        adv = rng.choice(["quickly", "slowly"])
        source = [subj, verb, obj, adv]
        target = [w[subj], w[obj], w[verb], w[adv]]
    else:
        extra = rng.choice(["near", "far", "many", "today", "tomorrow"])
        source = [extra, subj, verb, obj]
        target = [w[extra], w[subj], w[obj], w[verb]]
    return " ".join(source), " ".join(target)


def gen_fixture_language(seed: int = 0, n_train: int = 30, n_test: int = 10) -> FixtureLanguage:
    """Deterministic toy language: ~50-word vocabulary, word-for-word
    parallel sentences under a fixed target grammar, and a 6-feature sketch."""
    rng = random.Random(seed)
    taken: set[str] = set()
    words = _NOUNS + _VERBS + _ADJECTIVES + _NUMERALS + _OTHER
    vocab = {word: _invent_form(rng, taken) for word in words}

    def draw_rows(count: int, seen: set[str], required_vocab: set[str] | None) -> list[Example]:
        rows: list[Example] = []
        while len(rows) < count:
            source, target = _fixture_sentence(rng, vocab)
            if source in seen:
                continue
            if required_vocab is not None and not set(source.split()) <= required_vocab:
                continue
            seen.add(source)
            rows.append(Example(source, target))
        return rows

    seen: set[str] = set()
    train = draw_rows(n_train, seen, None)
    train_words = {w for row in train for w in row.source.split()}
    test_ek = draw_rows(n_test, seen, train_words)
    test_ke = [Example(r.target, r.source) for r in draw_rows(n_test, seen, train_words)]

    wordlist_rows: list[tuple[str, str]] = []
    for word in words:
        form = vocab[word]
        if word in _MARKED:
            form = _MARKED[word].format(form=form)
        wordlist_rows.append((word, form))
        if word in _EXTRA_TRANSLATIONS:
            wordlist_rows.append((word, _invent_form(rng, taken)))

    language = "Veylan"
    features = [
        GrammarFeature("word_order", "Basic Word Order",
                       f"What is the basic word order of {language}?",
                       ("SVO", "SOV", "VSO"), "SOV"),
        GrammarFeature("adjective_order", "Adjective Position",
                       f"Does an adjective come before or after the noun it modifies in {language}?",
                       ("Adjective-Noun", "Noun-Adjective"), "Noun-Adjective"),
        GrammarFeature("numeral_order", "Numeral Position",
                       f"Does a numeral come before or after the noun it counts in {language}?",
                       ("Num-Noun", "Noun-Num"), "Noun-Num"),
        GrammarFeature("negation_position", "Negation Position",
                       f"Where does the negation marker appear in a {language} clause?",
                       ("Clause-initial", "Clause-final"), "Clause-final"),
        GrammarFeature("plural_marking", "Plural Marking",
                       f"Does {language} mark plural on nouns?",
                       ("Yes", "No"), "No"),
        GrammarFeature("adverb_marking", "Adverb Marking",
                       f"How are adverbs expressed in {language}?",
                       ("Verbal suffix", "Separate word", "Prefix"), "Separate word"),
    ]
    sketch_pairs = [(f.label, f.gold) for f in features]
    return FixtureLanguage(vocab=vocab, train=train, test_ek=test_ek, test_ke=test_ke,
                           wordlist_rows=wordlist_rows, features=features,
                           sketch_pairs=sketch_pairs)


def write_fixture_language(fixture: FixtureLanguage, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_pairs(fixture.train, out / "train.ek.jsonl")
    write_pairs(fixture.test_ek, out / "test.ek.jsonl")
    write_pairs(fixture.test_ke, out / "test.ke.jsonl")
    (out / "wordlist.csv").write_text(
        "".join(f"{w},{t}\n" for w, t in fixture.wordlist_rows), encoding="utf-8")
    (out / "sketch.txt").write_text(render_sketch_text(fixture.sketch_pairs) + "\n",
                                    encoding="utf-8")
    (out / "features.json").write_text(json.dumps([
        {"id": f.id, "label": f.label, "question": f.question,
         "answers": list(f.domain), "gold": f.gold}
        for f in fixture.features], indent=2) + "\n", encoding="utf-8")
    (out / "meta.json").write_text(json.dumps({
        "language": fixture.meta.language,
        "other_lang": fixture.meta.other_lang,
        "intro": fixture.meta.intro}, indent=2) + "\n", encoding="utf-8")
