"""Experiment orchestration: work queue, per-setting prompting flows,
record persistence, and resume.

Records are appended to ``<out_dir>/records.jsonl`` in a fixed order
(trial-major, then instance) with canonical JSON, so a replayed run is
byte-identical and a killed run resumes with exactly the missing records.
"""

from __future__ import annotations

import hashlib
import json
import re
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import colours as colours_mod
from . import functions as functions_mod
from . import rerank
from . import translation as translation_mod
from .backends import Backend, GenerationRequest, HttpBackend, ReplayBackend, ResponseCache
from .config import RunConfig
from .errors import ConfigError, HarnessError
from .metrics import segment_chrf
from .templates import TemplateSet, format_examples_with_spans, load_templates, parse_model_output
from .types import (
    NEG_INF,
    Example,
    Hypothesis,
    ResultRecord,
    ScoredHypothesis,
    Setting,
    TaskInstance,
)


def derive_seed(*parts) -> int:
    """Stable cross-platform seed from arbitrary labelled parts."""
    digest = hashlib.sha256(repr(parts).encode("utf-8")).hexdigest()
    return int(digest[:12], 16)


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unversioned"


@dataclass
class RunManifest:
    config: dict
    git_describe: str
    started_at: float
    ended_at: float = 0.0
    records_written: int = 0
    fallbacks: int = 0
    parse_failures: int = 0
    backend_errors: int = 0
    induced_sketch: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "git_describe": self.git_describe,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "counts": {
                "records_written": self.records_written,
                "fallbacks": self.fallbacks,
                "parse_failures": self.parse_failures,
                "backend_errors": self.backend_errors,
            },
            "induced_sketch": self.induced_sketch,
        }


def record_line(record: ResultRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def parse_failed(record: ResultRecord) -> bool:
    """Whether a record's reply failed its domain's parsing contract.

    Translation replies carry no answer marker by design, so only a missing
    parsed output counts there; marker domains also count unmarked replies.
    """
    if record.parsed_output is None:
        return True
    return not record.marked and record.domain != "translation"


class _Driver:
    """Per-domain prompting flow; one instance per run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.setting = config.setting
        self.templates: TemplateSet = load_templates(config.domain)

    def prepare(self, backend: Backend) -> dict[str, str]:
        return {}

    def instances(self) -> list[TaskInstance]:
        raise NotImplementedError

    def run_one(self, instance: TaskInstance, trial: int, temperature: float,
                backend: Backend) -> ResultRecord:
        raise NotImplementedError

    # common plumbing ------------------------------------------------------

    def _chat(self, backend: Backend, system: str, user: str, temperature: float,
              tag: str) -> str:
        return backend.chat_generate(GenerationRequest(
            system=system, user=user, temperature=temperature,
            model_id=self.config.model_id,
            max_tokens=self.config.max_tokens or None, tag=tag))

    def _base_record(self, instance: TaskInstance, trial: int, temperature: float,
                     raw: str, answer: str, marked: bool) -> ResultRecord:
        return ResultRecord(
            instance_id=instance.id, domain=self.config.domain,
            model_id=self.config.model_id, setting=self.setting,
            trial_index=trial, temperature=temperature, raw_output=raw,
            parsed_output=answer, marked=marked, correct=None,
            query_source=instance.query.source, reference=instance.query.target)


class FunctionsDriver(_Driver):
    def __init__(self, config: RunConfig):
        super().__init__(config)
        suite_path = Path(config.data_dir) / "functions.jsonl" if config.data_dir else None
        if suite_path is not None and suite_path.exists():
            self.suite = functions_mod.suite_from_jsonl(suite_path, seed=config.seed)
        else:
            self.suite = functions_mod.gen_function_suite(config.seed)
        self.truth = self.suite.truth_by_id()

    def instances(self) -> list[TaskInstance]:
        return self.suite.instances()

    def run_one(self, instance, trial, temperature, backend) -> ResultRecord:
        cfg = self.config
        examples, spans = format_examples_with_spans(instance.in_context)
        truth = self.truth[instance.id]
        marker = "Output:"
        candidates: list[ScoredHypothesis] = []
        chosen: ScoredHypothesis | None = None
        fallback = False

        if self.setting.kind == "few_shot":
            system = self.templates.render("system_base")
            prompt = self.templates.render("few_shot", examples=examples,
                                           query=instance.query.source)
        elif self.setting.kind == "zs_cot":
            system = self.templates.render("system_base")
            prompt = self.templates.render("zs_cot", examples=examples,
                                           query=instance.query.source)
            marker = "Final Output:"
        elif self.setting.kind == "true_instruction":
            system = self.templates.render("system_instruction")
            prompt = self.templates.render(
                "true_instruction", function=functions_mod.render_linear(truth),
                examples=examples, query=instance.query.source)
        else:
            induction = self.templates.render("induction", examples=examples)
            hyp_system = self.templates.render("system_hypothesis")
            raw_candidates: list[Hypothesis] = []
            for i in range(cfg.n_hypotheses):
                reply = self._chat(backend, hyp_system, induction,
                                   cfg.hypothesis_temperature,
                                   tag=f"{instance.id}:{trial}:hyp:{i}")
                display, _ = parse_model_output(reply, "Output:")
                parsed = functions_mod.parse_linear_hypothesis(reply)
                raw_candidates.append(Hypothesis(
                    raw=display or "(empty reply)",
                    parsed=parsed))
            ctx = rerank.RerankContext(
                rendered_examples=examples, answer_spans=spans,
                templates=self.templates, model_id=cfg.model_id,
                scorer_model_id=cfg.scorer_model_id,
                tag=f"{instance.id}:{trial}",
                confidence_temperature=cfg.confidence_temperature)
            candidates = rerank.score_candidates(
                raw_candidates, ctx, self.setting.rerank, backend,
                external_fn=lambda h: functions_mod.external_validate(h, instance.in_context))
            chosen, fallback = rerank.select_best(candidates)
            if fallback:
                system = self.templates.render("system_base")
                prompt = self.templates.render("few_shot", examples=examples,
                                               query=instance.query.source)
            else:
                system = self.templates.render("system_instruction")
                prompt = self.templates.render(
                    "self_induced", hypothesis=chosen.hypothesis.raw,
                    examples=examples, query=instance.query.source)

        reply = self._chat(backend, system, prompt, temperature,
                           tag=f"{instance.id}:{trial}:answer")
        answer, marked = parse_model_output(reply, marker)
        record = self._base_record(instance, trial, temperature, reply, answer, marked)
        record.candidates = [self._serializable(c) for c in candidates]
        record.fallback_used = fallback
        record.truth = {"slope": str(truth.slope), "intercept": str(truth.intercept)}
        predicted = functions_mod._as_fraction(answer) if answer else None
        if predicted is None:
            m = re.search(r"[-+]?\d+(?:\.\d+)?(?:/\d+)?", answer)
            if m:
                predicted = functions_mod._as_fraction(m.group(0))
        target = Fraction(instance.query.target)
        if predicted is None:
            record.parsed_output = None
            record.correct = None
        else:
            record.parsed_output = str(predicted)
            record.correct = predicted == target
            record.squared_error = float((predicted - target) ** 2)
        if chosen is not None:
            record.chosen_hypothesis = self._serializable(chosen)
            parsed = chosen.hypothesis.parsed
            if isinstance(parsed, functions_mod.ParsedLinear):
                record.hypothesis_correct = (parsed.slope == truth.slope
                                             and parsed.intercept == truth.intercept)
            else:
                record.hypothesis_correct = False
        return record

    @staticmethod
    def _serializable(scored: ScoredHypothesis) -> ScoredHypothesis:
        parsed = scored.hypothesis.parsed
        if isinstance(parsed, functions_mod.ParsedLinear):
            payload = [str(parsed.slope), str(parsed.intercept)]
            return ScoredHypothesis(
                hypothesis=Hypothesis(raw=scored.hypothesis.raw,
                                      word=scored.hypothesis.word, parsed=payload),
                method=scored.method, score=scored.score)
        return scored


def _colour_payload(meaning) -> dict:
    if isinstance(meaning, colours_mod.ColourRule):
        return {"kind": "colour", "value": meaning.colour}
    return {"kind": "text", "value": meaning}


def _colour_meaning(payload: dict):
    if payload["kind"] == "colour":
        return colours_mod.ColourRule.for_colour(payload["value"])
    return payload["value"]


class ColoursDriver(_Driver):
    def __init__(self, config: RunConfig):
        super().__init__(config)
        data_dir = Path(config.data_dir) if config.data_dir else None
        if data_dir is not None and (data_dir / "train.jsonl").exists():
            from .dataio import read_pairs

            self.train = read_pairs(data_dir / "train.jsonl")
            self.test = read_pairs(data_dir / "test.jsonl")
        else:
            self.train, self.test = colours_mod.gen_colours_dataset(config.seed)
        self.grammar = colours_mod.gold_grammar()
        self.fewshot = tuple(colours_mod.fixed_fewshot())

    def instances(self) -> list[TaskInstance]:
        return [TaskInstance(f"col-{i:03d}", "colours", self.fewshot, row)
                for i, row in enumerate(self.test)]

    def _grammar_text(self) -> str:
        return colours_mod.assemble_colour_grammar_text(
            list(self.grammar.rules.items()))

    def run_one(self, instance, trial, temperature, backend) -> ResultRecord:
        examples = format_examples_with_spans(instance.in_context)[0]
        marker = "Output:"
        candidates: list[ScoredHypothesis] = []
        word_winners: list[ScoredHypothesis] = []
        hyp_evals: dict[str, str] = {}
        fallback = False

        if self.setting.kind == "few_shot":
            system = self.templates.render("system_base")
            prompt = self.templates.render("few_shot", examples=examples,
                                           query=instance.query.source)
        elif self.setting.kind == "zs_cot":
            system = self.templates.render("system_base")
            prompt = self.templates.render("zs_cot", examples=examples,
                                           query=instance.query.source)
            marker = "Final Output:"
        elif self.setting.kind == "true_instruction":
            system = self.templates.render("system_instruction")
            prompt = self.templates.render("true_instruction",
                                           grammar=self._grammar_text(),
                                           examples=examples,
                                           query=instance.query.source)
        else:
            grammar_rules: list[tuple[str, object]] = []
            words = list(dict.fromkeys(instance.query.source.split()))
            for word in words:
                winner, scored = self._induce_word(word, instance, trial, backend)
                candidates.extend(scored)
                if winner is None:
                    hyp_evals[word] = "incorrect"
                    continue
                word_winners.append(winner)
                meaning = _colour_meaning(winner.hypothesis.parsed)
                grammar_rules.append((word, meaning))
                hyp_evals[word] = (
                    "correct" if colours_mod.eval_colour_hypothesis(
                        word, meaning, self.grammar) else "incorrect")
            if grammar_rules:
                system = self.templates.render("system_instruction")
                prompt = self.templates.render(
                    "self_induced",
                    grammar=colours_mod.assemble_colour_grammar_text(grammar_rules),
                    examples=examples, query=instance.query.source)
            else:
                fallback = True
                system = self.templates.render("system_base")
                prompt = self.templates.render("few_shot", examples=examples,
                                               query=instance.query.source)

        reply = self._chat(backend, system, prompt, temperature,
                           tag=f"{instance.id}:{trial}:answer")
        answer, marked = parse_model_output(reply, marker)
        record = self._base_record(instance, trial, temperature, reply, answer, marked)
        normalized = " ".join(answer.split())
        reference = " ".join(instance.query.target.split())
        record.parsed_output = normalized
        record.correct = normalized == reference
        record.segment_chrf = segment_chrf(reference, normalized)
        record.candidates = candidates
        record.word_winners = word_winners
        record.hyp_evals = hyp_evals
        record.fallback_used = fallback
        return record

    def _induce_word(self, word: str, instance: TaskInstance, trial: int,
                     backend: Backend):
        cfg = self.config
        try:
            retrieved = colours_mod.retrieve_word_examples(
                word, self.train, k=cfg.examples_per_word,
                seed=derive_seed(cfg.seed, trial, word))
        except colours_mod.WordAbsentError:
            retrieved = [ex for ex in self.fewshot if word in ex.source.split()]
            if not retrieved:
                return None, []
        rendered, spans = format_examples_with_spans(retrieved)
        prompt = self.templates.render("induction", word=word, examples=rendered)
        system = self.templates.render("system_hypothesis")
        raw_candidates: list[Hypothesis] = []
        for i in range(cfg.n_hypotheses):
            reply = self._chat(backend, system, prompt, cfg.hypothesis_temperature,
                               tag=f"{instance.id}:{trial}:hyp:{word}:{i}")
            try:
                parsed_word, meaning = colours_mod.parse_colour_rule(reply)
                payload = _colour_payload(meaning)
                if parsed_word != word:
                    payload = None
            except colours_mod.NoArrowError:
                payload = None
            display = next((line.strip() for line in reply.splitlines() if "->" in line),
                           reply.strip() or "(empty reply)")
            raw_candidates.append(Hypothesis(raw=display, word=word, parsed=payload))
        ctx = rerank.RerankContext(
            rendered_examples=rendered, answer_spans=spans, templates=self.templates,
            word=word, model_id=cfg.model_id, scorer_model_id=cfg.scorer_model_id,
            tag=f"{instance.id}:{trial}:{word}",
            confidence_temperature=cfg.confidence_temperature)

        def external(h: Hypothesis):
            if h.parsed is None:
                return NEG_INF
            return colours_mod.validate_colour_hypothesis(
                word, _colour_meaning(h.parsed), retrieved)

        scored = rerank.score_candidates(raw_candidates, ctx, self.setting.rerank,
                                         backend, external_fn=external)
        winner, _ = rerank.select_best(scored)
        if winner is not None and winner.hypothesis.parsed is None:
            winner = None
        return winner, scored


class TranslationDriver(_Driver):
    def __init__(self, config: RunConfig):
        super().__init__(config)
        data_dir = config.data_dir or str(translation_mod.fixture_data_dir())
        self.data = translation_mod.load_corpus(data_dir, config.direction)
        self.cache = translation_mod.VocabHypothesisCache()
        self.induced_sketch: dict[str, str] = {}
        self._word_owner: dict[str, str] = {}
        self._word_candidates: dict[str, list[ScoredHypothesis]] = {}

    def prepare(self, backend: Backend) -> dict[str, str]:
        if self.setting.kind != "instruction_inference":
            return {}
        cfg = self.config
        self.induced_sketch = translation_mod.induce_sketch(
            self.data.features, self.data.corpus, backend, self.templates,
            self.data.meta, cfg.model_id, batch=cfg.grammar_batch,
            max_iters=cfg.grammar_max_iters, seed=derive_seed(cfg.seed, "sketch"),
            temperature=cfg.grammar_temperature,
            tag=f"run:{self.data.corpus.direction}")
        # induce vocabulary up front in instance order, so candidate lists
        # land on a deterministic owner record regardless of parallelism
        instances = self.instances()
        if cfg.limit:
            instances = instances[: cfg.limit]
        for instance in instances:
            for word in translation_mod.tokenize_words(instance.query.source):
                if word in self._word_owner:
                    continue
                self._word_owner[word] = instance.id
                _, scored = self._induce(word, backend)
                self._word_candidates[word] = scored
        return dict(self.induced_sketch)

    def _induce(self, word: str, backend: Backend):
        cfg = self.config
        corpus = self.data.corpus
        return translation_mod.induce_vocab(
            word, corpus, self.cache, backend, self.templates,
            self.data.meta, self.setting.rerank, cfg.model_id,
            cfg.scorer_model_id, n_hyp=cfg.n_hypotheses,
            seed=derive_seed(cfg.seed, "vocab", corpus.direction, word),
            temperature=cfg.hypothesis_temperature,
            k_examples=cfg.examples_per_word,
            tag=f"run:{corpus.direction}",
            confidence_temperature=cfg.confidence_temperature)

    def instances(self) -> list[TaskInstance]:
        corpus = self.data.corpus
        out = []
        for i, row in enumerate(corpus.test_rows):
            words = translation_mod.tokenize_words(row.source)
            refs: list[Example] = []
            for word in words:
                for ref in translation_mod.retrieve_refs(word, corpus,
                                                         self.config.refs_per_word):
                    if ref not in refs:
                        refs.append(ref)
            out.append(TaskInstance(f"tr-{corpus.direction}-{i:03d}", "translation",
                                    tuple(refs) or (corpus.rows[0],), row))
        return out

    def run_one(self, instance, trial, temperature, backend) -> ResultRecord:
        cfg = self.config
        corpus = self.data.corpus
        words = translation_mod.tokenize_words(instance.query.source)
        refs_by_word = [(w, translation_mod.retrieve_refs(w, corpus, cfg.refs_per_word))
                        for w in words]
        candidates: list[ScoredHypothesis] = []
        word_winners: list[ScoredHypothesis] = []
        hyp_evals: dict[str, str] = {}
        fallback = False
        dict_entries: list[tuple[str, str]] | None = None
        sketch_text: str | None = None
        setting_kind = self.setting.kind

        if setting_kind == "true_instruction":
            dict_entries = []
            for word in words:
                _, translations = translation_mod.retrieve_wordlist_entry(
                    word, self.data.wordlist)
                dict_entries.append((word, translations[0]))
            sketch_text = self.data.sketch_text
        elif setting_kind == "instruction_inference":
            dict_entries = []
            for word in words:
                winner, scored = self._induce(word, backend)
                # the first work item containing a word (trial 0, instance
                # order) owns its candidate list, as a lazy serial run would
                if not scored and trial == 0 and self._word_owner.get(word) == instance.id:
                    scored = self._word_candidates.get(word, [])
                candidates.extend(scored)
                word_winners.append(winner)
                hyp_evals[word] = translation_mod.eval_vocab_hypothesis(
                    word, winner.hypothesis.parsed, self.data.wordlist)
                if winner.hypothesis.parsed is not None:
                    dict_entries.append((word, winner.hypothesis.parsed))
            sketch_text = translation_mod.render_sketch_text(
                [(f.label, self.induced_sketch.get(f.id, translation_mod.UNSURE))
                 for f in self.data.features])
            if not dict_entries:
                fallback = True
                setting_kind = "few_shot"
                dict_entries = None
                sketch_text = None

        prompt = translation_mod.assemble_translation_prompt(
            setting_kind, instance.query.source, refs_by_word, dict_entries,
            sketch_text, self.templates, self.data.meta, corpus.direction)
        system = (self.templates.render("system_instruction")
                  if setting_kind in ("true_instruction", "instruction_inference")
                  else self.templates.render("system_base"))
        reply = self._chat(backend, system, prompt, temperature,
                           tag=f"{instance.id}:{trial}:answer")
        answer, marked = parse_model_output(reply, "translation:")
        record = self._base_record(instance, trial, temperature, reply, answer, marked)
        record.parsed_output = answer
        record.correct = None
        record.segment_chrf = segment_chrf(instance.query.target, answer)
        record.candidates = candidates
        record.word_winners = word_winners
        record.hyp_evals = hyp_evals
        record.fallback_used = fallback
        return record


_DRIVERS = {
    "functions": FunctionsDriver,
    "colours": ColoursDriver,
    "translation": TranslationDriver,
}


def build_backend(config: RunConfig) -> Backend:
    if config.backend_mode == "live":
        cache = ResponseCache(config.record_dir) if config.record_dir else None
        return HttpBackend(config.base_url, config.api_key_env, cache=cache)
    if config.backend_mode == "replay":
        if not config.replay_dir:
            raise ConfigError("replay mode needs replay_dir")
        return ReplayBackend(ResponseCache(config.replay_dir))
    raise ConfigError(f"unknown backend_mode {config.backend_mode!r}")


@dataclass
class RunResult:
    records: list[ResultRecord]
    manifest: RunManifest
    records_path: Path
    manifest_path: Path


def run_experiment(config: RunConfig, backend: Backend | None = None) -> RunResult:
    """Run every (trial, instance) work item for one setting.

    Already-persisted (instance, trial, setting) keys are skipped, so
    restarting a killed run produces exactly the missing records.
    """
    if backend is None:
        backend = build_backend(config)
    driver = _DRIVERS[config.domain](config)
    manifest = RunManifest(config=_config_snapshot(config),
                           git_describe=_git_describe(), started_at=time.time())
    manifest.induced_sketch = driver.prepare(backend)

    instances = driver.instances()
    if config.limit:
        instances = instances[: config.limit]
    temps = config.temperatures()

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    manifest_path = out_dir / "manifest.json"

    done: set[tuple[str, int, str]] = set()
    if records_path.exists():
        for line in records_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            done.add((row["instance_id"], row["trial_index"], row["setting"]))

    work = [(instance, trial, temp)
            for trial, temp in enumerate(temps)
            for instance in instances
            if (instance.id, trial, config.setting.key()) not in done]

    def run_item(item):
        instance, trial, temp = item
        try:
            return driver.run_one(instance, trial, temp, backend)
        except HarnessError as exc:
            return exc

    records: list[ResultRecord] = []
    with records_path.open("a", encoding="utf-8") as fh:
        if config.parallelism > 1:
            executor = ThreadPoolExecutor(max_workers=config.parallelism)
            results = executor.map(run_item, work)
        else:
            results = map(run_item, work)
        for outcome in results:
            if isinstance(outcome, HarnessError):
                manifest.backend_errors += 1
                continue
            fh.write(record_line(outcome) + "\n")
            fh.flush()
            records.append(outcome)
            manifest.records_written += 1
            if outcome.fallback_used:
                manifest.fallbacks += 1
            if parse_failed(outcome):
                manifest.parse_failures += 1
        if config.parallelism > 1:
            executor.shutdown()

    manifest.ended_at = time.time()
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n",
                             encoding="utf-8")
    return RunResult(records=records, manifest=manifest,
                     records_path=records_path, manifest_path=manifest_path)


def _config_snapshot(config: RunConfig) -> dict:
    snap = dict(config.__dict__)
    snap["setting"] = config.setting.key()
    snap["temperature_schedule"] = [list(pair) for pair in config.temperature_schedule]
    return snap


def gen_data(domain: str, seed: int, out_dir: str | Path) -> dict[str, int]:
    """Write a domain's dataset files; returns row counts per file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if domain == "functions":
        suite = functions_mod.gen_function_suite(seed)
        functions_mod.suite_to_jsonl(suite, out / "functions.jsonl")
        return {"functions.jsonl": len(suite.instances())}
    if domain == "colours":
        from .dataio import write_pairs

        train, test = colours_mod.gen_colours_dataset(seed)
        write_pairs(train, out / "train.jsonl")
        write_pairs(test, out / "test.jsonl")
        return {"train.jsonl": len(train), "test.jsonl": len(test)}
    if domain == "fixture-translation":
        fixture = translation_mod.gen_fixture_language(seed)
        translation_mod.write_fixture_language(fixture, out)
        return {
            "train.ek.jsonl": len(fixture.train),
            "test.ek.jsonl": len(fixture.test_ek),
            "test.ke.jsonl": len(fixture.test_ke),
            "wordlist.csv": len(fixture.wordlist_rows),
        }
    raise ConfigError(f"unknown domain {domain!r} for data generation")
