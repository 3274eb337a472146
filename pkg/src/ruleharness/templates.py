"""Prompt templating and model-output parsing.

Prompt bodies live as UTF-8 text files under ``data/templates/<domain>/``,
one file per template, with slots written as ``{name}``. Only
identifier-shaped names are slots; any other braced text is left verbatim.
Repetition (example lists, per-word blocks) is the caller's job: callers
render blocks with the helpers below and bind the joined text to a single
slot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import MissingSlotError, UnknownSlotError
from .types import Example

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def find_slots(body: str) -> list[str]:
    """Slot names appearing in a body, in first-appearance order."""
    seen: list[str] = []
    for m in _SLOT_RE.finditer(body):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return seen


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_slots: tuple[str, ...] = ()

    @classmethod
    def from_body(cls, template_id: str, body: str) -> "PromptTemplate":
        return cls(id=template_id, body=body, required_slots=tuple(find_slots(body)))


def render_template(template: PromptTemplate, bindings: dict[str, str], strict: bool = True) -> str:
    """Substitute every slot in the template body.

    Raises MissingSlotError when a required slot is unbound, and, in strict
    mode, UnknownSlotError when a binding names no slot in the body.
    """
    slots = set(template.required_slots)
    for name in template.required_slots:
        if name not in bindings:
            raise MissingSlotError(name)
    if strict:
        for name in bindings:
            if name not in slots:
                raise UnknownSlotError(name)

    def _sub(m: re.Match) -> str:
        return str(bindings[m.group(1)])

    return _SLOT_RE.sub(_sub, template.body)


def parse_model_output(reply: str, marker: str) -> tuple[str, bool]:
    """Extract the answer after the LAST occurrence of ``marker``.

    Chain-of-thought replies may quote the marker mid-reasoning, so only
    the final occurrence counts. A missing marker is not an error: the whole
    reply is returned trimmed, flagged ``marked=False``.
    """
    if not marker:
        raise ValueError("marker must be non-empty")
    idx = reply.rfind(marker)
    if idx < 0:
        return reply.strip(), False
    return reply[idx + len(marker):].strip(), True


def format_examples(examples: list[Example] | tuple[Example, ...],
                    source_label: str = "Input:",
                    target_label: str = "Output:") -> str:
    """Render an in-context block, one labelled pair per group."""
    return format_examples_with_spans(examples, source_label, target_label)[0]


def format_examples_with_spans(examples, source_label: str = "Input:",
                               target_label: str = "Output:") -> tuple[str, list[tuple[int, int]]]:
    """Render the in-context block and report each target's character span.

    Spans index into the returned text and cover exactly the target strings,
    which is what answer-restricted logprob scoring needs.
    """
    parts: list[str] = []
    spans: list[tuple[int, int]] = []
    offset = 0
    for i, ex in enumerate(examples):
        block = f"{source_label} {ex.source}\n{target_label} "
        start = offset + len(block)
        spans.append((start, start + len(ex.target)))
        block += ex.target
        if i < len(examples) - 1:
            block += "\n\n"
        parts.append(block)
        offset += len(block)
    return "".join(parts), spans


_TEMPLATE_IDS = (
    "system_base",
    "system_hypothesis",
    "system_instruction",
    "few_shot",
    "true_instruction",
    "induction",
    "self_induced",
    "zs_cot",
    "confidence",
    "logprob_prefix",
)

_EXTRA_IDS = {
    "translation": ("ref_block", "dict_block", "grammar_induction"),
}


@dataclass
class TemplateSet:
    """All prompt templates for one domain, keyed by template id."""

    domain: str
    templates: dict[str, PromptTemplate] = field(default_factory=dict)

    def __getitem__(self, template_id: str) -> PromptTemplate:
        return self.templates[template_id]

    def render(self, template_id: str, **bindings: str) -> str:
        return render_template(self.templates[template_id], bindings)

    def render_for(self, template_id: str, available: dict[str, str]) -> str:
        """Render using only the bindings the template actually declares."""
        template = self.templates[template_id]
        picked = {name: available[name] for name in template.required_slots if name in available}
        return render_template(template, picked)


def _read_body(text: str) -> str:
    # files end with one editorial newline that is not part of the prompt
    return text[:-1] if text.endswith("\n") else text


def load_templates(domain: str, directory: str | Path | None = None) -> TemplateSet:
    """Load a domain's template files, from ``directory`` or package data."""
    ids = _TEMPLATE_IDS + _EXTRA_IDS.get(domain, ())
    out = TemplateSet(domain=domain)
    if directory is not None:
        base = Path(directory) / domain
        for template_id in ids:
            body = _read_body((base / f"{template_id}.txt").read_text(encoding="utf-8"))
            out.templates[template_id] = PromptTemplate.from_body(template_id, body)
        return out
    root = resources.files("ruleharness").joinpath("data", "templates", domain)
    for template_id in ids:
        body = _read_body(root.joinpath(f"{template_id}.txt").read_text(encoding="utf-8"))
        out.templates[template_id] = PromptTemplate.from_body(template_id, body)
    return out
