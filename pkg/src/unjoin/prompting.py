"""Prompt construction from fixed template files.

Templates live as plain text with ``{slot}`` placeholders. Only the
named slots are ever substituted; any other brace in the template or in
slot values passes through untouched, so SQL and prose containing
braces cannot corrupt a render. Few-shot example blocks are fixed,
schema-agnostic constants shipped alongside the templates; they talk
about a fictional bank_data schema and never about evaluation data.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from .schema import (
    DatabaseSchema,
    SimplifiedSchema,
    render_original_schema,
    render_simplified,
    simplify_schema,
)

SLOT_NAMES = (
    "schema_block",
    "question",
    "original_schema_block",
    "simplified_query",
    "examples_block",
)

_SLOT_RE = re.compile("{(" + "|".join(SLOT_NAMES) + ")}")

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"

TEMPLATE_FILES = (
    "sp.txt",
    "mp_step1.txt",
    "mp_step2.txt",
    "cot.txt",
    "cot_ss.txt",
    "examples_generation.txt",
    "examples_translation.txt",
    "examples_baseline.txt",
)


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str

    @classmethod
    def load(cls, template_id: str, template_dir: str | Path | None = None) -> "PromptTemplate":
        directory = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
        path = directory / f"{template_id}.txt"
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TemplateError(f"cannot load template {template_id!r}: {exc}") from exc
        return cls(template_id, text)

    def slots(self) -> tuple[str, ...]:
        seen = []
        for m in _SLOT_RE.finditer(self.text):
            if m.group(1) not in seen:
                seen.append(m.group(1))
        return tuple(seen)

    def render(self, **values: str) -> str:
        required = self.slots()
        missing = [s for s in required if s not in values]
        if missing:
            raise TemplateError(
                f"template {self.template_id!r} missing slot values: {', '.join(missing)}"
            )

        def repl(m: re.Match) -> str:
            return values[m.group(1)]

        return _SLOT_RE.sub(repl, self.text)


def _examples(name: str, template_dir: str | Path | None) -> str:
    return PromptTemplate.load(name, template_dir).text.rstrip("\n")


def build_sp_prompt(
    simplified: SimplifiedSchema,
    question: str,
    db: DatabaseSchema,
    template_dir: str | Path | None = None,
) -> str:
    """Joint two-step prompt: simplify-time generation plus translation."""
    if not simplified.entries or not question.strip():
        raise ValueError("simplified schema and question must be non-empty")
    template = PromptTemplate.load("sp", template_dir)
    return template.render(
        schema_block=render_simplified(simplified),
        examples_block=_examples("examples_translation", template_dir),
        original_schema_block=render_original_schema(db),
        question=question,
    )


def build_mp_step1_prompt(
    simplified: SimplifiedSchema,
    question: str,
    template_dir: str | Path | None = None,
) -> str:
    """Step 1 of the multi-prompt variant: single-table query generation."""
    if not simplified.entries or not question.strip():
        raise ValueError("simplified schema and question must be non-empty")
    template = PromptTemplate.load("mp_step1", template_dir)
    return template.render(
        schema_block=render_simplified(simplified),
        examples_block=_examples("examples_generation", template_dir),
        question=question,
    )


def build_mp_step2_prompt(
    simplified: SimplifiedSchema,
    simplified_sql: str,
    question: str,
    db: DatabaseSchema,
    template_dir: str | Path | None = None,
) -> str:
    """Step 2 of the multi-prompt variant: translation to the original schema."""
    if not simplified_sql.strip():
        raise ValueError("simplified_sql must be non-empty")
    template = PromptTemplate.load("mp_step2", template_dir)
    return template.render(
        schema_block=render_simplified(simplified),
        examples_block=_examples("examples_translation", template_dir),
        simplified_query=simplified_sql,
        original_schema_block=render_original_schema(db),
        question=question,
    )


def build_baseline_prompt(
    kind: str,
    schema_block: str,
    question: str,
    template_dir: str | Path | None = None,
) -> str:
    """Chain-of-thought baselines.

    kind "cot" sees the original multi-table schema; kind "cot-ss" sees
    the simplified single-table rendering but must answer with the final
    multi-table SQL. Both share one fixed few-shot block.
    """
    ids = {"cot": "cot", "cot-ss": "cot_ss"}
    if kind not in ids:
        raise TemplateError(f"unknown baseline kind {kind!r}; expected one of {sorted(ids)}")
    template = PromptTemplate.load(ids[kind], template_dir)
    return template.render(
        schema_block=schema_block,
        examples_block=_examples("examples_baseline", template_dir),
        question=question,
    )


def baseline_schema_block(kind: str, db: DatabaseSchema) -> str:
    """The schema rendering each baseline kind consumes."""
    if kind == "cot":
        return render_original_schema(db)
    if kind == "cot-ss":
        return render_simplified(simplify_schema(db))
    raise TemplateError(f"unknown baseline kind {kind!r}")


def template_hashes(template_dir: str | Path | None = None) -> dict[str, str]:
    """sha256 of every shipped template, for run provenance."""
    directory = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
    out = {}
    for name in TEMPLATE_FILES:
        path = directory / name
        if path.exists():
            out[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out
