"""Turning crash-manual and safety-handbook entries into instruction records.

Source material arrives as entry blocks::

    TERM: Van
    KIND: Definition
    SOURCE: MMUCC
    A van is a motor vehicle ...

Blocks are separated by blank lines. Each entry becomes one record whose
instruction is a per-source persona, whose input is a templated question for
the entry's task kind, and whose output is the body text verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .dataset import InstructionRecord, Provenance, SourceTag, TaskType, record_id
from .errors import ConfigError, DataError, ParseError

__all__ = [
    "GuidebookEntry",
    "DEFAULT_PERSONAS",
    "QUESTION_TEMPLATES",
    "parse_guidebook",
    "template_question",
    "entries_to_records",
]


@dataclass(frozen=True)
class GuidebookEntry:
    """One source entry: a term, its task kind, the owning corpus, body text."""

    term: str
    kind: TaskType
    body: str
    source: SourceTag


DEFAULT_PERSONAS: dict[SourceTag, str] = {
    SourceTag.MMUCC: "You are a police officer at the crash Scene",
    SourceTag.HSM: "You are a traffic engineer work for DOT",
}

QUESTION_TEMPLATES: dict[TaskType, str] = {
    TaskType.DEFINITION: "What is the definition of {term} in Motor Vehicle Traffic Crashes?",
    TaskType.INCLUSIONS: "What are the inclusions of {term} in Motor Vehicle Traffic Crashes?",
    TaskType.EXCLUSIONS: "What are the exclusions of {term} in Motor Vehicle Traffic Crashes?",
    TaskType.CATEGORIES: (
        "What is the guide to the classification of {term} in Motor Vehicle Traffic Crashes?"
    ),
    TaskType.EXAMPLES: "What are the Examples of {term} in Motor Vehicle Traffic Crashes?",
    TaskType.GUIDANCE: "How do you deal with {term}?",
}

_HEADERS = ("TERM", "KIND", "SOURCE")


def parse_guidebook(text: str) -> list[GuidebookEntry]:
    """Parse entry blocks out of ``text``.

    Structural problems (missing header, unknown kind or source) raise
    ``ParseError`` naming the 1-based block; content problems (empty term or
    body, generated source) are aggregated into one ``DataError``.
    """
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in text.split("\n"):
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)

    entries: list[GuidebookEntry] = []
    violations: list[str] = []
    for block_number, lines in enumerate(blocks, start=1):
        headers: dict[str, str] = {}
        body_lines: list[str] = []
        for line in lines:
            matched = False
            if not body_lines:
                for name in _HEADERS:
                    prefix = name + ":"
                    if line.startswith(prefix):
                        if name in headers:
                            raise ParseError(
                                f"block {block_number}: duplicate {name} header",
                                unit="block",
                                index=block_number,
                            )
                        headers[name] = line[len(prefix):].strip()
                        matched = True
                        break
            if not matched:
                body_lines.append(line)
        for name in _HEADERS:
            if name not in headers:
                raise ParseError(
                    f"block {block_number}: missing {name} header",
                    unit="block",
                    index=block_number,
                )
        try:
            kind = TaskType(headers["KIND"])
        except ValueError:
            raise ParseError(
                f"block {block_number}: unknown KIND {headers['KIND']!r}",
                unit="block",
                index=block_number,
            )
        try:
            source = SourceTag(headers["SOURCE"])
        except ValueError:
            raise ParseError(
                f"block {block_number}: unknown SOURCE {headers['SOURCE']!r}",
                unit="block",
                index=block_number,
            )
        term = headers["TERM"]
        body = "\n".join(line.rstrip() for line in body_lines).strip()
        if not term:
            violations.append(f"block {block_number}: empty term")
        if not body:
            violations.append(f"block {block_number}: empty body")
        if source is SourceTag.GENERATED:
            violations.append(
                f"block {block_number}: source must be a human corpus, got GENERATED"
            )
        entries.append(GuidebookEntry(term=term, kind=kind, body=body, source=source))
    if violations:
        raise DataError(f"{len(violations)} invalid entr(y/ies)", violations)
    return entries


def template_question(
    term: str,
    kind: TaskType,
    templates: Mapping[TaskType, str] | None = None,
) -> str:
    """Render the question asked about ``term`` for the given task kind."""
    table = QUESTION_TEMPLATES if templates is None else templates
    template = table.get(kind)
    if template is None:
        raise ConfigError(f"no question template for task kind {kind!r}")
    return template.format(term=term)


def entries_to_records(
    entries,
    personas: Mapping[SourceTag, str] | None = None,
    templates: Mapping[TaskType, str] | None = None,
) -> list[InstructionRecord]:
    """Convert parsed entries into instruction records (provenance HUMAN).

    Ids are content hashes, so re-ingesting the same material yields the
    same ids. A missing persona for a source that occurs raises ConfigError.
    """
    persona_map = DEFAULT_PERSONAS if personas is None else personas
    records: list[InstructionRecord] = []
    occurrences: dict[tuple, int] = {}
    for entry in entries:
        persona = persona_map.get(entry.source)
        if persona is None:
            raise ConfigError(f"no persona configured for source {entry.source.value}")
        question = template_question(entry.term, entry.kind, templates)
        content_key = (persona, question, entry.body, entry.kind, entry.source)
        occurrence = occurrences.get(content_key, 0)
        occurrences[content_key] = occurrence + 1
        records.append(
            InstructionRecord(
                id=record_id(
                    persona,
                    question,
                    entry.body,
                    entry.kind,
                    entry.source,
                    Provenance.HUMAN,
                    occurrence=occurrence,
                ),
                instruction=persona,
                input=question,
                output=entry.body,
                task_type=entry.kind,
                source=entry.source,
                provenance=Provenance.HUMAN,
            )
        )
    return records
