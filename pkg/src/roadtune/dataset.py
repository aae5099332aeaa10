"""Instruction-record schema, validation, serialization, and splits.

The native on-disk form is "record lines": one UTF-8 JSON object per line
with exactly the fields id, instruction, input, output, task_type, source,
provenance, LF line endings, written in a fixed key order so that
save -> load -> save reproduces the file byte for byte.

Plain instruction files (a JSON array of bare instruction/input/output
triples, as distributed with most instruction-tuning datasets) can be
loaded by supplying defaults for the three missing fields.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .errors import DataError, InvalidArgumentError, ParseError

__all__ = [
    "TaskType",
    "SourceTag",
    "Provenance",
    "RECORD_FIELDS",
    "InstructionRecord",
    "RecordDefaults",
    "DatasetStats",
    "SplitResult",
    "record_id",
    "validate_record",
    "load_dataset",
    "save_dataset",
    "dumps_record",
    "dataset_stats",
    "split_dataset",
]


class TaskType(str, Enum):
    DEFINITION = "Definition"
    INCLUSIONS = "Inclusions"
    EXCLUSIONS = "Exclusions"
    CATEGORIES = "Categories"
    EXAMPLES = "Examples"
    GUIDANCE = "Guidance"


class SourceTag(str, Enum):
    MMUCC = "MMUCC"
    HSM = "HSM"
    GENERATED = "GENERATED"


class Provenance(str, Enum):
    HUMAN = "HUMAN"
    MODEL_GENERATED = "MODEL_GENERATED"


RECORD_FIELDS = ("id", "instruction", "input", "output", "task_type", "source", "provenance")


@dataclass(frozen=True)
class InstructionRecord:
    """One instruction-tuning row.

    The three label fields normally hold enum members; loaders keep
    unrecognized labels as raw strings so that validation can report them
    instead of crashing.
    """

    id: str
    instruction: str
    input: str
    output: str
    task_type: TaskType | str
    source: SourceTag | str
    provenance: Provenance | str


@dataclass(frozen=True)
class RecordDefaults:
    """Field values applied to every row of a bare-triple instruction file."""

    task_type: TaskType
    source: SourceTag
    provenance: Provenance


def record_id(
    instruction: str,
    input: str,
    output: str,
    task_type,
    source,
    provenance,
    occurrence: int = 0,
) -> str:
    """Deterministic id from record content.

    Identical content maps to the identical id on every run; ``occurrence``
    disambiguates repeated identical content within one collection.
    """
    parts = (
        instruction,
        input,
        output,
        _label(task_type),
        _label(source),
        _label(provenance),
    )
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()[:16]
    return digest if occurrence == 0 else f"{digest}-{occurrence}"


def _label(value) -> str:
    return value.value if isinstance(value, Enum) else str(value)


def _coerce(value: str, enum_cls):
    try:
        return enum_cls(value)
    except ValueError:
        return value


def validate_record(record: InstructionRecord) -> list[str]:
    """Return one message per contract violation; empty means valid."""
    violations: list[str] = []
    if not record.id:
        violations.append("empty-id")
    if not record.instruction.strip():
        violations.append("empty-instruction")
    if not record.input.strip():
        violations.append("empty-input")
    if not record.output.strip():
        violations.append("empty-output")
    if not isinstance(record.task_type, TaskType):
        violations.append(f"unknown-task-type: {record.task_type!r}")
    if not isinstance(record.source, SourceTag):
        violations.append(f"unknown-source: {record.source!r}")
    if not isinstance(record.provenance, Provenance):
        violations.append(f"unknown-provenance: {record.provenance!r}")
    if isinstance(record.source, SourceTag) and isinstance(record.provenance, Provenance):
        generated = record.source is SourceTag.GENERATED
        model_made = record.provenance is Provenance.MODEL_GENERATED
        if generated != model_made:
            violations.append(
                f"provenance-mismatch: source {record.source.value} "
                f"with provenance {record.provenance.value}"
            )
    return violations


def _validate_all(records: list[InstructionRecord]) -> None:
    violations: list[str] = []
    seen: dict[str, int] = {}
    for position, record in enumerate(records, start=1):
        for problem in validate_record(record):
            violations.append(f"record {position} (id {record.id!r}): {problem}")
        if record.id in seen:
            violations.append(
                f"record {position}: duplicate id {record.id!r} (first at record {seen[record.id]})"
            )
        else:
            seen[record.id] = position
    if violations:
        raise DataError(f"{len(violations)} validation problem(s)", violations)


def _record_from_object(obj: dict, line_number: int) -> InstructionRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"line {line_number}: expected a JSON object", index=line_number)
    keys = set(obj)
    expected = set(RECORD_FIELDS)
    if keys != expected:
        missing = sorted(expected - keys)
        extra = sorted(keys - expected)
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unexpected {extra}")
        raise ParseError(
            f"line {line_number}: wrong field set ({'; '.join(detail)})", index=line_number
        )
    for name in RECORD_FIELDS:
        if not isinstance(obj[name], str):
            raise ParseError(
                f"line {line_number}: field {name!r} must be a string", index=line_number
            )
    return InstructionRecord(
        id=obj["id"],
        instruction=obj["instruction"],
        input=obj["input"],
        output=obj["output"],
        task_type=_coerce(obj["task_type"], TaskType),
        source=_coerce(obj["source"], SourceTag),
        provenance=_coerce(obj["provenance"], Provenance),
    )


def _load_record_lines(path) -> list[InstructionRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    records: list[InstructionRecord] = []
    for line_number, line in enumerate(content.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {line_number}: invalid JSON ({exc.msg})", index=line_number)
        records.append(_record_from_object(obj, line_number))
    return records


def _load_instruction_array(path, defaults: RecordDefaults) -> list[InstructionRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", unit="element")
    if not isinstance(data, list):
        raise ParseError("instruction file must be a JSON array", unit="element")
    records: list[InstructionRecord] = []
    occurrences: Counter = Counter()
    for element_number, obj in enumerate(data, start=1):
        if not isinstance(obj, dict):
            raise ParseError(
                f"element {element_number}: expected an object", unit="element", index=element_number
            )
        keys = set(obj)
        if keys != {"instruction", "input", "output"}:
            raise ParseError(
                f"element {element_number}: expected exactly instruction/input/output keys, "
                f"got {sorted(keys)}",
                unit="element",
                index=element_number,
            )
        for name in ("instruction", "input", "output"):
            if not isinstance(obj[name], str):
                raise ParseError(
                    f"element {element_number}: field {name!r} must be a string",
                    unit="element",
                    index=element_number,
                )
        content_key = (obj["instruction"], obj["input"], obj["output"])
        occurrence = occurrences[content_key]
        occurrences[content_key] += 1
        records.append(
            InstructionRecord(
                id=record_id(
                    obj["instruction"],
                    obj["input"],
                    obj["output"],
                    defaults.task_type,
                    defaults.source,
                    defaults.provenance,
                    occurrence=occurrence,
                ),
                instruction=obj["instruction"],
                input=obj["input"],
                output=obj["output"],
                task_type=defaults.task_type,
                source=defaults.source,
                provenance=defaults.provenance,
            )
        )
    return records


def load_dataset(
    path,
    format: str = "record-lines",
    defaults: RecordDefaults | None = None,
) -> list[InstructionRecord]:
    """Load and validate a dataset file.

    ``format`` is "record-lines" or "instruction-array"; the latter requires
    ``defaults`` for the fields bare triples lack. Parse problems raise
    ``ParseError`` with the offending line/element; validation problems are
    aggregated into one ``DataError``.
    """
    if format == "record-lines":
        records = _load_record_lines(path)
    elif format == "instruction-array":
        if defaults is None:
            raise InvalidArgumentError("instruction-array format requires defaults")
        records = _load_instruction_array(path, defaults)
    else:
        raise InvalidArgumentError(f"unknown dataset format {format!r}")
    _validate_all(records)
    return records


def dumps_record(record: InstructionRecord) -> str:
    """Serialize one record to its canonical JSON line (no newline)."""
    obj = {
        "id": record.id,
        "instruction": record.instruction,
        "input": record.input,
        "output": record.output,
        "task_type": _label(record.task_type),
        "source": _label(record.source),
        "provenance": _label(record.provenance),
    }
    return json.dumps(obj, ensure_ascii=False)


def save_dataset(records, path) -> None:
    """Write records as canonical record lines (UTF-8, LF, fixed key order)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")


@dataclass(frozen=True)
class DatasetStats:
    """Count breakdowns; every breakdown sums to ``total``."""

    total: int
    by_source: dict[str, int]
    by_task_type: dict[str, int]
    by_provenance: dict[str, int]


def _breakdown(records, field_name: str, enum_cls) -> dict[str, int]:
    counts = {member.value: 0 for member in enum_cls}
    for record in records:
        label = _label(getattr(record, field_name))
        counts[label] = counts.get(label, 0) + 1
    return counts


def dataset_stats(records) -> DatasetStats:
    """Tally records by source, task type, and provenance."""
    records = list(records)
    return DatasetStats(
        total=len(records),
        by_source=_breakdown(records, "source", SourceTag),
        by_task_type=_breakdown(records, "task_type", TaskType),
        by_provenance=_breakdown(records, "provenance", Provenance),
    )


@dataclass(frozen=True)
class SplitResult:
    train: list[InstructionRecord]
    test: list[InstructionRecord]


def split_dataset(records, train_fraction: float, seed: int) -> SplitResult:
    """Deterministic train/test split, stratified by task type.

    Within each task type the train share is round(fraction * count), half
    rounding up. Both halves preserve the original record order.
    """
    records = list(records)
    if not records:
        raise InvalidArgumentError("cannot split an empty dataset")
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgumentError(
            f"train_fraction must be strictly between 0 and 1, got {train_fraction}"
        )
    groups: dict[str, list[int]] = {}
    for index, record in enumerate(records):
        groups.setdefault(_label(record.task_type), []).append(index)
    rng = random.Random(seed)
    train_indices: set[int] = set()
    for label in sorted(groups):
        indices = groups[label]
        shuffled = rng.sample(indices, len(indices))
        take = int(math.floor(train_fraction * len(indices) + 0.5))
        train_indices.update(shuffled[:take])
    train = [records[i] for i in range(len(records)) if i in train_indices]
    test = [records[i] for i in range(len(records)) if i not in train_indices]
    return SplitResult(train=train, test=test)
