"""Side-by-side evaluation of answer sets against reference answers.

Items (question + reference answer, labeled with a task type) are scored
against each system's answers, means are taken per system and task type,
and the result renders as a fixed-layout text table, CSV, or a structured
JSON document. Rendering the same report twice produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from io import StringIO
from typing import Mapping, Sequence

from .chat import ChatClient, ChatEndpointConfig, Transport
from .dataset import TaskType
from .errors import DataError, EndpointError, InvalidArgumentError, ParseError
from .metrics import (
    MetricConfig,
    PrfTriple,
    ScoreSet,
    prf_from_dict,
    prf_to_dict,
    score_pair,
    scoreset_from_dict,
    scoreset_to_dict,
)
from .pacing import RetryPolicy
from .providers import BleurtProvider, EmbeddingProvider

__all__ = [
    "EvalItem",
    "SystemOutput",
    "HarnessConfig",
    "MeanScoreSet",
    "CellAggregate",
    "ReportMetadata",
    "EvalReport",
    "TASK_ORDER",
    "METRIC_ROWS",
    "ABSENT_MARKER",
    "aggregate",
    "run_eval",
    "render_report",
    "report_to_dict",
    "report_from_dict",
    "load_eval_items",
    "load_system_outputs",
    "save_system_outputs",
    "collect_outputs",
]

# Fixed presentation order for sections and rows.
TASK_ORDER: tuple[TaskType, ...] = (
    TaskType.DEFINITION,
    TaskType.INCLUSIONS,
    TaskType.EXCLUSIONS,
    TaskType.CATEGORIES,
    TaskType.EXAMPLES,
    TaskType.GUIDANCE,
)

SECTION_TITLES: dict[TaskType, str] = {
    TaskType.DEFINITION: "Definitions",
    TaskType.INCLUSIONS: "Inclusions",
    TaskType.EXCLUSIONS: "Exclusions",
    TaskType.CATEGORIES: "Categories",
    TaskType.EXAMPLES: "Examples",
    TaskType.GUIDANCE: "Guidance",
}

METRIC_ROWS = (
    "BLEU",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "BERT-P",
    "BERT-R",
    "BLEURT",
    "Word Count",
)

ABSENT_MARKER = "—"

RENDER_FORMATS = ("table-text", "comma-separated", "structured")


@dataclass(frozen=True)
class EvalItem:
    """One evaluation question with its reference answer."""

    id: str
    task_type: TaskType
    instruction: str
    input: str
    reference: str


@dataclass(frozen=True)
class SystemOutput:
    """One system's answer to one item."""

    item_id: str
    system: str
    text: str


@dataclass(frozen=True)
class HarnessConfig:
    """Evaluation settings.

    ``strict_missing`` scores unanswered items as zero instead of excluding
    them from the means.
    """

    metric_config: MetricConfig = field(default_factory=MetricConfig)
    strict_missing: bool = False
    max_workers: int = 4

    def __post_init__(self):
        if self.max_workers < 1:
            raise InvalidArgumentError(f"max_workers must be >= 1, got {self.max_workers}")


DEFAULT_HARNESS_CONFIG = HarnessConfig()


@dataclass(frozen=True)
class MeanScoreSet:
    """Arithmetic means of item-level scores, at full precision.

    ``bleurt`` averages only items that had a score; ``bleurt_count`` says
    how many that was. ``word_count`` stays fractional here; display
    rounding happens at render time.
    """

    bleu: float
    rouge_1: PrfTriple
    rouge_2: PrfTriple
    rouge_l: PrfTriple
    bert: PrfTriple
    bleurt: float | None
    bleurt_count: int
    word_count: float

    def word_count_rounded(self) -> int:
        return int(math.floor(self.word_count + 0.5))


def _mean(values) -> float:
    values = list(values)
    # fsum is exactly rounded, which keeps means independent of item order.
    return math.fsum(values) / len(values)


def _mean_triple(triples) -> PrfTriple:
    triples = list(triples)
    return PrfTriple(
        precision=_mean(t.precision for t in triples),
        recall=_mean(t.recall for t in triples),
        f1=_mean(t.f1 for t in triples),
    )


def aggregate(item_scores: Sequence[ScoreSet]) -> MeanScoreSet:
    """Field-wise arithmetic mean of a non-empty batch of score sets."""
    scores = list(item_scores)
    if not scores:
        raise InvalidArgumentError("cannot aggregate zero score sets")
    with_bleurt = [s.bleurt for s in scores if s.bleurt is not None]
    return MeanScoreSet(
        bleu=_mean(s.bleu for s in scores),
        rouge_1=_mean_triple(s.rouge_1 for s in scores),
        rouge_2=_mean_triple(s.rouge_2 for s in scores),
        rouge_l=_mean_triple(s.rouge_l for s in scores),
        bert=_mean_triple(s.bert for s in scores),
        bleurt=_mean(with_bleurt) if with_bleurt else None,
        bleurt_count=len(with_bleurt),
        word_count=_mean(float(s.word_count) for s in scores),
    )


@dataclass(frozen=True)
class CellAggregate:
    """Mean scores for one (system, task type) cell.

    ``scores`` is None when the system answered nothing in this cell.
    """

    scores: MeanScoreSet | None
    item_count: int
    missing_count: int


@dataclass(frozen=True)
class ReportMetadata:
    metric_config: dict
    dataset_digest: str
    generated_at: str | None = None


@dataclass(frozen=True)
class EvalReport:
    systems: tuple[str, ...]
    task_types: tuple[TaskType, ...]
    cells: dict[tuple[str, TaskType], CellAggregate]
    item_scores: dict[str, dict[str, ScoreSet]]
    metadata: ReportMetadata
    warnings: tuple[str, ...] = ()


def _dataset_digest(items: Sequence[EvalItem]) -> str:
    hasher = hashlib.sha256()
    for item in items:
        hasher.update(item.id.encode("utf-8"))
        hasher.update(b"\x1e")
        hasher.update(item.reference.encode("utf-8"))
        hasher.update(b"\x1f")
    return hasher.hexdigest()[:16]


def _validate_items(items: Sequence[EvalItem]) -> None:
    violations: list[str] = []
    seen: set[str] = set()
    for position, item in enumerate(items, start=1):
        if not item.id:
            violations.append(f"item {position}: empty id")
        elif item.id in seen:
            violations.append(f"item {position}: duplicate id {item.id!r}")
        else:
            seen.add(item.id)
        if not item.reference.strip():
            violations.append(f"item {position} (id {item.id!r}): empty reference")
        if not isinstance(item.task_type, TaskType):
            violations.append(
                f"item {position} (id {item.id!r}): unknown task type {item.task_type!r}"
            )
    if violations:
        raise DataError(f"{len(violations)} invalid eval item(s)", violations)


def run_eval(
    items: Sequence[EvalItem],
    outputs_by_system: Mapping[str, Sequence[SystemOutput]],
    config: HarnessConfig = DEFAULT_HARNESS_CONFIG,
    embeddings: EmbeddingProvider | None = None,
    bleurt: BleurtProvider | None = None,
    generated_at: str | None = None,
) -> EvalReport:
    """Score every system's answers and aggregate per system and task type.

    Answers referencing unknown item ids are a data error. Systems with no
    answers at all are dropped with a warning. Items a system left
    unanswered are excluded from that system's means and counted, unless
    ``strict_missing`` scores them as zero.
    """
    items = list(items)
    if not items:
        raise InvalidArgumentError("at least one eval item is required")
    _validate_items(items)
    by_id = {item.id: item for item in items}

    warnings: list[str] = []
    systems: list[str] = []
    answer_maps: dict[str, dict[str, str]] = {}
    for system, outputs in outputs_by_system.items():
        outputs = list(outputs)
        if not outputs:
            warnings.append(f"system {system!r} has no outputs; excluded")
            continue
        answers: dict[str, str] = {}
        problems: list[str] = []
        for output in outputs:
            if output.item_id not in by_id:
                problems.append(f"system {system!r}: unknown item id {output.item_id!r}")
            elif output.item_id in answers:
                problems.append(f"system {system!r}: duplicate answer for item {output.item_id!r}")
            else:
                answers[output.item_id] = output.text
        if problems:
            raise DataError(f"{len(problems)} invalid output(s)", problems)
        systems.append(system)
        answer_maps[system] = answers

    tasks = [(system, item) for system in systems for item in items if item.id in answer_maps[system]]

    def score_one(pair) -> ScoreSet:
        system, item = pair
        return score_pair(
            answer_maps[system][item.id],
            item.reference,
            config.metric_config,
            embeddings=embeddings,
            bleurt=bleurt,
        )

    item_scores: dict[str, dict[str, ScoreSet]] = {system: {} for system in systems}
    if tasks:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            futures = [pool.submit(score_one, task) for task in tasks]
            for (system, item), future in zip(tasks, futures):
                item_scores[system][item.id] = future.result()

    cells: dict[tuple[str, TaskType], CellAggregate] = {}
    for system in systems:
        for task_type in TASK_ORDER:
            task_items = [item for item in items if item.task_type is task_type]
            scored = [
                item_scores[system][item.id]
                for item in task_items
                if item.id in item_scores[system]
            ]
            missing = len(task_items) - len(scored)
            if config.strict_missing and missing:
                scored = scored + [ScoreSet.zero()] * missing
            cells[(system, task_type)] = CellAggregate(
                scores=aggregate(scored) if scored else None,
                item_count=len(scored),
                missing_count=missing,
            )

    metadata = ReportMetadata(
        metric_config={
            "max_n": config.metric_config.max_n,
            "smoothing_epsilon": config.metric_config.smoothing_epsilon,
            "strict_missing": config.strict_missing,
        },
        dataset_digest=_dataset_digest(items),
        generated_at=generated_at,
    )
    return EvalReport(
        systems=tuple(systems),
        task_types=TASK_ORDER,
        cells=cells,
        item_scores=item_scores,
        metadata=metadata,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Rendering.
# ---------------------------------------------------------------------------


def _cell_values(cell: CellAggregate) -> list[str]:
    if cell.scores is None:
        return [ABSENT_MARKER] * len(METRIC_ROWS)
    means = cell.scores
    return [
        f"{means.bleu:.2f}",
        f"{means.rouge_1.f1:.2f}",
        f"{means.rouge_2.f1:.2f}",
        f"{means.rouge_l.f1:.2f}",
        f"{means.bert.precision:.2f}",
        f"{means.bert.recall:.2f}",
        ABSENT_MARKER if means.bleurt is None else f"{means.bleurt:.2f}",
        str(means.word_count_rounded()),
    ]


def _render_table(report: EvalReport) -> str:
    label_width = max(
        len("Type of task"),
        max(len(SECTION_TITLES[t]) for t in report.task_types),
        max(len(row) for row in METRIC_ROWS),
    )
    columns: dict[str, list[str]] = {
        system: [
            value
            for task_type in report.task_types
            for value in _cell_values(report.cells[(system, task_type)])
        ]
        for system in report.systems
    }
    widths = {
        system: max(len(system), max((len(v) for v in columns[system]), default=0))
        for system in report.systems
    }
    lines: list[str] = []
    header = "Type of task".ljust(label_width)
    for system in report.systems:
        header += "  " + system.rjust(widths[system])
    lines.append(header.rstrip())
    row_cursor = 0
    for task_type in report.task_types:
        lines.append(SECTION_TITLES[task_type])
        for row_index, row_name in enumerate(METRIC_ROWS):
            line = row_name.ljust(label_width)
            for system in report.systems:
                line += "  " + columns[system][row_cursor + row_index].rjust(widths[system])
            lines.append(line.rstrip())
        row_cursor += len(METRIC_ROWS)
    missing_notes = [
        f"{system}: {total}"
        for system in report.systems
        if (
            total := sum(
                report.cells[(system, t)].missing_count for t in report.task_types
            )
        )
    ]
    if missing_notes:
        lines.append("")
        lines.append("Unanswered items " + ", ".join(missing_notes))
    return "\n".join(lines) + "\n"


def _render_csv(report: EvalReport) -> str:
    import csv

    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["task_type", "metric", *report.systems])
    for task_type in report.task_types:
        per_system = {
            system: _cell_values(report.cells[(system, task_type)])
            for system in report.systems
        }
        for row_index, row_name in enumerate(METRIC_ROWS):
            writer.writerow(
                [
                    task_type.value,
                    row_name,
                    *[per_system[system][row_index] for system in report.systems],
                ]
            )
    return buffer.getvalue()


def _means_to_dict(means: MeanScoreSet) -> dict:
    return {
        "bleu": means.bleu,
        "rouge_1": prf_to_dict(means.rouge_1),
        "rouge_2": prf_to_dict(means.rouge_2),
        "rouge_l": prf_to_dict(means.rouge_l),
        "bert": prf_to_dict(means.bert),
        "bleurt": means.bleurt,
        "bleurt_count": means.bleurt_count,
        "word_count": means.word_count,
    }


def _means_from_dict(obj: dict) -> MeanScoreSet:
    return MeanScoreSet(
        bleu=float(obj["bleu"]),
        rouge_1=prf_from_dict(obj["rouge_1"]),
        rouge_2=prf_from_dict(obj["rouge_2"]),
        rouge_l=prf_from_dict(obj["rouge_l"]),
        bert=prf_from_dict(obj["bert"]),
        bleurt=None if obj["bleurt"] is None else float(obj["bleurt"]),
        bleurt_count=int(obj["bleurt_count"]),
        word_count=float(obj["word_count"]),
    )


def report_to_dict(report: EvalReport) -> dict:
    """Full-fidelity dictionary form of a report (JSON-serializable)."""
    return {
        "systems": list(report.systems),
        "task_types": [t.value for t in report.task_types],
        "cells": [
            {
                "system": system,
                "task_type": task_type.value,
                "item_count": cell.item_count,
                "missing_count": cell.missing_count,
                "means": None if cell.scores is None else _means_to_dict(cell.scores),
            }
            for system in report.systems
            for task_type in report.task_types
            for cell in [report.cells[(system, task_type)]]
        ],
        "items": [
            {
                "system": system,
                "item_id": item_id,
                "scores": scoreset_to_dict(scores),
            }
            for system in report.systems
            for item_id, scores in report.item_scores[system].items()
        ],
        "warnings": list(report.warnings),
        "metadata": {
            "metric_config": report.metadata.metric_config,
            "dataset_digest": report.metadata.dataset_digest,
            "generated_at": report.metadata.generated_at,
        },
    }


def report_from_dict(obj: dict) -> EvalReport:
    """Rebuild a report from its dictionary form."""
    try:
        systems = tuple(obj["systems"])
        task_types = tuple(TaskType(t) for t in obj["task_types"])
        cells: dict[tuple[str, TaskType], CellAggregate] = {}
        for cell_obj in obj["cells"]:
            key = (cell_obj["system"], TaskType(cell_obj["task_type"]))
            cells[key] = CellAggregate(
                scores=(
                    None if cell_obj["means"] is None else _means_from_dict(cell_obj["means"])
                ),
                item_count=int(cell_obj["item_count"]),
                missing_count=int(cell_obj["missing_count"]),
            )
        item_scores: dict[str, dict[str, ScoreSet]] = {system: {} for system in systems}
        for item_obj in obj["items"]:
            item_scores[item_obj["system"]][item_obj["item_id"]] = scoreset_from_dict(
                item_obj["scores"]
            )
        metadata_obj = obj["metadata"]
        metadata = ReportMetadata(
            metric_config=dict(metadata_obj["metric_config"]),
            dataset_digest=str(metadata_obj["dataset_digest"]),
            generated_at=metadata_obj.get("generated_at"),
        )
        return EvalReport(
            systems=systems,
            task_types=task_types,
            cells=cells,
            item_scores=item_scores,
            metadata=metadata,
            warnings=tuple(obj.get("warnings", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report document: {exc}") from exc


def render_report(report: EvalReport, format: str = "table-text") -> str:
    """Render a report; identical reports render to identical bytes."""
    if format == "table-text":
        return _render_table(report)
    if format == "comma-separated":
        return _render_csv(report)
    if format == "structured":
        return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"
    raise InvalidArgumentError(
        f"unknown report format {format!r}; expected one of {RENDER_FORMATS}"
    )


# ---------------------------------------------------------------------------
# File formats and endpoint collection.
# ---------------------------------------------------------------------------

_ITEM_FIELDS = ("id", "task_type", "instruction", "input", "reference")
_OUTPUT_FIELDS = ("item_id", "system", "text")


def load_eval_items(path) -> list[EvalItem]:
    """Read eval items: one JSON object per line with the item fields."""
    items: list[EvalItem] = []
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    for line_number, line in enumerate(content.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {line_number}: invalid JSON ({exc.msg})", index=line_number)
        if not isinstance(obj, dict) or set(obj) != set(_ITEM_FIELDS):
            raise ParseError(
                f"line {line_number}: expected exactly fields {list(_ITEM_FIELDS)}",
                index=line_number,
            )
        try:
            task_type = TaskType(obj["task_type"])
        except ValueError:
            raise ParseError(
                f"line {line_number}: unknown task type {obj['task_type']!r}",
                index=line_number,
            )
        items.append(
            EvalItem(
                id=obj["id"],
                task_type=task_type,
                instruction=obj["instruction"],
                input=obj["input"],
                reference=obj["reference"],
            )
        )
    _validate_items(items)
    return items


def load_system_outputs(path) -> list[SystemOutput]:
    """Read system outputs: one JSON object per line with the output fields."""
    outputs: list[SystemOutput] = []
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    for line_number, line in enumerate(content.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {line_number}: invalid JSON ({exc.msg})", index=line_number)
        if not isinstance(obj, dict) or set(obj) != set(_OUTPUT_FIELDS):
            raise ParseError(
                f"line {line_number}: expected exactly fields {list(_OUTPUT_FIELDS)}",
                index=line_number,
            )
        outputs.append(SystemOutput(item_id=obj["item_id"], system=obj["system"], text=obj["text"]))
    return outputs


def save_system_outputs(outputs: Sequence[SystemOutput], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for output in outputs:
            fh.write(
                json.dumps(
                    {"item_id": output.item_id, "system": output.system, "text": output.text},
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def collect_outputs(
    items: Sequence[EvalItem],
    system_name: str,
    endpoint: ChatEndpointConfig,
    transport: Transport | None = None,
    retry: RetryPolicy = RetryPolicy(),
    max_in_flight: int = 2,
    sleep=time.sleep,
) -> list[SystemOutput]:
    """Ask the chat endpoint to answer every item, in item order.

    At most ``max_in_flight`` requests are outstanding and responses are
    consumed in item order. On a terminal endpoint failure the outputs
    collected so far ride along on the raised error.
    """
    items = list(items)
    if max_in_flight < 1:
        raise InvalidArgumentError(f"max_in_flight must be >= 1, got {max_in_flight}")
    client = ChatClient(endpoint, transport=transport, retry=retry, sleep=sleep)
    collected: list[SystemOutput] = []
    try:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            pending: dict[int, Future] = {}
            issued = 0
            while issued < len(items) or pending:
                while issued < len(items) and len(pending) < max_in_flight:
                    item = items[issued]
                    pending[issued] = pool.submit(client.complete, item.instruction, item.input)
                    issued += 1
                index = min(pending)
                text = pending.pop(index).result()
                collected.append(
                    SystemOutput(item_id=items[index].id, system=system_name, text=text)
                )
    except EndpointError as exc:
        exc.partial = list(collected)
        raise
    return collected
