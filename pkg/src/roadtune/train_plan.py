"""Layer-freeze planning and fine-tune configuration emission.

A model is described by a layer manifest: one line per layer with name,
kind (embedding, block, norm, head), parameter count, and a content
checksum. Plans freeze everything except the last N transformer blocks
(optionally also training the head and the final norm), and a before/after
manifest comparison verifies that training touched only what the plan
allows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields, replace
from enum import Enum
from typing import Mapping

from .errors import InvalidArgumentError, InvalidManifestError, ParseError

__all__ = [
    "LayerKind",
    "LayerEntry",
    "LayerManifest",
    "FreezePolicy",
    "FreezePlan",
    "TrainConfig",
    "FreezeStatus",
    "FreezeReport",
    "load_manifest",
    "save_manifest",
    "plan_freeze",
    "emit_config",
    "serialize_config",
    "verify_freeze",
]


class LayerKind(str, Enum):
    EMBEDDING = "embedding"
    BLOCK = "block"
    NORM = "norm"
    HEAD = "head"


@dataclass(frozen=True)
class LayerEntry:
    name: str
    kind: LayerKind
    param_count: int
    checksum: str


@dataclass(frozen=True)
class LayerManifest:
    """Ordered layer descriptions with unique names."""

    entries: tuple[LayerEntry, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for entry in self.entries:
            if not entry.name:
                raise InvalidArgumentError("layer name must be non-empty")
            if entry.name in seen:
                raise InvalidArgumentError(f"duplicate layer name {entry.name!r}")
            seen.add(entry.name)
            if entry.param_count < 0:
                raise InvalidArgumentError(
                    f"layer {entry.name!r} has negative param_count {entry.param_count}"
                )

    def names(self) -> tuple[str, ...]:
        return tuple(entry.name for entry in self.entries)

    def by_name(self) -> dict[str, LayerEntry]:
        return {entry.name: entry for entry in self.entries}


def load_manifest(path) -> LayerManifest:
    """Read a manifest file: ``name kind param_count checksum`` per line.

    Blank lines and ``#`` comments are skipped.
    """
    entries: list[LayerEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    for line_number, line in enumerate(content.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 4:
            raise ParseError(
                f"line {line_number}: expected 4 fields (name kind param_count checksum), "
                f"got {len(parts)}",
                index=line_number,
            )
        name, kind_label, count_text, checksum = parts
        try:
            kind = LayerKind(kind_label)
        except ValueError:
            raise ParseError(
                f"line {line_number}: unknown layer kind {kind_label!r}", index=line_number
            )
        try:
            param_count = int(count_text)
        except ValueError:
            raise ParseError(
                f"line {line_number}: param_count must be an integer, got {count_text!r}",
                index=line_number,
            )
        try:
            int(checksum, 16)
        except ValueError:
            raise ParseError(
                f"line {line_number}: checksum must be hexadecimal, got {checksum!r}",
                index=line_number,
            )
        entries.append(LayerEntry(name, kind, param_count, checksum))
    try:
        return LayerManifest(entries=tuple(entries))
    except InvalidArgumentError as exc:
        raise ParseError(str(exc)) from exc


def save_manifest(manifest: LayerManifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in manifest.entries:
            fh.write(f"{entry.name} {entry.kind.value} {entry.param_count} {entry.checksum}\n")


@dataclass(frozen=True)
class FreezePolicy:
    """Train only the last ``last_blocks`` transformer blocks.

    ``include_head`` and ``include_final_norm`` extend the trainable set.
    """

    last_blocks: int = 2
    include_head: bool = False
    include_final_norm: bool = False

    def __post_init__(self):
        if self.last_blocks < 1:
            raise InvalidArgumentError(f"last_blocks must be >= 1, got {self.last_blocks}")


@dataclass(frozen=True)
class FreezePlan:
    """Partition of the manifest into trainable and frozen layer names."""

    trainable: tuple[str, ...]
    frozen: tuple[str, ...]
    trainable_param_count: int
    warnings: tuple[str, ...] = ()


def plan_freeze(manifest: LayerManifest, policy: FreezePolicy) -> FreezePlan:
    """Apply a freeze policy to a manifest.

    A manifest without block layers is unusable. Asking for more blocks
    than exist trains all blocks and records a warning rather than failing.
    """
    blocks = [entry for entry in manifest.entries if entry.kind is LayerKind.BLOCK]
    if not blocks:
        raise InvalidManifestError("manifest contains no block layers")
    warnings: list[str] = []
    take = policy.last_blocks
    if take > len(blocks):
        warnings.append(
            f"policy asks for last {take} blocks but manifest has only {len(blocks)}; "
            "training all blocks"
        )
        take = len(blocks)
    trainable_names = {entry.name for entry in blocks[-take:]}
    if policy.include_head:
        trainable_names.update(
            entry.name for entry in manifest.entries if entry.kind is LayerKind.HEAD
        )
    if policy.include_final_norm:
        norms = [entry for entry in manifest.entries if entry.kind is LayerKind.NORM]
        if norms:
            trainable_names.add(norms[-1].name)
    trainable = tuple(e.name for e in manifest.entries if e.name in trainable_names)
    frozen = tuple(e.name for e in manifest.entries if e.name not in trainable_names)
    param_count = sum(e.param_count for e in manifest.entries if e.name in trainable_names)
    return FreezePlan(
        trainable=trainable,
        frozen=frozen,
        trainable_param_count=param_count,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class TrainConfig:
    """Fine-tune settings; defaults mirror the training run being packaged."""

    batch_size: int = 16
    learning_rate: float = 2e-5
    epochs: int = 3
    max_sequence_length: int = 152
    warmup_ratio: float = 0.03
    weight_decay: float = 0.0
    trainable_layers: tuple[str, ...] = ()
    frozen_layers: tuple[str, ...] = ()

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise InvalidArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.max_sequence_length < 1:
            raise InvalidArgumentError(
                f"max_sequence_length must be >= 1, got {self.max_sequence_length}"
            )
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise InvalidArgumentError(
                f"warmup_ratio must be within [0, 1], got {self.warmup_ratio}"
            )
        if self.weight_decay < 0:
            raise InvalidArgumentError(f"weight_decay must be >= 0, got {self.weight_decay}")
        overlap = set(self.trainable_layers) & set(self.frozen_layers)
        if overlap:
            raise InvalidArgumentError(
                f"layers cannot be both trainable and frozen: {sorted(overlap)}"
            )


def emit_config(plan: FreezePlan, overrides: Mapping[str, object] | None = None) -> TrainConfig:
    """Build a TrainConfig from a plan, with optional field overrides.

    Unknown override keys are rejected so typos cannot silently fall back
    to defaults.
    """
    config = TrainConfig(trainable_layers=plan.trainable, frozen_layers=plan.frozen)
    if overrides:
        known = {f.name for f in dataclass_fields(TrainConfig)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown config override(s): {unknown}")
        config = replace(config, **dict(overrides))
    return config


def serialize_config(config: TrainConfig) -> str:
    """Deterministic JSON text for a TrainConfig (stable key order)."""
    obj = {
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "max_sequence_length": config.max_sequence_length,
        "warmup_ratio": config.warmup_ratio,
        "weight_decay": config.weight_decay,
        "trainable_layers": list(config.trainable_layers),
        "frozen_layers": list(config.frozen_layers),
    }
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


class FreezeStatus(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    WARN = "WARN"


@dataclass(frozen=True)
class FreezeReport:
    status: FreezeStatus
    changed_frozen: tuple[str, ...]
    changed_trainable: tuple[str, ...]
    message: str


def verify_freeze(
    before: LayerManifest, after: LayerManifest, plan: FreezePlan
) -> FreezeReport:
    """Compare checksums across a training run against the plan.

    FAIL if any frozen layer changed (those layers are named), WARN if no
    trainable layer changed either way, PASS otherwise. Manifests must list
    the same layers in the same order.
    """
    if before.names() != after.names():
        raise InvalidArgumentError(
            "before/after manifests must list the same layers in the same order"
        )
    after_sums = {entry.name: entry.checksum for entry in after.entries}
    changed = [
        entry.name
        for entry in before.entries
        if entry.checksum != after_sums[entry.name]
    ]
    frozen_set = set(plan.frozen)
    trainable_set = set(plan.trainable)
    changed_frozen = tuple(name for name in changed if name in frozen_set)
    changed_trainable = tuple(name for name in changed if name in trainable_set)
    if changed_frozen:
        return FreezeReport(
            status=FreezeStatus.FAIL,
            changed_frozen=changed_frozen,
            changed_trainable=changed_trainable,
            message=f"frozen layer(s) changed: {', '.join(changed_frozen)}",
        )
    if not changed_trainable:
        return FreezeReport(
            status=FreezeStatus.WARN,
            changed_frozen=(),
            changed_trainable=(),
            message="no trainable layer changed; training may not have run",
        )
    return FreezeReport(
        status=FreezeStatus.PASS,
        changed_frozen=(),
        changed_trainable=changed_trainable,
        message=f"{len(changed_trainable)} trainable layer(s) changed, frozen layers intact",
    )
