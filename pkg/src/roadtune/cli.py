"""Command line entry point.

Subcommands cover the whole pipeline: ingest guidebooks, generate new
records through a chat endpoint (live or replayed from fixtures), inspect
and split datasets, score single pairs, run full evaluations, emit
layer-freeze training configs, and re-render saved reports.

Exit codes: 0 success, 1 data or validation problem, 2 endpoint or provider
failure, 3 bad invocation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone

from . import __version__
from .chat import ReplayTransport
from .config import AppConfig, load_app_config
from .dataset import (
    Provenance,
    RecordDefaults,
    SourceTag,
    TaskType,
    dataset_stats,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .errors import (
    ConfigError,
    DataError,
    EndpointError,
    GenerationShortfallError,
    InvalidArgumentError,
    ProviderError,
    RoadtuneError,
    TransientEndpointError,
)
from .generate import GenerationConfig, generate_dataset
from .harness import (
    HarnessConfig,
    collect_outputs,
    load_eval_items,
    load_system_outputs,
    render_report,
    report_from_dict,
    run_eval,
    save_system_outputs,
)
from .ingest import entries_to_records, parse_guidebook
from .metrics import score_pair, scoreset_to_dict
from .train_plan import (
    FreezePolicy,
    emit_config,
    load_manifest,
    plan_freeze,
    serialize_config,
    verify_freeze,
)

__all__ = ["main", "entry"]


class _UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # Raise instead of exiting so main() can map bad usage to exit code 3.
    def error(self, message):
        raise _UsageError(message, self.format_usage())


def _write_text(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_records(args, app: AppConfig):
    if args.input_format == "instruction-array":
        defaults = RecordDefaults(
            task_type=TaskType(args.default_task),
            source=SourceTag(args.default_source),
            provenance=Provenance(args.default_provenance),
        )
        return load_dataset(args.data, format="instruction-array", defaults=defaults)
    return load_dataset(args.data)


def _cmd_ingest(args, app: AppConfig) -> int:
    entries = []
    for path in args.guidebook:
        entries.extend(parse_guidebook(_read_text(path)))
    records = entries_to_records(entries)
    save_dataset(records, args.out)
    print(f"wrote {len(records)} record(s) to {args.out}")
    return 0


def _cmd_generate(args, app: AppConfig) -> int:
    seeds = load_dataset(args.seeds)
    config = GenerationConfig(
        target_count=args.target,
        seed_count=args.seed_count,
        temperature=args.temperature,
        max_in_flight=args.max_in_flight,
        dedup_threshold=args.threshold,
        max_requests=args.budget,
    )
    transport = ReplayTransport(args.replay) if args.replay else None
    try:
        records = generate_dataset(seeds, config, app.chat, transport=transport)
    except GenerationShortfallError as exc:
        if exc.accepted:
            save_dataset(exc.accepted, args.out)
        print(f"error: {exc}", file=sys.stderr)
        print(
            f"wrote {len(exc.accepted)} partial record(s) to {args.out}", file=sys.stderr
        )
        return 1
    save_dataset(records, args.out)
    print(f"accepted {len(records)} record(s); wrote {args.out}")
    return 0


def _cmd_stats(args, app: AppConfig) -> int:
    records = _load_records(args, app)
    stats = dataset_stats(records)
    if args.format == "json":
        obj = {
            "total": stats.total,
            "by_source": stats.by_source,
            "by_task_type": stats.by_task_type,
            "by_provenance": stats.by_provenance,
        }
        print(json.dumps(obj, indent=2, ensure_ascii=False))
    else:
        print(f"total records: {stats.total}")
        for title, counts in (
            ("by source", stats.by_source),
            ("by task type", stats.by_task_type),
            ("by provenance", stats.by_provenance),
        ):
            print(title)
            for label, count in counts.items():
                print(f"  {label}: {count}")
    return 0


def _cmd_split(args, app: AppConfig) -> int:
    records = load_dataset(args.data)
    result = split_dataset(records, args.fraction, args.seed)
    save_dataset(result.train, args.train_out)
    save_dataset(result.test, args.test_out)
    print(
        f"split {len(records)} record(s) into {len(result.train)} train / "
        f"{len(result.test)} test"
    )
    return 0


def _cmd_score(args, app: AppConfig) -> int:
    if (args.candidate is None) == (args.candidate_file is None):
        raise _UsageError("provide exactly one of --candidate / --candidate-file")
    if (args.reference is None) == (args.reference_file is None):
        raise _UsageError("provide exactly one of --reference / --reference-file")
    candidate = args.candidate if args.candidate is not None else _read_text(args.candidate_file)
    reference = args.reference if args.reference is not None else _read_text(args.reference_file)
    scores = score_pair(
        candidate,
        reference,
        app.metric_config,
        embeddings=app.build_embedding_provider(),
        bleurt=app.build_bleurt_provider(),
    )
    obj = scoreset_to_dict(scores)
    if args.format == "json":
        print(json.dumps(obj, indent=2, ensure_ascii=False))
    else:
        print(f"BLEU        {scores.bleu:.2f}")
        print(f"ROUGE-1     {scores.rouge_1.f1:.2f}")
        print(f"ROUGE-2     {scores.rouge_2.f1:.2f}")
        print(f"ROUGE-L     {scores.rouge_l.f1:.2f}")
        print(f"BERT-P      {scores.bert.precision:.2f}")
        print(f"BERT-R      {scores.bert.recall:.2f}")
        bleurt_text = "n/a" if scores.bleurt is None else f"{scores.bleurt:.2f}"
        print(f"BLEURT      {bleurt_text}")
        print(f"Word Count  {scores.word_count}")
    return 0


def _cmd_eval(args, app: AppConfig) -> int:
    items = load_eval_items(args.items)
    outputs = []
    for path in args.outputs or []:
        outputs.extend(load_system_outputs(path))
    if args.collect:
        transport = ReplayTransport(args.replay) if args.replay else None
        collected = collect_outputs(items, args.collect, app.chat, transport=transport)
        if args.collect_out:
            save_system_outputs(collected, args.collect_out)
        outputs.extend(collected)
    if not outputs:
        raise _UsageError("no system outputs: pass --outputs and/or --collect")
    by_system: dict[str, list] = {}
    for output in outputs:
        by_system.setdefault(output.system, []).append(output)
    config = HarnessConfig(
        metric_config=app.metric_config, strict_missing=args.strict_missing
    )
    generated_at = (
        datetime.now(timezone.utc).isoformat(timespec="seconds") if args.stamp else None
    )
    report = run_eval(
        items,
        by_system,
        config,
        embeddings=app.build_embedding_provider(),
        bleurt=app.build_bleurt_provider(),
        generated_at=generated_at,
    )
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _write_text(render_report(report, args.format), args.out)
    return 0


def _parse_overrides(pairs) -> dict:
    numeric_fields = {
        "batch_size": int,
        "epochs": int,
        "max_sequence_length": int,
        "learning_rate": float,
        "warmup_ratio": float,
        "weight_decay": float,
    }
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InvalidArgumentError(f"override must look like key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        key = key.strip()
        caster = numeric_fields.get(key)
        if caster is None:
            raise InvalidArgumentError(f"unknown config override(s): ['{key}']")
        try:
            overrides[key] = caster(raw)
        except ValueError:
            raise InvalidArgumentError(f"override {key} needs a {caster.__name__}, got {raw!r}")
    return overrides


def _cmd_trainplan(args, app: AppConfig) -> int:
    manifest = load_manifest(args.manifest)
    policy = FreezePolicy(
        last_blocks=args.last_blocks,
        include_head=args.include_head,
        include_final_norm=args.include_final_norm,
    )
    plan = plan_freeze(manifest, policy)
    for warning in plan.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.verify_after:
        after = load_manifest(args.verify_after)
        report = verify_freeze(manifest, after, plan)
        print(f"{report.status.value}: {report.message}")
        return 1 if report.status.value == "FAIL" else 0
    config = emit_config(plan, _parse_overrides(args.set))
    _write_text(serialize_config(config), args.out)
    if args.out and args.out != "-":
        print(
            f"planned {len(plan.trainable)} trainable / {len(plan.frozen)} frozen "
            f"layer(s); wrote {args.out}"
        )
    return 0


def _cmd_report(args, app: AppConfig) -> int:
    try:
        document = json.loads(_read_text(args.report))
    except json.JSONDecodeError as exc:
        raise DataError(f"report file is not valid JSON: {exc.msg}") from exc
    report = report_from_dict(document)
    _write_text(render_report(report, args.format), args.out)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="roadtune", description=__doc__)
    parser.add_argument("--version", action="version", version=f"roadtune {__version__}")
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--seed", type=int, default=0, help="random seed for split sampling")
    parser.add_argument(
        "--verbose", action="store_true", help="log progress details to stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turn guidebook entry files into a dataset")
    p.add_argument("--guidebook", action="append", required=True, help="entry-block file (repeatable)")
    p.add_argument("--out", required=True, help="output dataset path")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("generate", help="expand the dataset through a chat endpoint")
    p.add_argument("--seeds", required=True, help="seed dataset (record lines)")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--target", type=int, required=True, help="records to accept")
    p.add_argument("--replay", help="fixture file of recorded responses instead of live HTTP")
    p.add_argument("--seed-count", type=int, default=3, help="seed examples per prompt")
    p.add_argument("--threshold", type=float, default=70.0, help="near-duplicate similarity cutoff")
    p.add_argument("--max-in-flight", type=int, default=2, help="concurrent requests")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--budget", type=int, default=None, help="total request cap")
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("stats", help="count records by source, task type, provenance")
    p.add_argument("--data", required=True)
    p.add_argument(
        "--input-format",
        choices=["record-lines", "instruction-array"],
        default="record-lines",
    )
    p.add_argument("--default-task", default="Guidance", help="task type for bare triples")
    p.add_argument("--default-source", default="HSM", help="source for bare triples")
    p.add_argument("--default-provenance", default="HUMAN", help="provenance for bare triples")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--data", required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--fraction", type=float, default=0.8, help="train share, strictly in (0,1)")
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("score", help="score one candidate text against one reference")
    p.add_argument("--candidate")
    p.add_argument("--candidate-file")
    p.add_argument("--reference")
    p.add_argument("--reference-file")
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("eval", help="score answer sets and render the report")
    p.add_argument("--items", required=True, help="eval items file")
    p.add_argument("--outputs", action="append", help="system outputs file (repeatable)")
    p.add_argument("--collect", metavar="SYSTEM", help="collect answers from the chat endpoint under this system name")
    p.add_argument("--replay", help="fixture responses for --collect")
    p.add_argument("--collect-out", help="also save collected outputs here")
    p.add_argument(
        "--format",
        choices=["table-text", "comma-separated", "structured"],
        default="table-text",
    )
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--strict-missing", action="store_true", help="score unanswered items as zero")
    p.add_argument("--stamp", action="store_true", help="embed the current UTC time in report metadata")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("trainplan", help="emit a layer-freeze training config, or verify one")
    p.add_argument("--manifest", required=True, help="layer manifest file")
    p.add_argument("--last-blocks", type=int, default=2, help="trainable trailing blocks")
    p.add_argument("--include-head", action="store_true")
    p.add_argument("--include-final-norm", action="store_true")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
    p.add_argument("--out", help="write the config here instead of stdout")
    p.add_argument("--verify-after", metavar="MANIFEST", help="compare against a post-training manifest")
    p.set_defaults(handler=_cmd_trainplan)

    p = sub.add_parser("report", help="re-render a structured report document")
    p.add_argument("--report", required=True, help="structured report JSON file")
    p.add_argument(
        "--format",
        choices=["table-text", "comma-separated", "structured"],
        default="table-text",
    )
    p.add_argument("--out", help="write here instead of stdout")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        app = load_app_config(args.config)
        return args.handler(args, app)
    except _UsageError as exc:
        if exc.usage:
            print(exc.usage, file=sys.stderr, end="")
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DataError, InvalidArgumentError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, DataError):
            for violation in exc.violations[:50]:
                print(f"  - {violation}", file=sys.stderr)
        return 1
    except (EndpointError, TransientEndpointError, ProviderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RoadtuneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
