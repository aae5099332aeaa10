"""Few-shot expansion of the seed dataset through a chat endpoint.

Each request shows the endpoint ``seed_count`` existing records in an
Instruction/Input/Output block layout and asks for new ones in the same
shape. Responses are parsed back into blocks, near-duplicates are filtered
by longest-common-subsequence similarity of the input field, and accepted
records join the dataset until the target count is reached or the request
budget runs out.

Runs are reproducible: seed selection rotates deterministically with the
request index, responses are consumed in request order even when several
requests are in flight, and accepted ids are content hashes.
"""

from __future__ import annotations

import logging
import re
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass

from .chat import ChatClient, ChatEndpointConfig, Transport
from .dataset import InstructionRecord, Provenance, SourceTag, record_id
from .errors import EndpointError, GenerationShortfallError, InvalidArgumentError
from .metrics import rouge_l
from .pacing import RetryPolicy
from .text_norm import tokenize

__all__ = [
    "GenerationConfig",
    "CandidateRecord",
    "ParsedGenerations",
    "DedupResult",
    "DEFAULT_DIRECTIVE",
    "DEFAULT_SYSTEM_MESSAGE",
    "build_prompt",
    "parse_generations",
    "dedup_filter",
    "generate_dataset",
]

logger = logging.getLogger(__name__)

DEFAULT_SYSTEM_MESSAGE = (
    "You are helping build an instruction dataset about road traffic safety."
)

DEFAULT_DIRECTIVE = (
    "Write new Instruction/Input/Output examples about transportation safety "
    "in the same format, one block per example. Make each example distinct "
    "from the ones above."
)


@dataclass(frozen=True)
class GenerationConfig:
    """Pipeline settings.

    ``max_requests`` caps total endpoint calls; None means ten per target
    record. ``dedup_threshold`` is the similarity (0-100) at or above which
    a candidate is considered a near-duplicate and rejected.
    """

    target_count: int
    seed_count: int = 3
    temperature: float = 1.0
    max_in_flight: int = 2
    dedup_threshold: float = 70.0
    max_attempts: int = 3
    backoff_base: float = 0.5
    max_requests: int | None = None

    def __post_init__(self):
        if self.target_count < 1:
            raise InvalidArgumentError(f"target_count must be >= 1, got {self.target_count}")
        if self.seed_count < 1:
            raise InvalidArgumentError(f"seed_count must be >= 1, got {self.seed_count}")
        if not 0.0 < self.dedup_threshold <= 100.0:
            raise InvalidArgumentError(
                f"dedup_threshold must be in (0, 100], got {self.dedup_threshold}"
            )
        if self.max_in_flight < 1:
            raise InvalidArgumentError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.temperature < 0.0:
            raise InvalidArgumentError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_attempts < 1:
            raise InvalidArgumentError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.max_requests is not None and self.max_requests < 1:
            raise InvalidArgumentError(f"max_requests must be >= 1, got {self.max_requests}")

    @property
    def request_budget(self) -> int:
        return self.max_requests if self.max_requests is not None else 10 * self.target_count


@dataclass(frozen=True)
class CandidateRecord:
    """One parsed block from an endpoint response, before dedup."""

    instruction: str
    input: str
    output: str
    raw_excerpt: str = ""


@dataclass(frozen=True)
class ParsedGenerations:
    candidates: list[CandidateRecord]
    dropped: int


@dataclass(frozen=True)
class DedupResult:
    accepted: list[CandidateRecord]
    rejected: list[CandidateRecord]


def build_prompt(seeds, k: int, directive: str = DEFAULT_DIRECTIVE) -> str:
    """Render the first ``k`` seed records as few-shot blocks plus the ask."""
    seeds = list(seeds)
    if not 1 <= k <= len(seeds):
        raise InvalidArgumentError(
            f"k must be between 1 and the number of seeds ({len(seeds)}), got {k}"
        )
    blocks = []
    for seed in seeds[:k]:
        blocks.append(
            f"Instruction: {seed.instruction}\nInput: {seed.input}\nOutput: {seed.output}"
        )
    return "\n\n".join(blocks) + "\n\n" + directive


_FIELD_LINE = re.compile(
    r"^\s*(?:[-*]\s*|\d+[.)]\s*)?(instruction|input|output)\s*:\s*(.*)$",
    re.IGNORECASE,
)


def parse_generations(raw: str) -> ParsedGenerations:
    """Extract Instruction/Input/Output blocks from a model response.

    Field labels are matched case-insensitively and may carry list
    numbering. A block is complete once all three fields have non-empty
    text; incomplete blocks are dropped and counted, never raised.
    """
    candidates: list[CandidateRecord] = []
    dropped = 0
    fields: dict[str, str] = {}
    block_lines: list[str] = []
    active: str | None = None

    def flush():
        nonlocal dropped, fields, block_lines, active
        if fields:
            instruction = fields.get("instruction", "").strip()
            input_text = fields.get("input", "").strip()
            output_text = fields.get("output", "").strip()
            if instruction and input_text and output_text:
                excerpt = "\n".join(block_lines)[:500]
                candidates.append(
                    CandidateRecord(
                        instruction=instruction,
                        input=input_text,
                        output=output_text,
                        raw_excerpt=excerpt,
                    )
                )
            else:
                dropped += 1
        fields = {}
        block_lines = []
        active = None

    for line in raw.split("\n"):
        matched = _FIELD_LINE.match(line)
        if matched:
            name = matched.group(1).lower()
            if name == "instruction" and fields:
                flush()
            fields[name] = matched.group(2)
            active = name
            block_lines.append(line)
        elif line.strip():
            if active is not None:
                fields[active] = fields[active] + "\n" + line.strip()
                block_lines.append(line)
        else:
            active = None
    flush()
    if dropped:
        logger.warning("dropped %d incomplete generation block(s)", dropped)
    return ParsedGenerations(candidates=candidates, dropped=dropped)


def dedup_filter(candidates, pool, threshold: float) -> DedupResult:
    """Split candidates into accepted/rejected by input-field similarity.

    A candidate is rejected when the longest-common-subsequence F1 between
    its input and any pool record's input (or any already-accepted
    candidate's input) reaches ``threshold``. Comparison is on normalized
    tokens.
    """
    if not 0.0 < threshold <= 100.0:
        raise InvalidArgumentError(f"threshold must be in (0, 100], got {threshold}")
    pool_tokens = [tokenize(record.input) for record in pool]
    accepted: list[CandidateRecord] = []
    rejected: list[CandidateRecord] = []
    for candidate in candidates:
        candidate_tokens = tokenize(candidate.input)
        duplicate = False
        for existing in pool_tokens:
            if rouge_l(candidate_tokens, existing).f1 >= threshold:
                duplicate = True
                break
        if duplicate:
            rejected.append(candidate)
        else:
            accepted.append(candidate)
            pool_tokens.append(candidate_tokens)
    return DedupResult(accepted=accepted, rejected=rejected)


def _seed_window(seeds, request_index: int, k: int):
    start = (request_index * k) % len(seeds)
    return [seeds[(start + j) % len(seeds)] for j in range(k)]


def generate_dataset(
    seeds,
    config: GenerationConfig,
    endpoint: ChatEndpointConfig,
    transport: Transport | None = None,
    system_message: str = DEFAULT_SYSTEM_MESSAGE,
    directive: str = DEFAULT_DIRECTIVE,
    sleep=time.sleep,
) -> list[InstructionRecord]:
    """Run the expansion loop until ``target_count`` records are accepted.

    Accepted records carry the generated source/provenance pair and inherit
    the task type of the first seed shown in their prompt. Exhausting the
    request budget first raises ``GenerationShortfallError`` with the
    records accepted so far attached.
    """
    seeds = list(seeds)
    if not seeds:
        raise InvalidArgumentError("at least one seed record is required")
    if config.seed_count > len(seeds):
        raise InvalidArgumentError(
            f"seed_count {config.seed_count} exceeds available seeds ({len(seeds)})"
        )
    client = ChatClient(
        endpoint,
        transport=transport,
        retry=RetryPolicy(max_attempts=config.max_attempts, backoff_base=config.backoff_base),
        sleep=sleep,
    )
    target = config.target_count
    budget = config.request_budget
    accepted: list[InstructionRecord] = []
    accepted_ids: set[str] = set()
    issued = 0

    def request(index: int) -> str:
        prompt = build_prompt(_seed_window(seeds, index, config.seed_count), config.seed_count, directive)
        return client.complete(system_message, prompt, temperature=config.temperature)

    try:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            pending: dict[int, Future] = {}
            while len(accepted) < target and (pending or issued < budget):
                while (
                    issued < budget
                    and len(pending) < config.max_in_flight
                    and len(accepted) < target
                ):
                    pending[issued] = pool.submit(request, issued)
                    issued += 1
                index = min(pending)
                raw = pending.pop(index).result()
                parsed = parse_generations(raw)
                window = _seed_window(seeds, index, config.seed_count)
                result = dedup_filter(
                    parsed.candidates, list(seeds) + list(accepted), config.dedup_threshold
                )
                for candidate in result.accepted:
                    if len(accepted) >= target:
                        break
                    new_id = record_id(
                        candidate.instruction,
                        candidate.input,
                        candidate.output,
                        window[0].task_type,
                        SourceTag.GENERATED,
                        Provenance.MODEL_GENERATED,
                    )
                    if new_id in accepted_ids:
                        continue
                    accepted.append(
                        InstructionRecord(
                            id=new_id,
                            instruction=candidate.instruction,
                            input=candidate.input,
                            output=candidate.output,
                            task_type=window[0].task_type,
                            source=SourceTag.GENERATED,
                            provenance=Provenance.MODEL_GENERATED,
                        )
                    )
                logger.info(
                    "request %d: %d candidate(s), %d accepted so far",
                    index,
                    len(parsed.candidates),
                    len(accepted),
                )
    except EndpointError as exc:
        exc.partial = list(accepted)
        raise
    if len(accepted) < target:
        raise GenerationShortfallError(
            f"accepted {len(accepted)} of {target} requested records "
            f"within {budget} request(s)",
            accepted=list(accepted),
        )
    return accepted
