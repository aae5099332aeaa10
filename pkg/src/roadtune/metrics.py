"""Reference-based text similarity metrics.

All scores live on a 0-100 scale except the learned pairwise score, which is
passed through on whatever scale its provider uses. Conventions that the
usual definitions leave open are pinned down here:

* Geometric-mean n-gram precision (``bleu``) averages only over orders the
  candidate actually has windows for, so a two-token candidate is judged on
  orders 1-2 rather than zeroed out by impossible 3- and 4-gram orders.
  Scoring any text against itself therefore yields exactly 100.
* With smoothing enabled, an order with zero matches contributes the
  configured epsilon as its precision instead of collapsing the product.
* Embedding-based precision/recall are clamped at 0 before scaling so every
  bounded score stays within [0, 100] even for adversarial embeddings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, ProviderError
from .providers import BleurtProvider, EmbeddingProvider, HashEmbeddingProvider
from .text_norm import NormalizationConfig, tokenize

__all__ = [
    "EPSILON_DEFAULT",
    "PrfTriple",
    "MetricConfig",
    "DEFAULT_METRIC_CONFIG",
    "EmbeddingMatrix",
    "encode_pair",
    "clipped_match_count",
    "bleu",
    "rouge_n",
    "rouge_l",
    "lcs_length",
    "bertscore",
    "word_count",
    "ScoreSet",
    "score_pair",
    "prf_to_dict",
    "prf_from_dict",
    "scoreset_to_dict",
    "scoreset_from_dict",
]

EPSILON_DEFAULT = 1e-9


@dataclass(frozen=True)
class PrfTriple:
    """Precision, recall, and their harmonic mean, each in [0, 100]."""

    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int | float, candidate_total: int, reference_total: int) -> "PrfTriple":
        precision = 100.0 * overlap / candidate_total if candidate_total > 0 else 0.0
        recall = 100.0 * overlap / reference_total if reference_total > 0 else 0.0
        return cls(precision, recall, _f1(precision, recall))

    @classmethod
    def zero(cls) -> "PrfTriple":
        return cls(0.0, 0.0, 0.0)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricConfig:
    """Settings shared by every metric in one scoring run.

    ``smoothing_epsilon=None`` turns smoothing off entirely.
    """

    max_n: int = 4
    smoothing_epsilon: float | None = EPSILON_DEFAULT
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)

    def __post_init__(self):
        if self.max_n < 1:
            raise InvalidArgumentError(f"max_n must be >= 1, got {self.max_n}")
        if self.smoothing_epsilon is not None and self.smoothing_epsilon <= 0:
            raise InvalidArgumentError("smoothing_epsilon must be positive or None")


DEFAULT_METRIC_CONFIG = MetricConfig()


class EmbeddingMatrix:
    """Token-aligned embedding rows, L2-normalized on construction.

    Row i embeds token i; cosine similarity between rows is then a plain dot
    product. Construction rejects shape mismatches and zero rows, which
    cannot be normalized.
    """

    __slots__ = ("tokens", "rows")

    def __init__(self, tokens, rows):
        self.tokens = tuple(tokens)
        matrix = np.asarray(rows, dtype=np.float64)
        if matrix.ndim != 2:
            raise InvalidArgumentError(f"embedding rows must be 2-D, got ndim={matrix.ndim}")
        if matrix.shape[0] != len(self.tokens):
            raise InvalidArgumentError(
                f"{len(self.tokens)} tokens but {matrix.shape[0]} embedding rows"
            )
        if matrix.shape[0] > 0 and matrix.shape[1] < 1:
            raise InvalidArgumentError("embedding dimension must be >= 1")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            raise InvalidArgumentError("embedding rows must have nonzero norm")
        self.rows = matrix / norms[:, None] if matrix.shape[0] else matrix

    @property
    def dim(self) -> int:
        return self.rows.shape[1] if self.rows.ndim == 2 else 0

    def __len__(self) -> int:
        return len(self.tokens)


def encode_pair(candidate, reference) -> tuple[np.ndarray, np.ndarray]:
    """Map two token sequences onto shared int64 ids for the kernels."""
    ids: dict[str, int] = {}
    c = np.empty(len(candidate), dtype=np.int64)
    for i, token in enumerate(candidate):
        c[i] = ids.setdefault(token, len(ids))
    r = np.empty(len(reference), dtype=np.int64)
    for i, token in enumerate(reference):
        r[i] = ids.setdefault(token, len(ids))
    return c, r


def clipped_match_count(candidate, reference, n: int) -> int:
    """Candidate n-gram occurrences matched in the reference, with each
    reference occurrence usable once (clipping)."""
    if n < 1:
        raise InvalidArgumentError(f"n-gram order must be >= 1, got {n}")
    c, r = encode_pair(candidate, reference)
    return int(kernels.clipped_matches(c, r, n))


def bleu(
    candidate,
    reference,
    max_n: int = 4,
    smoothing_epsilon: float | None = EPSILON_DEFAULT,
) -> float:
    """Geometric-mean clipped n-gram precision with a brevity penalty, 0-100.

    Orders run from 1 to min(max_n, len(candidate)). Without smoothing a
    zero-match order zeroes the score; with smoothing that order contributes
    ``smoothing_epsilon`` instead.
    """
    if max_n < 1:
        raise InvalidArgumentError(f"max_n must be >= 1, got {max_n}")
    candidate = tuple(candidate)
    reference = tuple(reference)
    if not reference:
        raise InvalidArgumentError("reference must be non-empty")
    if not candidate:
        return 0.0
    c, r = encode_pair(candidate, reference)
    top = min(max_n, len(candidate))
    matches = kernels.clipped_matches_upto(c, r, top)
    log_sum = 0.0
    for n in range(1, top + 1):
        total = len(candidate) - n + 1
        precision = matches[n - 1] / total
        if precision == 0.0:
            if smoothing_epsilon is None:
                return 0.0
            precision = smoothing_epsilon
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / top)
    if len(candidate) < len(reference):
        brevity = math.exp(1.0 - len(reference) / len(candidate))
    else:
        brevity = 1.0
    return 100.0 * brevity * geo_mean


def rouge_n(candidate, reference, n: int) -> PrfTriple:
    """Clipped n-gram overlap as precision/recall/F1; a side with no
    n-grams scores 0 on its own axis."""
    if n < 1:
        raise InvalidArgumentError(f"n-gram order must be >= 1, got {n}")
    candidate = tuple(candidate)
    reference = tuple(reference)
    candidate_total = max(0, len(candidate) - n + 1)
    reference_total = max(0, len(reference) - n + 1)
    if candidate_total == 0 or reference_total == 0:
        return PrfTriple.from_counts(0, candidate_total, reference_total)
    c, r = encode_pair(candidate, reference)
    overlap = int(kernels.clipped_matches(c, r, n))
    return PrfTriple.from_counts(overlap, candidate_total, reference_total)


def lcs_length(candidate, reference) -> int:
    """Length of the longest common subsequence of two token sequences."""
    c, r = encode_pair(tuple(candidate), tuple(reference))
    return int(kernels.lcs_length_ids(c, r))


def rouge_l(candidate, reference) -> PrfTriple:
    """Longest-common-subsequence overlap as precision/recall/F1."""
    candidate = tuple(candidate)
    reference = tuple(reference)
    if not candidate or not reference:
        return PrfTriple.from_counts(0, len(candidate), len(reference))
    c, r = encode_pair(candidate, reference)
    overlap = int(kernels.lcs_length_ids(c, r))
    return PrfTriple.from_counts(overlap, len(candidate), len(reference))


def bertscore(candidate: EmbeddingMatrix, reference: EmbeddingMatrix) -> PrfTriple:
    """Greedy soft token matching on cosine similarity, scaled to 0-100.

    Precision averages each candidate token's best match in the reference;
    recall is the mirror image. Negative averages clamp to 0.
    """
    if len(candidate) == 0 or len(reference) == 0:
        raise InvalidArgumentError("bertscore requires non-empty matrices on both sides")
    if candidate.dim != reference.dim:
        raise InvalidArgumentError(
            f"embedding dimensions differ: {candidate.dim} vs {reference.dim}"
        )
    similarity = candidate.rows @ reference.rows.T
    precision = 100.0 * max(0.0, float(np.mean(similarity.max(axis=1))))
    recall = 100.0 * max(0.0, float(np.mean(similarity.max(axis=0))))
    return PrfTriple(precision, recall, _f1(precision, recall))


def word_count(text: str) -> int:
    """Whitespace-delimited chunk count of the raw text."""
    return len(text.split())


@dataclass(frozen=True)
class ScoreSet:
    """Every metric for one candidate/reference pair.

    ``bleurt`` is None when no pairwise score provider was configured;
    ``incomplete`` marks sets whose provider-backed fields are missing
    because the provider failed.
    """

    bleu: float
    rouge_1: PrfTriple
    rouge_2: PrfTriple
    rouge_l: PrfTriple
    bert: PrfTriple
    bleurt: float | None
    word_count: int
    incomplete: bool = False

    @classmethod
    def zero(cls) -> "ScoreSet":
        return cls(
            bleu=0.0,
            rouge_1=PrfTriple.zero(),
            rouge_2=PrfTriple.zero(),
            rouge_l=PrfTriple.zero(),
            bert=PrfTriple.zero(),
            bleurt=None,
            word_count=0,
        )


def prf_to_dict(triple: PrfTriple) -> dict:
    return {"precision": triple.precision, "recall": triple.recall, "f1": triple.f1}


def prf_from_dict(obj: dict) -> PrfTriple:
    return PrfTriple(
        precision=float(obj["precision"]),
        recall=float(obj["recall"]),
        f1=float(obj["f1"]),
    )


def scoreset_to_dict(scores: ScoreSet) -> dict:
    """JSON-ready dictionary form, stable key order."""
    return {
        "bleu": scores.bleu,
        "rouge_1": prf_to_dict(scores.rouge_1),
        "rouge_2": prf_to_dict(scores.rouge_2),
        "rouge_l": prf_to_dict(scores.rouge_l),
        "bert": prf_to_dict(scores.bert),
        "bleurt": scores.bleurt,
        "word_count": scores.word_count,
        "incomplete": scores.incomplete,
    }


def scoreset_from_dict(obj: dict) -> ScoreSet:
    return ScoreSet(
        bleu=float(obj["bleu"]),
        rouge_1=prf_from_dict(obj["rouge_1"]),
        rouge_2=prf_from_dict(obj["rouge_2"]),
        rouge_l=prf_from_dict(obj["rouge_l"]),
        bert=prf_from_dict(obj["bert"]),
        bleurt=None if obj["bleurt"] is None else float(obj["bleurt"]),
        word_count=int(obj["word_count"]),
        incomplete=bool(obj.get("incomplete", False)),
    )


_DEFAULT_EMBEDDINGS = HashEmbeddingProvider()


def score_pair(
    candidate: str,
    reference: str,
    config: MetricConfig = DEFAULT_METRIC_CONFIG,
    embeddings: EmbeddingProvider | None = None,
    bleurt: BleurtProvider | None = None,
) -> ScoreSet:
    """Score one candidate text against one reference text.

    The reference must contain at least one token. An empty candidate scores
    zero everywhere. If the embedding or pairwise provider fails, the error
    is re-raised with the partial ``ScoreSet`` (flagged incomplete) attached.
    """
    candidate_tokens = tokenize(candidate, config.normalization)
    reference_tokens = tokenize(reference, config.normalization)
    if not reference_tokens:
        raise InvalidArgumentError("reference must contain at least one token")

    words = word_count(candidate)
    if not candidate_tokens:
        return ScoreSet(
            bleu=0.0,
            rouge_1=rouge_n(candidate_tokens, reference_tokens, 1),
            rouge_2=rouge_n(candidate_tokens, reference_tokens, 2),
            rouge_l=rouge_l(candidate_tokens, reference_tokens),
            bert=PrfTriple.zero(),
            bleurt=None,
            word_count=words,
        )

    bleu_score = bleu(
        candidate_tokens, reference_tokens, config.max_n, config.smoothing_epsilon
    )
    rouge_1_score = rouge_n(candidate_tokens, reference_tokens, 1)
    rouge_2_score = rouge_n(candidate_tokens, reference_tokens, 2)
    rouge_l_score = rouge_l(candidate_tokens, reference_tokens)

    provider = embeddings if embeddings is not None else _DEFAULT_EMBEDDINGS
    try:
        candidate_matrix = EmbeddingMatrix(candidate_tokens, provider.embed(candidate_tokens))
        reference_matrix = EmbeddingMatrix(reference_tokens, provider.embed(reference_tokens))
        bert_score = bertscore(candidate_matrix, reference_matrix)
    except ProviderError as exc:
        exc.partial = ScoreSet(
            bleu=bleu_score,
            rouge_1=rouge_1_score,
            rouge_2=rouge_2_score,
            rouge_l=rouge_l_score,
            bert=PrfTriple.zero(),
            bleurt=None,
            word_count=words,
            incomplete=True,
        )
        raise

    bleurt_score: float | None = None
    if bleurt is not None:
        try:
            bleurt_score = bleurt.score([(candidate, reference)])[0]
        except ProviderError as exc:
            exc.partial = ScoreSet(
                bleu=bleu_score,
                rouge_1=rouge_1_score,
                rouge_2=rouge_2_score,
                rouge_l=rouge_l_score,
                bert=bert_score,
                bleurt=None,
                word_count=words,
                incomplete=True,
            )
            raise

    return ScoreSet(
        bleu=bleu_score,
        rouge_1=rouge_1_score,
        rouge_2=rouge_2_score,
        rouge_l=rouge_l_score,
        bert=bert_score,
        bleurt=bleurt_score,
        word_count=words,
    )
