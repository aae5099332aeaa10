"""Text normalization and n-gram extraction.

All metrics operate on token sequences produced by :func:`tokenize`, so the
normalization rules here define what "the same word" means everywhere else:
NFC unicode normalization, lowercasing, splitting on unicode whitespace, and
detaching leading/trailing punctuation into standalone tokens.

Tokenization is idempotent over its own output: joining the tokens with
spaces and tokenizing again yields the same sequence.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass

from .errors import InvalidArgumentError

__all__ = [
    "NormalizationConfig",
    "DEFAULT_NORMALIZATION",
    "NGramMultiset",
    "tokenize",
    "ngrams",
]


@dataclass(frozen=True)
class NormalizationConfig:
    """Knobs for :func:`tokenize`.

    lowercase: fold case before splitting.
    unicode_nfc: apply canonical composition so visually identical text
        compares equal regardless of how it was encoded.
    detach_punctuation: split leading/trailing punctuation characters off
        each whitespace-delimited chunk as their own tokens. Internal
        punctuation (hyphens, apostrophes) stays attached.
    """

    lowercase: bool = True
    unicode_nfc: bool = True
    detach_punctuation: bool = True


DEFAULT_NORMALIZATION = NormalizationConfig()


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _split_chunk(chunk: str) -> list[str]:
    # Peel punctuation off both ends; whatever remains in the middle is one
    # token. A chunk that is entirely punctuation becomes one token per char.
    leading: list[str] = []
    trailing: list[str] = []
    start, end = 0, len(chunk)
    while start < end and _is_punct(chunk[start]):
        leading.append(chunk[start])
        start += 1
    while end > start and _is_punct(chunk[end - 1]):
        trailing.append(chunk[end - 1])
        end -= 1
    core = chunk[start:end]
    out = leading
    if core:
        out.append(core)
    out.extend(reversed(trailing))
    return out


def tokenize(text: str, config: NormalizationConfig = DEFAULT_NORMALIZATION) -> tuple[str, ...]:
    """Normalize ``text`` and split it into a tuple of tokens.

    Empty or whitespace-only input yields the empty tuple.
    """
    if config.unicode_nfc:
        text = unicodedata.normalize("NFC", text)
    if config.lowercase:
        text = text.lower()
    tokens: list[str] = []
    for chunk in text.split():
        if config.detach_punctuation:
            tokens.extend(_split_chunk(chunk))
        else:
            tokens.append(chunk)
    return tuple(tokens)


@dataclass(frozen=True)
class NGramMultiset:
    """Bag of order-``n`` windows of a token sequence, with multiplicities."""

    n: int
    counts: Counter

    def total(self) -> int:
        """Number of windows, i.e. max(0, len(sequence) - n + 1)."""
        return sum(self.counts.values())


def ngrams(tokens, n: int) -> NGramMultiset:
    """Collect the multiset of contiguous ``n``-token windows.

    A sequence shorter than ``n`` has no windows and yields an empty multiset.
    """
    if n < 1:
        raise InvalidArgumentError(f"n-gram order must be >= 1, got {n}")
    seq = tuple(tokens)
    counts = Counter(seq[i : i + n] for i in range(len(seq) - n + 1))
    return NGramMultiset(n=n, counts=counts)
