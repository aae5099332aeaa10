"""Retry and rate-limit plumbing shared by every remote client.

Clocks and sleep functions are injectable so tests can run instantly and
assert on the exact delays that would have been slept.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import InvalidArgumentError

__all__ = ["RetryPolicy", "TokenBucket", "call_with_retries", "ordered_window_map"]

T = TypeVar("T")
U = TypeVar("U")


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff schedule: base, base*factor, base*factor^2, ...

    ``max_attempts`` counts the first try, so 3 attempts sleep at most twice.
    No jitter: reproducibility matters more here than thundering-herd
    avoidance.
    """

    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise InvalidArgumentError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.backoff_base < 0 or self.backoff_factor <= 0:
            raise InvalidArgumentError("backoff parameters must be non-negative")

    def delay_before_attempt(self, attempt: int) -> float:
        """Delay slept before retry number ``attempt`` (2-based)."""
        return self.backoff_base * self.backoff_factor ** (attempt - 2)


def call_with_retries(
    fn: Callable[[], T],
    policy: RetryPolicy,
    retryable: tuple[type[BaseException], ...],
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Run ``fn``, retrying on ``retryable`` exceptions per ``policy``.

    The final failure propagates unchanged.
    """
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return fn()
        except retryable:
            if attempt == policy.max_attempts:
                raise
            sleep(policy.delay_before_attempt(attempt + 1))
    raise AssertionError("unreachable")


class TokenBucket:
    """Thread-safe request pacing at ``rate_per_minute`` with a small burst.

    ``acquire`` blocks (via the injected sleep) until a token is available.
    Sleeping happens inside the lock on purpose: concurrent acquirers are
    then released one by one at the configured rate.
    """

    def __init__(
        self,
        rate_per_minute: float,
        burst: int = 1,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate_per_minute <= 0:
            raise InvalidArgumentError(f"rate_per_minute must be positive, got {rate_per_minute}")
        if burst < 1:
            raise InvalidArgumentError(f"burst must be >= 1, got {burst}")
        self._rate = rate_per_minute / 60.0
        self._burst = float(burst)
        self._clock = clock
        self._sleep = sleep
        self._tokens = float(burst)
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            self._tokens = min(self._burst, self._tokens + (now - self._stamp) * self._rate)
            self._stamp = now
            if self._tokens < 1.0:
                wait = (1.0 - self._tokens) / self._rate
                self._sleep(wait)
                self._stamp = self._clock()
                self._tokens = 1.0
            self._tokens -= 1.0


def ordered_window_map(
    fn: Callable[[U], T],
    inputs: Sequence[U],
    max_in_flight: int,
) -> list[T]:
    """Apply ``fn`` concurrently with a bounded window, preserving order.

    At most ``max_in_flight`` calls are outstanding at once and results are
    consumed strictly in input order, so failures surface at a deterministic
    index. The first exception propagates after outstanding calls finish.
    """
    if max_in_flight < 1:
        raise InvalidArgumentError(f"max_in_flight must be >= 1, got {max_in_flight}")
    results: list[T] = []
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        pending: dict[int, Future] = {}
        issued = 0
        while issued < len(inputs) or pending:
            while issued < len(inputs) and len(pending) < max_in_flight:
                pending[issued] = pool.submit(fn, inputs[issued])
                issued += 1
            index = min(pending)
            results.append(pending.pop(index).result())
    return results
