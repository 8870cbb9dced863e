"""Run-length encoded itineraries over integer time."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

UINT128_MAX = (1 << 128) - 1


class PrecisionBudgetError(OverflowError):
    """A time or step count left the exactly representable budget."""


def check_u128(value: int, what: str = "step count") -> int:
    if not 0 <= value <= UINT128_MAX:
        raise PrecisionBudgetError(f"{what} {value} does not fit in 128 bits")
    return value


@dataclass(frozen=True)
class ItineraryBlock:
    """``length`` consecutive integer times starting at ``start`` with constant
    ``kappa``.

    ``label`` is ``"p"``, ``"phat"`` or ``"transit"``. ``in_window`` marks
    blocks whose every time lies in the delta-neighborhood of ``label``;
    ``trapped`` marks blocks whose every time is in a nu-trapped period.
    """

    label: str
    kappa: float
    length: int
    start: int = 0
    in_window: bool = False
    trapped: bool = False

    @property
    def stop(self) -> int:
        return self.start + self.length

    def split(self, r: int) -> tuple["ItineraryBlock", "ItineraryBlock"]:
        if not 0 <= r <= self.length:
            raise ValueError(f"split point {r} outside block of length {self.length}")
        head = ItineraryBlock(self.label, self.kappa, r, self.start, self.in_window, self.trapped)
        tail = ItineraryBlock(
            self.label, self.kappa, self.length - r, self.start + r, self.in_window, self.trapped
        )
        return head, tail


def trapped_run(window_start, window_end, nu: int, lo: int | None = None, hi: int | None = None):
    """Integer times of a nu-trapped run inside a continuous-time window.

    Integer ``j`` is trapped when ``j - nu, ..., j`` all lie in
    ``[window_start, window_end]``; ``lo``/``hi`` optionally clip to an
    inclusive integer range. Returns ``(first, last)`` or ``None``.
    """
    import math

    a = math.ceil(window_start)
    b = math.floor(window_end)
    if lo is not None:
        a = max(a, lo)
    if hi is not None:
        b = min(b, hi)
    first = max(a + nu, nu)
    if first > b:
        return None
    return first, b


def expand(blocks: Iterable[ItineraryBlock], limit: int | None = None) -> Iterator[ItineraryBlock]:
    """Unit-length view of a block stream, optionally truncated at ``limit`` steps."""
    n = 0
    for b in blocks:
        for i in range(b.length):
            if limit is not None and n >= limit:
                return
            yield ItineraryBlock(b.label, b.kappa, 1, b.start + i, b.in_window, b.trapped)
            n += 1
