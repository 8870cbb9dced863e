"""Composition of fiber maps along a driver orbit.

``F(n, omega, x) = f_{theta^{n-1} omega} o ... o f_omega (x)``, evaluated
either step by step or over a run-length itinerary. On ``I0`` a fiber map
is ``x -> x/2 + 1/4 + epsilon * kappa``, so ``m`` steps with constant
``kappa`` have the closed form ``X + 2**-m (x - X)`` with ``X`` the fixed
point; that is what makes ~1e15-step orbits affordable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import math

from .blocks import ItineraryBlock, check_u128
from .circle import (
    FiberMap,
    ObservableSpec,
    UnperturbedMap,
    circle_dist,
    f0_eval,
    fixed_point,
    in_i0,
    project,
)

NAIVE_BUDGET = 10**7
# 2**-60 is below the double-precision spacing at scale 1/2: past this many
# steps a constant-kappa run sits on its fixed point to machine precision.
EXPLICIT_PREFIX = 60


@dataclass(frozen=True)
class NDS:
    """Nonautonomous system induced by ``f0 + epsilon * kappa`` over a driver."""

    map: UnperturbedMap
    epsilon: float
    driver: object = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.125:
            raise ValueError(f"epsilon must lie in (0, 1/8), got {self.epsilon}")

    def apply(self, kappa: float, x: float) -> float:
        return project(f0_eval(self.map, x) + self.epsilon * kappa)

    def fiber(self, kappa: float) -> FiberMap:
        return FiberMap(self.epsilon, kappa)


@dataclass
class BirkhoffAccumulator:
    """Running sum of an observable split into an exact rational part (run
    lengths times observable values at fixed points) and a bounded float
    part (explicitly stepped points)."""

    steps: int = 0
    exact: Fraction = field(default_factory=Fraction)
    approx: float = 0.0

    def add(self, value: float) -> None:
        self.approx += value
        self.steps += 1

    def add_run(self, value: float, count: int) -> None:
        self.exact += Fraction(value) * count
        self.steps += count

    def __add__(self, other: "BirkhoffAccumulator") -> "BirkhoffAccumulator":
        return BirkhoffAccumulator(
            self.steps + other.steps, self.exact + other.exact, self.approx + other.approx
        )

    def scaled(self, times: int) -> "BirkhoffAccumulator":
        """Sum of ``times`` copies (associative merge repeated)."""
        return BirkhoffAccumulator(self.steps * times, self.exact * times, self.approx * times)

    def copy(self) -> "BirkhoffAccumulator":
        return BirkhoffAccumulator(self.steps, self.exact, self.approx)

    @property
    def total(self) -> float:
        return float(self.exact) + self.approx

    def average(self) -> float:
        if self.steps == 0:
            raise ZeroDivisionError("empty Birkhoff sum")
        return float(self.exact / self.steps) + self.approx / self.steps


@dataclass(frozen=True)
class OrbitRecord:
    checkpoints: tuple[int, ...]
    points: tuple[float, ...]
    sums: tuple[float, ...]
    step_count: int
    kappas: tuple[float, ...] = ()
    final_state: object = None


def iterate_naive(
    nds: NDS,
    omega_state,
    x: float,
    n: int,
    checkpoints: Sequence[int] | None = None,
    observable: Callable[[float], float] | None = None,
    trace: bool = False,
) -> OrbitRecord:
    """Left-to-right fold of the fiber maps, one step at a time.

    With ``trace=True`` every point ``x_0 .. x_n`` and every kappa used are
    kept; otherwise points (and Birkhoff sums, when an observable is given)
    are recorded at ``checkpoints`` (default: ``[n]``).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > NAIVE_BUDGET:
        raise ValueError(f"naive stepping budget is {NAIVE_BUDGET} steps, got {n}")
    driver = nds.driver
    cps = sorted(set(checkpoints)) if checkpoints is not None else [n]
    if cps and (cps[0] < 0 or cps[-1] > n):
        raise ValueError("checkpoints must lie in [0, n]")
    m, eps = nds.map, nds.epsilon
    points, sums, kappas = [], [], []
    total = 0.0
    s = omega_state
    ci = 0
    for j in range(n + 1):
        if trace:
            points.append(x)
        while ci < len(cps) and cps[ci] == j:
            if not trace:
                points.append(x)
            sums.append(total)
            ci += 1
        if j == n:
            break
        if observable is not None:
            total += observable(x)
        k = driver.kappa(s)
        if trace:
            kappas.append(k)
        x = project(f0_eval(m, x) + eps * k)
        s = driver.step(s)
    return OrbitRecord(
        checkpoints=tuple(range(n + 1)) if trace else tuple(cps),
        points=tuple(points),
        sums=tuple(sums),
        step_count=n,
        kappas=tuple(kappas),
        final_state=s,
    )


def run_constant(nds: NDS, x: float, kappa: float, m: int, acc: BirkhoffAccumulator | None,
                 observable: Callable[[float], float] | None) -> float:
    """Advance ``m`` steps with constant ``kappa`` from ``x`` in ``I0``.

    The first ``min(m, 60)`` steps are explicit; the rest use the closed form
    and add ``observable(X) * (m - 60)`` exactly to the accumulator.
    """
    prefix = min(m, EXPLICIT_PREFIX)
    mp_, eps = nds.map, nds.epsilon
    for _ in range(prefix):
        if acc is not None:
            acc.add(observable(x))
        x = project(f0_eval(mp_, x) + eps * kappa)
    rest = m - prefix
    if rest:
        fp = fixed_point(FiberMap(eps, kappa))
        if acc is not None:
            acc.add_run(observable(fp), rest)
        x = fp + math.ldexp(x - fp, -rest) if rest < 2000 else fp
    return x


@dataclass(frozen=True)
class BlockCheckpoint:
    n: int
    point: float
    birkhoff: BirkhoffAccumulator


def iterate_blocks(
    nds: NDS,
    blocks: Iterable[ItineraryBlock],
    x: float,
    observable: Callable[[float], float] | None = None,
    checkpoints: Sequence[int] = (),
) -> tuple[float, BirkhoffAccumulator, list[BlockCheckpoint]]:
    """Evaluate the orbit over a run-length itinerary.

    Consumes ``blocks`` until the stream ends or, when ``checkpoints`` are
    given, until the last checkpoint is reached (so infinite streams are
    fine). Returns the final point, the Birkhoff accumulator and a snapshot
    at every checkpoint.
    """
    if not in_i0(x):
        raise ValueError(f"block acceleration needs a start point in I0 = [1/4, 3/4], got {x}")
    acc = BirkhoffAccumulator()
    cps = sorted(set(checkpoints))
    records: list[BlockCheckpoint] = []
    pos, ci = 0, 0

    def flush():
        nonlocal ci
        while ci < len(cps) and cps[ci] == pos:
            records.append(BlockCheckpoint(pos, x, acc.copy()))
            ci += 1

    flush()
    for block in blocks:
        if cps and ci == len(cps):
            break
        remaining = block.length
        while remaining:
            r = remaining
            if ci < len(cps) and cps[ci] - pos < r:
                r = cps[ci] - pos
            x = run_constant(nds, x, block.kappa, r, acc if observable else None, observable)
            pos += r
            remaining -= r
            flush()
            if cps and ci == len(cps):
                break
    if ci < len(cps):
        raise ValueError(f"checkpoint {cps[ci]} lies beyond the itinerary ({pos} steps)")
    check_u128(pos)
    return x, acc, records


def unit_blocks(driver, state, n: int) -> list[ItineraryBlock]:
    """Itinerary of ``n`` unit blocks read off a driver by stepping."""
    out = []
    for j in range(n):
        out.append(ItineraryBlock("transit", driver.kappa(state), 1, j))
        state = driver.step(state)
    return out


def lemma1_check(nds: NDS, omega_state, x: float, kappa_prime: float, n: int,
                 slack: float = 1e-12) -> tuple[float, float, bool]:
    """Distance of ``F(n, omega, x)`` to the fixed point for ``kappa_prime``
    against ``2**-n + 6 eps max_j |kappa(theta^j omega) - kappa_prime|``."""
    if not in_i0(x):
        raise ValueError("x must lie in I0")
    if n > 10**4:
        raise ValueError("n must be at most 1e4")
    rec = iterate_naive(nds, omega_state, x, n, trace=True)
    target = fixed_point(FiberMap(nds.epsilon, kappa_prime))
    lhs = circle_dist(rec.points[-1], target)
    spread = max((abs(k - kappa_prime) for k in rec.kappas), default=0.0)
    rhs = 2.0**-n + 6.0 * nds.epsilon * spread
    return lhs, rhs, lhs <= rhs + slack


def trapped_implies_V(
    nds: NDS,
    observable: ObservableSpec,
    orbit_points: Sequence[float],
    trapped_indices: Iterable[int],
    target: str,
) -> bool:
    """Whether every orbit point at a trapped time lies within
    ``(2/3) rho0`` of the target's fixed point (vacuously true if none)."""
    centre = observable.x_p if target == "p" else observable.x_phat
    bound = 2.0 * observable.rho0 / 3.0 + 1e-12
    return all(circle_dist(orbit_points[j], centre) <= bound for j in trapped_indices)
