"""Trapped-period counts, Birkhoff averages along schedules, the historic gap
and the empirical certificate for condition (H).

``N_nu(omega, U; n)`` counts the ``j in [0, n-1]`` with ``j >= nu`` whose last
``nu + 1`` driver iterates all lie in ``U``. A run of consecutive members
``[a, b]`` contributes ``max(0, b - (a + nu) + 1)``, which is how every
run-length input is counted here.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .blocks import ItineraryBlock, check_u128
from .bowen import MAX_J, BowenDriver, crossing_times, predicted_constants
from .circle import ObservableSpec, in_i0, phi0_array
from .cocycle import NDS, BirkhoffAccumulator, iterate_blocks, iterate_naive
from .drivers import _check_target, driver_kappas
from .newhouse import NewhouseDriver, birkhoff_closed_form, trapped_count

# ---------------------------------------------------------------------------
# trapped-period counting


@dataclass(frozen=True)
class TrappedCount:
    nu: int
    target: str
    delta: float | None
    checkpoints: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        for n, c in zip(self.checkpoints, self.counts):
            if c > max(0, n - self.nu):
                raise ValueError(f"count {c} exceeds n - nu at n = {n}")

    def ratios(self) -> list[float]:
        return [c / n if n else 0.0 for n, c in zip(self.checkpoints, self.counts)]


def runs_of(membership: Sequence[bool]) -> list[tuple[int, int]]:
    """Maximal runs ``[a, b]`` (inclusive) of true entries."""
    m = np.asarray(membership, dtype=bool)
    if m.size == 0:
        return []
    edges = np.diff(np.concatenate([[0], m.view(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def count_trapped_runs(runs: Iterable[tuple[int, int]], nu: int, n: int) -> int:
    """``N_nu`` up to ``n`` from inclusive member runs ``[a, b]``."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    total = 0
    for a, b in runs:
        total += max(0, min(b, n - 1) - (a + nu) + 1)
    return total


def count_trapped(membership: Sequence[bool], nu: int, n: int | None = None) -> int:
    """``N_nu`` for an explicit membership string ``U``-visits at times 0, 1, ..."""
    if n is None:
        n = len(membership)
    if n < 1:
        raise ValueError("n must be at least 1")
    return count_trapped_runs(runs_of(membership[:n]), nu, n)


def count_trapped_blocks(
    blocks: Iterable[ItineraryBlock], target: str, checkpoints: Sequence[int], nu: int = 0,
    delta: float | None = None,
) -> TrappedCount:
    """Counts at each checkpoint from a block stream whose ``trapped`` flags
    already encode ``nu`` (as produced by the Bowen itinerary)."""
    _check_target(target)
    cps = sorted(set(checkpoints))
    counts = []
    total = 0
    ci = 0
    for b in blocks:
        while ci < len(cps) and cps[ci] <= b.start:
            counts.append(total)
            ci += 1
        if ci == len(cps):
            break
        if b.trapped and b.label == target:
            total += b.length
            # checkpoints falling inside this block
            while ci < len(cps) and cps[ci] < b.stop:
                counts.append(total - (b.stop - cps[ci]))
                ci += 1
    counts += [total] * (len(cps) - ci)
    return TrappedCount(nu, target, delta, tuple(cps), tuple(counts))


# ---------------------------------------------------------------------------
# Birkhoff averages


def control_orbit(nds: NDS, kappas: np.ndarray, x: float) -> np.ndarray:
    """Orbit ``x_0 .. x_{n-1}`` on ``I0`` as a first-order linear filter.

    ``x_{j+1} = x_j / 2 + 1/4 + eps * kappa_j`` for ``j < n - 1``.
    """
    n = len(kappas)
    if n == 0:
        return np.empty(0)
    drive = np.empty(n)
    drive[0] = x
    drive[1:] = 0.25 + nds.epsilon * kappas[:-1]
    return lfilter([1.0], [1.0, -0.5], drive)


def _bowen_horizon(driver: BowenDriver, n: int) -> int:
    """Smallest ``J`` whose itinerary reaches integer time ``n``."""
    sched = crossing_times(driver.params, MAX_J)
    for j in range(1, MAX_J + 1):
        if sched.times[2 * j] >= n:
            return j
    raise ValueError(f"checkpoint {n} lies beyond the Bowen precision budget")


def birkhoff_sums(
    nds: NDS,
    driver,
    x: float,
    checkpoints: Sequence[int],
    observable: Callable[[float], float] | None = None,
    state=None,
) -> list[BirkhoffAccumulator]:
    """``sum_{j<n} phi(x_j)`` at each checkpoint, as exact+float accumulators.

    Bowen orbits run on the run-length itinerary, Newhouse orbits use the
    closed form, and other drivers are stepped in a vectorised pass (or one
    step at a time when ``x`` is outside ``I0``).
    """
    if observable is None:
        observable = ObservableSpec.from_noise(nds.epsilon)
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps:
        return []
    if cps[0] < 1:
        raise ValueError("checkpoints must be positive")
    for c in cps:
        check_u128(c, "checkpoint")
    if isinstance(driver, BowenDriver):
        if state is not None:
            raise ValueError("Bowen orbits start at the driver's initial state")
        J = _bowen_horizon(driver, cps[-1])
        blocks = driver.blocks(driver.params.box_half_width, J)
        _, _, recs = iterate_blocks(nds, blocks, x, observable, cps)
        return [r.birkhoff for r in recs]
    if isinstance(driver, NewhouseDriver):
        if state is not None:
            raise ValueError("Newhouse orbits start at the driver's initial state")
        return birkhoff_closed_form(nds, observable, driver.params, x, cps)
    if state is None:
        state = driver.initial_state()
    if not in_i0(x) or not isinstance(observable, ObservableSpec):
        rec = iterate_naive(replace(nds, driver=driver), state, x, cps[-1], cps, observable)
        return [BirkhoffAccumulator(c, approx=s) for c, s in zip(cps, rec.sums)]
    orbit = control_orbit(nds, driver_kappas(driver, state, cps[-1]), x)
    sums = np.cumsum(phi0_array(observable, orbit))
    return [BirkhoffAccumulator(c, approx=float(sums[c - 1])) for c in cps]


def birkhoff_at(nds: NDS, driver, x: float, checkpoints: Sequence[int], observable=None,
                state=None) -> list[float]:
    """Running averages ``(1/n) sum_{j<n} phi(x_j)`` at sorted checkpoints."""
    return [acc.average() for acc in birkhoff_sums(nds, driver, x, checkpoints, observable, state)]


def control_drift(nds: NDS, driver, x: float, n: int, state=None, observable=None) -> float:
    """``|avg(n/2) - avg(n)|``: a convergence probe for non-historic drivers."""
    a, b = birkhoff_at(nds, driver, x, [n // 2, n], observable, state)
    return abs(a - b)


# ---------------------------------------------------------------------------
# gap and condition (H)


@dataclass(frozen=True)
class GapReport:
    sup_estimate: float
    inf_estimate: float
    gap: float
    predicted_gap: float | None = None
    averages_n1: tuple[float, ...] = ()
    averages_n2: tuple[float, ...] = ()

    @property
    def historic(self) -> bool:
        """Whether the measured gap is at least the predicted gap less 0.05."""
        if self.predicted_gap is None or self.predicted_gap <= 0:
            return False
        return self.gap >= self.predicted_gap - 0.05


def gap_estimate(averages_n1: Sequence[float], averages_n2: Sequence[float],
                 predicted_gap: float | None = None) -> GapReport:
    """Gap between the averages at the last point of each schedule family.

    The larger of the two final averages is reported as the sup estimate,
    so the gap is nonnegative whichever family carries the larger limit.
    """
    if len(averages_n1) < 3 or len(averages_n2) < 3:
        raise ValueError("need at least three points in each schedule family")
    a, b = averages_n1[-1], averages_n2[-1]
    hi, lo = max(a, b), min(a, b)
    return GapReport(hi, lo, hi - lo, predicted_gap, tuple(averages_n1), tuple(averages_n2))


@dataclass(frozen=True)
class ConditionHCertificate:
    certified: bool
    reason: str
    lambda1: float | None = None
    lambda2: float | None = None
    n1: tuple[int, ...] = ()
    n2: tuple[int, ...] = ()
    ratios_n1: tuple[tuple[float, float], ...] = ()  # (p, phat) at each n1(J)
    ratios_n2: tuple[tuple[float, float], ...] = ()
    tolerance: float = 0.02
    nu: int = 0
    delta: float | None = None

    @property
    def predicted_gap(self) -> float | None:
        if self.lambda1 is None:
            return None
        return abs(self.lambda2 - self.lambda1)


def _schedule_ratios(driver, nu: int, delta: float | None, n1: list[int], n2: list[int]):
    """Trapped ratios ``(p, phat)`` at every ``n1(J)`` and ``n2(J)``."""
    cps = sorted(set(n1) | set(n2))
    if isinstance(driver, NewhouseDriver):
        table = {n: (trapped_count(driver.params, nu, n, "p"),
                     trapped_count(driver.params, nu, n, "phat")) for n in cps}
    else:
        J = len(n2)
        counts = [
            count_trapped_blocks(driver.blocks(delta, J, nu), t, cps, nu, delta).counts
            for t in ("p", "phat")
        ]
        table = {n: (cp, cq) for n, cp, cq in zip(cps, *counts)}
    def ratio(n):
        cp, cq = table[n]
        return cp / n, cq / n

    return [ratio(n) for n in n1], [ratio(n) for n in n2]


def condition_H_estimate(driver, nu: int, delta: float | None, J_max: int,
                         tolerance: float = 0.02, settle: int = 3) -> ConditionHCertificate:
    """Empirical certificate for condition (H).

    Ratios ``N_nu / n`` are evaluated at every schedule point. The certificate
    is issued when the last ``settle`` points of both families lie within
    ``tolerance`` of ``(1 - lambda_i, lambda_i)`` and ``lambda1 != lambda2``.
    Drivers without schedules get an explicit refusal.
    """
    if isinstance(driver, BowenDriver):
        pc = predicted_constants(driver.params)
        lam1, lam2 = pc.lambda1, pc.lambda2
        if delta is None:
            raise ValueError("the Bowen certificate needs a neighbourhood size delta")
    elif isinstance(driver, NewhouseDriver):
        z0 = driver.params.z0
        lam1, lam2 = 1.0 / (z0 + 1), 1.0 / (z0 + 2)
    else:
        return ConditionHCertificate(False, f"{type(driver).__name__} provides no schedules; "
                                            "no certificate issued", nu=nu, delta=delta)
    n1, n2 = driver.schedules(J_max)
    if not n1 or not n2:
        return ConditionHCertificate(False, "schedule too short", lam1, lam2, nu=nu, delta=delta)
    r1, r2 = _schedule_ratios(driver, nu, delta, n1, n2)

    def close(rs, lam):
        tail = rs[-settle:]
        return all(abs(p - (1 - lam)) <= tolerance and abs(q - lam) <= tolerance for p, q in tail)

    if lam1 == lam2:
        ok, reason = False, "lambda1 == lambda2; certificate void"
    elif not close(r1, lam1):
        ok, reason = False, "ratios along n1(J) do not settle at (1 - lambda1, lambda1)"
    elif not close(r2, lam2):
        ok, reason = False, "ratios along n2(J) do not settle at (1 - lambda2, lambda2)"
    else:
        ok, reason = True, "ratios settle at the predicted splittings"
    return ConditionHCertificate(ok, reason, lam1, lam2, tuple(n1), tuple(n2), tuple(r1),
                                 tuple(r2), tolerance, nu, delta)
