"""Symbolic driver realising the itinerary of a Newhouse diffeomorphism.

Block ``k`` (for ``k = k0, k0+1, ...``) has ``m_k = (z_k + 1) k**2 + a_k + b_k``
steps laid out as

* head padding, ``a_k + n0`` steps
* near ``p``, ``z_k k**2 - 2 n0 + 1`` steps (kappa = +1)
* gap, ``2 n0 - 1`` steps
* near ``phat``, ``k**2 - 2 n0 + 1`` steps (kappa = -1)
* tail padding, ``b_k + n0 - 1`` steps

with ``a_k = b_k = k``. Paddings use kappa = 0. ``z_k`` alternates between
``z0`` and ``z0 + 1`` on the schedule segments ``k(J'-1) < k <= k(J')``.

All counts up to ``mhat_k`` (the cumulative step count at the end of block
``k``) come from Faulhaber sums over segments, so schedules reaching
``k ~ 1e9`` and ``~1e29`` steps are evaluated exactly.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

from .blocks import ItineraryBlock, PrecisionBudgetError, UINT128_MAX
from .cocycle import EXPLICIT_PREFIX, NDS, BirkhoffAccumulator, iterate_blocks
from .drivers import _check_target

_SEGMENTS = ("head", "near_p", "gap", "near_phat", "tail")
_KAPPA = {"head": 0.0, "near_p": 1.0, "gap": 0.0, "near_phat": -1.0, "tail": 0.0}
_LABEL = {"head": "transit", "near_p": "p", "gap": "transit", "near_phat": "phat",
          "tail": "transit"}


@dataclass(frozen=True)
class ItineraryParams:
    z0: int = 5
    n0: int = 2
    k0: int = 10
    schedule: tuple[int, ...] = ()

    def __post_init__(self):
        if self.z0 < 1 or self.n0 < 0 or self.k0 < 1:
            raise ValueError("need z0 >= 1, n0 >= 0, k0 >= 1")
        if self.z0 * self.k0**2 <= 2 * self.n0 or self.k0**2 < 2 * self.n0:
            raise ValueError("k0 too small for the paddings: need z0*k0^2 > 2*n0 and k0^2 >= 2*n0")
        prev = self.k0
        for k in self.schedule:
            if k <= prev:
                raise ValueError("schedule must be strictly increasing with k(1) > k0")
            prev = k

    def pad_a(self, k: int) -> int:
        return k

    def pad_b(self, k: int) -> int:
        return k

    @property
    def boundaries(self) -> tuple[int, ...]:
        """``k(0) = k0 - 1, k(1), k(2), ...``"""
        return (self.k0 - 1,) + self.schedule


# --------------------------------------------------------------------------
# block layout


def segment_of(params: ItineraryParams, k: int) -> int:
    """Schedule segment ``J'`` with ``k(J'-1) < k <= k(J')``."""
    if k < params.k0:
        raise ValueError(f"block index {k} precedes k0 = {params.k0}")
    jp = bisect.bisect_left(params.schedule, k) + 1
    if jp > len(params.schedule):
        raise ValueError(f"block index {k} lies beyond the schedule (k(J'_max) = "
                         f"{params.schedule[-1] if params.schedule else None})")
    return jp


def z_for_segment(params: ItineraryParams, jp: int) -> int:
    return params.z0 if jp % 2 == 1 else params.z0 + 1


def z_of_k(params: ItineraryParams, k: int) -> int:
    return z_for_segment(params, segment_of(params, k))


def segment_lengths(params: ItineraryParams, k: int, z: int) -> dict[str, int]:
    n0 = params.n0
    k2 = k * k
    near_p = z * k2 - 2 * n0 + 1
    if near_p < 1 or k2 < 2 * n0:
        raise ValueError(f"block {k} too short for the paddings")
    gap = max(2 * n0 - 1, 0)
    # n0 = 0 would put one step in both neighborhoods; hand it to near_p
    near_phat = k2 - 2 * n0 + 1 - (1 if n0 == 0 else 0)
    return {
        "head": params.pad_a(k) + n0,
        "near_p": near_p,
        "gap": gap,
        "near_phat": near_phat,
        "tail": params.pad_b(k) + n0 - 1,
    }


def block_length(params: ItineraryParams, k: int, z: int) -> int:
    return (z + 1) * k * k + params.pad_a(k) + params.pad_b(k)


def block_of_k(params: ItineraryParams, k: int, start: int = 0) -> list[ItineraryBlock]:
    """Constant-kappa blocks of symbolic block ``k``; lengths sum to ``m_k``."""
    z = z_of_k(params, k)
    out = []
    pos = start
    for name, length in segment_lengths(params, k, z).items():
        if length:
            near = name in ("near_p", "near_phat")
            out.append(ItineraryBlock(_LABEL[name], _KAPPA[name], length, pos, near, near))
        pos += length
    return out


# --------------------------------------------------------------------------
# Faulhaber sums


def _s0(a: int, b: int) -> int:
    return max(b - a + 1, 0)


def _s1(a: int, b: int) -> int:
    if b < a:
        return 0
    return b * (b + 1) // 2 - (a - 1) * a // 2


def _s2(a: int, b: int) -> int:
    if b < a:
        return 0

    def f(n):
        return n * (n + 1) * (2 * n + 1) // 6

    return f(b) - f(a - 1)


def _poly_sum(c2: int, c1: int, c0: int, a: int, b: int) -> int:
    return c2 * _s2(a, b) + c1 * _s1(a, b) + c0 * _s0(a, b)


def _positive_quad_sum(c2: int, c0: int, a: int, b: int) -> int:
    """``sum_{k=a}^{b} max(0, c2 k^2 + c0)`` for ``c2 > 0``, ``a >= 1``."""
    lo, hi = a, b + 1
    while lo < hi:  # first k with c2 k^2 + c0 > 0
        mid = (lo + hi) // 2
        if c2 * mid * mid + c0 > 0:
            hi = mid
        else:
            lo = mid + 1
    return _poly_sum(c2, 0, c0, lo, b)


def _segments(params: ItineraryParams, k_lo: int, k_hi: int):
    """Yield ``(a, b, z)`` sub-ranges of ``[k_lo, k_hi]`` with constant ``z``."""
    bounds = params.boundaries
    for jp in range(1, len(bounds)):
        a = max(k_lo, bounds[jp - 1] + 1)
        b = min(k_hi, bounds[jp])
        if a <= b:
            yield a, b, z_for_segment(params, jp)
    if k_hi > bounds[-1]:
        raise ValueError(f"block index {k_hi} lies beyond the schedule")


def mhat(params: ItineraryParams, k: int) -> int:
    """Cumulative step count at the end of block ``k``; 0 for ``k < k0``."""
    total = 0
    if k < params.k0:
        return 0
    for a, b, z in _segments(params, params.k0, k):
        total += (z + 1) * _s2(a, b) + _s1(a, b) * 2
    return total


def near_counts(params: ItineraryParams, k: int, nu: int) -> tuple[int, int]:
    """``N_nu`` for ``p`` and ``phat`` over all complete blocks up to ``k``."""
    n0 = params.n0
    cp = cq = 0
    if k < params.k0:
        return 0, 0
    for a, b, z in _segments(params, params.k0, k):
        cp += _positive_quad_sum(z, 1 - 2 * n0 - nu, a, b)
        cq += _positive_quad_sum(1, 1 - 2 * n0 - nu - (1 if n0 == 0 else 0), a, b)
    return cp, cq


def block_containing(params: ItineraryParams, n: int) -> tuple[int, int]:
    """Block ``k`` holding step ``n`` (0-based) and the offset inside it."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    lo, hi = params.k0, params.boundaries[-1]
    if n >= mhat(params, hi):
        raise ValueError(f"step {n} lies beyond the schedule")
    while lo < hi:
        mid = (lo + hi) // 2
        if mhat(params, mid) > n:
            hi = mid
        else:
            lo = mid + 1
    return lo, n - mhat(params, lo - 1)


def trapped_count(params: ItineraryParams, nu: int, n: int, target: str) -> int:
    """``N_nu(omega, U(target); n)`` in closed form for any ``n``."""
    _check_target(target)
    if n == 0:
        return 0
    k, r = block_containing(params, n - 1)
    r += 1  # steps of block k inside [0, n)
    cp, cq = near_counts(params, k - 1, nu)
    done = cp if target == "p" else cq
    lengths = segment_lengths(params, k, z_of_k(params, k))
    name = "near_p" if target == "p" else "near_phat"
    run_start = 0
    for seg in _SEGMENTS:
        if seg == name:
            break
        run_start += lengths[seg]
    run_stop = run_start + lengths[name]
    return done + max(0, min(r, run_stop) - (run_start + nu))


def trapped_fraction(params: ItineraryParams, nu: int, J_prime: int) -> tuple[Fraction, Fraction]:
    """Exact ``N_nu / n`` for ``p`` and ``phat`` at ``n = mhat_{k(J')}``."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if not 1 <= J_prime <= len(params.schedule):
        raise ValueError(f"J' must lie in [1, {len(params.schedule)}]")
    k = params.schedule[J_prime - 1]
    n = mhat(params, k)
    if n > UINT128_MAX:
        raise PrecisionBudgetError(f"mhat = {n} does not fit in 128 bits")
    cp, cq = near_counts(params, k, nu)
    return Fraction(cp, n), Fraction(cq, n)


def bound_terms(params: ItineraryParams, J_prime: int, nu: int) -> tuple[Fraction, Fraction, Fraction]:
    """``(Z1, Z2, mhat_{k(J'-1)} / mhat_{k(J')})`` for segment ``J'``."""
    bounds = params.boundaries
    a, b = bounds[J_prime - 1] + 1, bounds[J_prime]
    sq = _s2(a, b)
    z1 = Fraction((2 * params.n0 + nu) * _s0(a, b), sq)
    z2 = Fraction(2 * _s1(a, b), sq)  # a_k + b_k = 2k
    ratio = Fraction(mhat(params, bounds[J_prime - 1]), mhat(params, b))
    return z1, z2, ratio


def z_star(params: ItineraryParams, J_prime: int) -> int:
    return z_for_segment(params, J_prime)


def bounds_hold(params: ItineraryParams, J_prime: int, nu: int) -> bool:
    fp, fq = trapped_fraction(params, nu, J_prime)
    zs = z_star(params, J_prime)
    slack = Fraction(1, 2**J_prime)
    return fp >= Fraction(zs, zs + 1) - slack and fq >= Fraction(1, zs + 1) - slack


def build_schedule(params: ItineraryParams, J_max: int, nu_design: int = 5) -> ItineraryParams:
    """Return ``params`` with a schedule ``k(1) < ... < k(J_max)``.

    Each ``k(J')`` is the smallest power-of-two multiple of ``k(J'-1)`` for
    which ``Z1``, ``Z2`` and the previous-to-current ``mhat`` ratio are all at
    most ``2**-(J'+2)`` (with ``nu = nu_design`` in ``Z1``) and the exact
    trapped-fraction bounds hold for every ``nu <= nu_design``.
    """
    if J_max < 1:
        raise ValueError("J_max must be at least 1")
    sched: list[int] = []
    prev = params.k0
    for jp in range(1, J_max + 1):
        eta = Fraction(1, 2 ** (jp + 2))
        k = prev * 2
        while True:
            trial = replace(params, schedule=tuple(sched) + (k,))
            z1, z2, ratio = bound_terms(trial, jp, nu_design)
            if z1 <= eta and z2 <= eta and ratio <= eta and bounds_hold(trial, jp, nu_design):
                break
            k *= 2
        if mhat(trial, k) > UINT128_MAX:
            raise PrecisionBudgetError(f"schedule depth {J_max} overflows 128-bit step counts")
        sched.append(k)
        prev = k
    return replace(params, schedule=tuple(sched))


# --------------------------------------------------------------------------
# symbolic state and driver


class SymbolicState(NamedTuple):
    """Position ``offset`` inside block ``k``. ``lap < 0`` counts repetitions
    of the ``k0`` block padded into the past."""

    k: int
    offset: int
    lap: int = 0


@dataclass(frozen=True)
class NewhouseDriver:
    """Two-sided symbolic driver; the past repeats block ``k0`` forever."""

    params: ItineraryParams
    invertible = True
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def _layout(self, k: int):
        lay = self._cache.get(k)
        if lay is None:
            z = z_of_k(self.params, k)
            lengths = segment_lengths(self.params, k, z)
            cuts, pos = [], 0
            for seg in _SEGMENTS:
                pos += lengths[seg]
                cuts.append(pos)
            lay = (tuple(cuts), pos)
            self._cache[k] = lay
        return lay

    def initial_state(self) -> SymbolicState:
        return SymbolicState(self.params.k0, 0, 0)

    def step(self, s: SymbolicState) -> SymbolicState:
        cuts, m = self._layout(s.k)
        if s.offset + 1 < m:
            return SymbolicState(s.k, s.offset + 1, s.lap)
        if s.lap < 0:
            return SymbolicState(s.k, 0, s.lap + 1)
        return SymbolicState(s.k + 1, 0, 0)

    def step_back(self, s: SymbolicState) -> SymbolicState:
        if s.offset > 0:
            return SymbolicState(s.k, s.offset - 1, s.lap)
        if s.k == self.params.k0:
            return SymbolicState(s.k, self._layout(s.k)[1] - 1, s.lap - 1)
        return SymbolicState(s.k - 1, self._layout(s.k - 1)[1] - 1, 0)

    def segment(self, s: SymbolicState) -> str:
        cuts, _ = self._layout(s.k)
        return _SEGMENTS[bisect.bisect_right(cuts, s.offset)]

    def kappa(self, s: SymbolicState) -> float:
        return _KAPPA[self.segment(s)]

    def in_neighborhood(self, s: SymbolicState, target: str, delta: float) -> bool:
        # symbolic neighborhoods do not depend on delta
        _check_target(target)
        return self.segment(s) == ("near_p" if target == "p" else "near_phat")

    def blocks(self, k_max: int | None = None) -> Iterator[ItineraryBlock]:
        """Lazy block stream from block ``k0`` (up to ``k_max`` inclusive)."""
        k, pos = self.params.k0, 0
        last = self.params.boundaries[-1] if k_max is None else k_max
        while k <= last:
            bl = block_of_k(self.params, k, pos)
            yield from bl
            pos += sum(b.length for b in bl)
            k += 1

    def schedules(self, J_max: int) -> tuple[list[int], list[int]]:
        """``n1(J) = mhat_{k(2J-1)}``, ``n2(J) = mhat_{k(2J)}``."""
        ks = self.params.schedule
        n1 = [mhat(self.params, ks[2 * j - 2]) for j in range(1, J_max + 1) if 2 * j - 1 <= len(ks)]
        n2 = [mhat(self.params, ks[2 * j - 1]) for j in range(1, J_max + 1) if 2 * j <= len(ks)]
        return n1, n2


def enumerate_counts(params: ItineraryParams, k_max: int, nus=(0,)) -> dict[int, list[tuple[int, int, int]]]:
    """Enumeration oracle for the closed-form counts.

    Builds the per-step membership of every block ``k0 .. k_max`` from the
    driver's own segment lookup and tests the trapped condition at each
    step with a sliding window. Returns, per ``nu``, ``(mhat_k, N_p, N_phat)``
    at the end of every block.
    """
    drv = NewhouseDriver(params)
    out = {nu: [] for nu in nus}
    totals = {nu: [0, 0] for nu in nus}
    width = max(nus, default=0)
    tails = [np.zeros(width, dtype=bool), np.zeros(width, dtype=bool)]
    codes = (_SEGMENTS.index("near_p"), _SEGMENTS.index("near_phat"))
    n = 0
    for k in range(params.k0, k_max + 1):
        cuts, m = drv._layout(k)
        seg = np.searchsorted(np.asarray(cuts), np.arange(m), side="right")
        members = [np.concatenate([tails[i], seg == codes[i]]) for i in range(2)]
        n += m
        for i, member in enumerate(members):
            csum = np.concatenate([[0], np.cumsum(member, dtype=np.int64)])
            for nu in nus:
                # window of nu + 1 steps ending at each step of this block
                win = csum[width + 1:] - csum[width - nu: width - nu + m]
                totals[nu][i] += int(np.count_nonzero(win == nu + 1))
        for nu in nus:
            out[nu].append((n, totals[nu][0], totals[nu][1]))
        if width:
            tails = [mb[-width:] for mb in members]
    return out


def step_counts(params: ItineraryParams, n: int, nu: int) -> tuple[int, int]:
    """Pure stepping oracle: walk the symbolic state ``n`` steps."""
    drv = NewhouseDriver(params)
    s = drv.initial_state()
    run_p = run_q = cp = cq = 0
    for _ in range(n):
        seg = drv.segment(s)
        run_p = run_p + 1 if seg == "near_p" else 0
        run_q = run_q + 1 if seg == "near_phat" else 0
        cp += run_p > nu
        cq += run_q > nu
        s = drv.step(s)
    return cp, cq


# --------------------------------------------------------------------------
# Birkhoff sums in closed form


def _stable_block(nds: NDS, observable, params: ItineraryParams, k: int, entry: float):
    x, acc, _ = iterate_blocks(nds, block_of_k(params, k), entry, observable)
    return x, acc


def _exact_part(params: ItineraryParams, values: dict, a: int, b: int, z: int) -> Fraction:
    """Run-length part of blocks ``a..b`` (all stable, constant ``z``)."""
    n0 = params.n0
    poly = {  # segment length as c2 k^2 + c1 k + c0
        "head": (0, 1, n0),
        "near_p": (z, 0, 1 - 2 * n0),
        "near_phat": (1, 0, 1 - 2 * n0 - (1 if n0 == 0 else 0)),
        "tail": (0, 1, n0 - 1),
    }
    total = Fraction(0)
    for seg, (c2, c1, c0) in poly.items():
        total += values[seg] * _poly_sum(c2, c1, c0 - EXPLICIT_PREFIX, a, b)
    return total


def birkhoff_closed_form(
    nds: NDS, observable, params: ItineraryParams, x0: float, checkpoints
) -> list[BirkhoffAccumulator]:
    """Birkhoff sums ``sum_{j<n} phi(x_j)`` at each checkpoint ``n``.

    Blocks below the stability index are stepped with :func:`iterate_blocks`.
    From there on every block starts on the padding fixed point and runs each
    long segment past the 60-step prefix, so its float part is the same for
    all ``k`` and its run-length part is a polynomial in ``k``; whole ranges
    of blocks are then summed with Faulhaber's formulas.
    """
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps:
        return []
    k0 = params.k0
    k_stable = max(k0 + 1, EXPLICIT_PREFIX + 2)
    n_stable = mhat(params, k_stable - 1)
    early = [c for c in cps if c <= n_stable]
    late = [c for c in cps if c > n_stable]
    results: dict[int, BirkhoffAccumulator] = {}

    drv = NewhouseDriver(params)
    x, acc, recs = iterate_blocks(
        nds, drv.blocks(k_stable - 1), x0, observable, checkpoints=early + [n_stable]
    )
    for r in recs:
        results[r.n] = r.birkhoff
    if late:
        base = results[n_stable]
        entry = recs[-1].point
        values = {seg: Fraction(observable(0.5 + 2.0 * nds.epsilon * kap))
                  for seg, kap in _KAPPA.items()}
        # float part of a stable block, checked to be k-independent
        reps = {}
        for k in (k_stable, k_stable + 1):
            x_end, acc_k = _stable_block(nds, observable, params, k, entry)
            exact_expected = _exact_part(params, values, k, k, z_of_k(params, k))
            if acc_k.exact != exact_expected or x_end != entry:
                raise RuntimeError("stable block structure violated; closed form unavailable")
            reps[k] = acc_k.approx
        if reps[k_stable] != reps[k_stable + 1]:
            raise RuntimeError("stable block float part depends on k")
        approx_block = reps[k_stable]
        for c in late:
            k, r = block_containing(params, c - 1)
            r += 1
            acc_c = base.copy()
            if k > k_stable:
                for a, b, z in _segments(params, k_stable, k - 1):
                    nblocks = b - a + 1
                    acc_c.exact += _exact_part(params, values, a, b, z)
                    acc_c.approx += approx_block * nblocks
                    acc_c.steps += (z + 1) * _s2(a, b) + 2 * _s1(a, b)
            _, acc_r, _ = iterate_blocks(
                nds, block_of_k(params, k), entry, observable, checkpoints=[r]
            )
            results[c] = acc_c + acc_r
    return [results[c] for c in cps]
