"""Hybrid piecewise-linear model of the Bowen heteroclinic flow.

Two linear saddle boxes (around ``p`` and ``phat``) are joined by two affine
transit tubes. Inside a box of half width ``D`` the flow is
``u' = e_u * u``, ``s' = -e_s * s``; an orbit enters at ``(u, s) = (h, D)``
and leaves at ``u = D`` after ``log(D / h) / e_u`` time units, with stable
offset ``D * (h / D) ** (e_s / e_u)``. A tube takes ``tau`` time units and
multiplies the carried offset by ``c``. Every passage time is therefore a
closed-form expression and the semiflow is advanced without integration.

Box offsets shrink doubly exponentially in the number of passages, so states
carry log-offsets ``log(D / h)`` instead of offsets.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

from mpmath import mp

from .blocks import ItineraryBlock, PrecisionBudgetError, check_u128
from .drivers import _check_target

_DPS = 60
MAX_J = 40


class Region(enum.Enum):
    BOX_P = "BoxP"
    TUBE_TO_PHAT = "TubeToPhat"
    BOX_PHAT = "BoxPhat"
    TUBE_TO_P = "TubeToP"

    @property
    def is_box(self) -> bool:
        return self in (Region.BOX_P, Region.BOX_PHAT)

    @property
    def label(self) -> str:
        return {Region.BOX_P: "p", Region.BOX_PHAT: "phat"}.get(self, "transit")


_NEXT = {
    Region.BOX_P: Region.TUBE_TO_PHAT,
    Region.TUBE_TO_PHAT: Region.BOX_PHAT,
    Region.BOX_PHAT: Region.TUBE_TO_P,
    Region.TUBE_TO_P: Region.BOX_P,
}
_PREV = {v: k for k, v in _NEXT.items()}


@dataclass(frozen=True)
class BowenParams:
    """Eigenvalue data and geometry of the hybrid flow.

    ``alpha_plus``/``alpha_minus`` are the expanding/contracting rates at
    ``p``, ``beta_plus``/``beta_minus`` those at ``phat``. The cycle is
    attracting when ``alpha_minus * beta_minus > alpha_plus * beta_plus``.
    """

    alpha_plus: float = 1.0
    alpha_minus: float = 2.0
    beta_plus: float = 1.0
    beta_minus: float = 2.0
    box_half_width: float = 0.5
    tube_transit: float = 1.0
    tube_contraction: float = 1.0
    initial_offset: float = 0.1

    def __post_init__(self):
        for name in ("alpha_plus", "alpha_minus", "beta_plus", "beta_minus",
                     "box_half_width", "tube_transit"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not 0 < self.tube_contraction <= 1:
            raise ValueError(f"tube_contraction must lie in (0, 1], got {self.tube_contraction}")
        if not 0 < self.initial_offset < self.box_half_width:
            raise ValueError("initial_offset must lie strictly between 0 and box_half_width")
        if self.alpha_minus * self.beta_minus <= self.alpha_plus * self.beta_plus:
            raise ValueError(
                "heteroclinic cycle is not attracting: need alpha_minus*beta_minus > "
                "alpha_plus*beta_plus"
            )

    def rates(self, region: Region) -> tuple[float, float]:
        """``(expanding, contracting)`` rates of a box region."""
        if region is Region.BOX_P:
            return self.alpha_plus, self.alpha_minus
        if region is Region.BOX_PHAT:
            return self.beta_plus, self.beta_minus
        raise ValueError(f"{region} is not a saddle box")


@dataclass(frozen=True)
class PredictedConstants:
    sigma1: float
    sigma2: float
    lambda1: float
    lambda2: float


def predicted_constants(params: BowenParams) -> PredictedConstants:
    s1 = params.beta_minus / params.alpha_plus
    s2 = params.alpha_minus / params.beta_plus
    if s1 * s2 <= 1.0:
        raise ValueError("neutral or repelling cycle: sigma1 * sigma2 must exceed 1")
    return PredictedConstants(s1, s2, 1.0 / (1.0 + s1), s2 / (1.0 + s2))


def saddle_passage(h: float, e_u: float, e_s: float, box: float) -> tuple[float, float]:
    """Time to cross a linear saddle box entered at unstable offset ``h``,
    and the stable offset at exit."""
    if not 0 < h < box:
        raise ValueError(f"entry offset must satisfy 0 < h < box, got h={h}, box={box}")
    if e_u <= 0 or e_s <= 0:
        raise ValueError("rates must be positive")
    return math.log(box / h) / e_u, box * (h / box) ** (e_s / e_u)


def saddle_window(duration, e_u: float, e_s: float, box: float, delta: float):
    """Sub-interval of ``[0, duration]`` (relative to box entry) during which
    both local coordinates are ``<= delta``. ``None`` if empty."""
    if not 0 < delta <= box:
        raise ValueError(f"delta must satisfy 0 < delta <= box, got {delta}")
    ell = math.log(box / delta)
    start, end = ell / e_s, duration - ell / e_u
    return (start, end) if start <= end else None


# --------------------------------------------------------------------------
# semiflow in closed form


@dataclass(frozen=True)
class FlowState:
    """Hybrid flow state.

    ``entry_time`` is when the current region was entered. In a box,
    ``entry_log`` is ``log(D / u)`` at entry (the stable coordinate enters at
    ``D``); in a tube it is the carried log-offset ``log(D / s_exit)`` of the
    box just left. ``time`` is the absolute time.
    """

    region: Region
    entry_time: float
    entry_log: float
    time: float

    @property
    def elapsed(self) -> float:
        return self.time - self.entry_time


def initial_state(params: BowenParams) -> FlowState:
    return FlowState(
        Region.BOX_P, 0.0, math.log(params.box_half_width / params.initial_offset), 0.0
    )


def _duration(params: BowenParams, region: Region, entry_log):
    if region.is_box:
        return entry_log / params.rates(region)[0]
    return params.tube_transit


def _exit_log(params: BowenParams, region: Region, entry_log, log_c):
    if region.is_box:
        e_u, e_s = params.rates(region)
        return entry_log * e_s / e_u
    return entry_log - log_c


def _entry_log_before(params: BowenParams, region: Region, entry_log, log_c):
    """Entry log-offset of the region preceding ``region``."""
    prev = _PREV[region]
    if prev.is_box:
        # entry_log is the tube's carried offset = L_prev * e_s / e_u
        e_u, e_s = params.rates(prev)
        return entry_log * e_u / e_s
    carried = entry_log + log_c
    if carried <= 0:
        raise ValueError("backward orbit leaves the model domain")
    return carried


def local_coordinates(params: BowenParams, state: FlowState) -> tuple[float, float]:
    """``(u, s)`` in a box or ``(progress, carried offset)`` in a tube."""
    d = params.box_half_width
    if state.region.is_box:
        e_u, e_s = params.rates(state.region)
        return (d * math.exp(-(state.entry_log - e_u * state.elapsed)),
                d * math.exp(-e_s * state.elapsed))
    return state.elapsed, d * math.exp(-state.entry_log)


def advance(params: BowenParams, state: FlowState, dt: float) -> FlowState:
    """Flow the state by ``dt`` time units (negative ``dt`` runs backwards)."""
    target = state.time + dt
    log_c = math.log(params.tube_contraction)
    region, entry, lg = state.region, state.entry_time, state.entry_log
    if dt >= 0:
        while True:
            end = entry + _duration(params, region, lg)
            if end > target:
                break
            lg = _exit_log(params, region, lg, log_c)
            region, entry = _NEXT[region], end
    else:
        while target < entry:
            lg = _entry_log_before(params, region, lg, log_c)
            region = _PREV[region]
            entry = entry - _duration(params, region, lg)
    return FlowState(region, entry, lg, target)


def time_one(params: BowenParams, state: FlowState) -> FlowState:
    return advance(params, state, 1.0)


def flow_kappa(params: BowenParams, state: FlowState) -> float:
    if state.region is Region.BOX_P:
        return 1.0
    if state.region is Region.BOX_PHAT:
        return -1.0
    q = state.elapsed / params.tube_transit
    return 1.0 - 2.0 * q if state.region is Region.TUBE_TO_PHAT else -1.0 + 2.0 * q


def flow_in_neighborhood(params: BowenParams, state: FlowState, target: str, delta: float) -> bool:
    """Sup-norm ball of radius ``delta`` in the box coordinates of ``target``."""
    _check_target(target)
    box = Region.BOX_P if target == "p" else Region.BOX_PHAT
    if state.region is not box:
        return False
    if delta >= params.box_half_width:
        return True
    if delta <= 0:
        return False
    e_u, e_s = params.rates(box)
    ell = math.log(params.box_half_width / delta)
    lu = state.entry_log - e_u * state.elapsed
    ls = e_s * state.elapsed
    return lu >= ell and ls >= ell


@dataclass(frozen=True)
class BowenDriver:
    """Time-one map of the hybrid flow as a driving system."""

    params: BowenParams = BowenParams()
    invertible = True

    def initial_state(self) -> FlowState:
        return initial_state(self.params)

    def step(self, state: FlowState) -> FlowState:
        return time_one(self.params, state)

    def step_back(self, state: FlowState) -> FlowState:
        return advance(self.params, state, -1.0)

    def kappa(self, state: FlowState) -> float:
        return flow_kappa(self.params, state)

    def in_neighborhood(self, state: FlowState, target: str, delta: float) -> bool:
        return flow_in_neighborhood(self.params, state, target, delta)

    def blocks(self, delta: float, J_max: int, nu: int = 0) -> Iterator[ItineraryBlock]:
        return block_stream(self.params, delta, J_max, nu)

    def schedules(self, J_max: int) -> tuple[list[int], list[int]]:
        cs = crossing_times(self.params, J_max)
        return cs.n1, cs.n2


# --------------------------------------------------------------------------
# crossing times in extended precision


@dataclass(frozen=True)
class BoxPassage:
    target: str
    entry: object  # mpf
    entry_log: object  # mpf
    e_u: float
    e_s: float

    @property
    def duration(self):
        return self.entry_log / self.e_u

    @property
    def exit(self):
        return self.entry + self.duration


@dataclass(frozen=True)
class CrossingRecord:
    """Passage data for cycle ``j``.

    ``t_odd`` and ``t_even`` are the section crossings ``t_{2j-1}`` (leaving
    the ``p`` box) and ``t_{2j}`` (leaving the ``phat`` box).
    ``T_phat = t_{2j} - t_{2j-1}`` and ``T_p = t_{2j+1} - t_{2j}``.
    """

    j: int
    t_odd: object
    t_even: object
    T_phat: object
    T_p: object
    phat_box: BoxPassage
    p_box: BoxPassage


@dataclass(frozen=True)
class CrossingSchedule:
    times: list  # t_0 = 0, t_1, ..., t_{2J+1}
    records: list[CrossingRecord]
    boxes: list[BoxPassage]  # p_0, phat_1, p_1, phat_2, ...

    @property
    def J(self) -> int:
        return len(self.records)

    @property
    def n1(self) -> list[int]:
        """``floor(t_{2J-1})`` for ``J = 1..J_max``."""
        with mp.workdps(_DPS):
            return [int(mp.floor(self.times[2 * j - 1])) for j in range(1, self.J + 1)]

    @property
    def n2(self) -> list[int]:
        """``floor(t_{2J})`` for ``J = 1..J_max``."""
        with mp.workdps(_DPS):
            return [int(mp.floor(self.times[2 * j])) for j in range(1, self.J + 1)]


def crossing_times(params: BowenParams, J: int) -> CrossingSchedule:
    """Section crossing times ``t_1 .. t_{2J+1}`` from the passage recursion.

    Arithmetic runs at 60 significant digits so that ``floor(t_j)`` stays
    exact while ``t_j`` grows like ``(sigma1 * sigma2) ** j``.
    """
    if J < 1:
        raise ValueError("J must be at least 1")
    if J > MAX_J:
        raise PrecisionBudgetError(f"J = {J} exceeds the precision budget J <= {MAX_J}")
    with mp.workdps(_DPS):
        d = mp.mpf(params.box_half_width)
        tau = mp.mpf(params.tube_transit)
        log_c = mp.log(mp.mpf(params.tube_contraction))
        lg = mp.log(d / mp.mpf(params.initial_offset))
        t = mp.mpf(0)
        times = [t]
        boxes = []
        region = Region.BOX_P
        # p_0, then (phat_j, p_j) for j = 1..J
        for _ in range(2 * J + 1):
            e_u, e_s = params.rates(region)
            box = BoxPassage(region.label, t, lg, e_u, e_s)
            boxes.append(box)
            t = box.exit
            times.append(t)
            lg = lg * e_s / e_u - log_c
            t = t + tau
            region = Region.BOX_PHAT if region is Region.BOX_P else Region.BOX_P
        check_u128(int(mp.ceil(times[-1])), "crossing time")
        records = []
        for j in range(1, J + 1):
            records.append(
                CrossingRecord(
                    j=j,
                    t_odd=times[2 * j - 1],
                    t_even=times[2 * j],
                    T_phat=times[2 * j] - times[2 * j - 1],
                    T_p=times[2 * j + 1] - times[2 * j],
                    phat_box=boxes[2 * j - 1],
                    p_box=boxes[2 * j],
                )
            )
    return CrossingSchedule(times, records, boxes)


def delta_window(record: CrossingRecord, params: BowenParams, delta: float, target: str = "p"):
    """Absolute time interval of the ``target`` passage of ``record`` spent in
    the sup-norm ``delta``-ball, or ``None`` when empty."""
    _check_target(target)
    box = record.p_box if target == "p" else record.phat_box
    return _box_window(box, params, delta)


def _box_window(box: BoxPassage, params: BowenParams, delta: float):
    if not 0 < delta <= params.box_half_width:
        raise ValueError(f"delta must satisfy 0 < delta <= box_half_width, got {delta}")
    with mp.workdps(_DPS):
        ell = mp.log(mp.mpf(params.box_half_width) / mp.mpf(delta))
        start = box.entry + ell / box.e_s
        end = box.exit - ell / box.e_u
        if start > end:
            return None
        return start, end


def window_ratio(record: CrossingRecord, params: BowenParams, delta: float, target: str = "p") -> float:
    """``T_{delta,j} / T_j`` for the ``target`` passage of ``record``."""
    w = delta_window(record, params, delta, target)
    total = record.T_p if target == "p" else record.T_phat
    if w is None:
        return 0.0
    with mp.workdps(_DPS):
        return float((w[1] - w[0]) / total)


# --------------------------------------------------------------------------
# run-length itinerary over integer times


def _ceil(x) -> int:
    return int(mp.ceil(x))


def block_stream(
    params: BowenParams, delta: float, J_max: int, nu: int = 0
) -> Iterator[ItineraryBlock]:
    """Integer-time itinerary of the orbit started at :func:`initial_state`.

    Covers ``[0, ceil(t_{2 J_max}))``: each box passage becomes at most four
    constant-kappa blocks (before the delta-window, the first ``nu`` window
    steps, the nu-trapped run, after the window) and each tube one unit block
    per integer time with the ramped kappa.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    schedule = crossing_times(params, J_max)
    boxes = schedule.boxes[: 2 * J_max]
    tau = params.tube_transit
    with mp.workdps(_DPS):
        for i, box in enumerate(boxes):
            lo, hi = _ceil(box.entry), _ceil(box.exit)  # integer times [lo, hi)
            kappa = 1.0 if box.target == "p" else -1.0
            pieces = []
            w = _box_window(box, params, delta)
            if w is not None:
                a = max(_ceil(w[0]), lo)
                b = min(int(mp.floor(w[1])), hi - 1)
            if w is None or a > b:
                pieces.append((lo, hi, False, False))
            else:
                pieces.append((lo, a, False, False))
                first_trapped = max(a + nu, nu)
                pieces.append((a, min(first_trapped, b + 1), True, False))
                pieces.append((first_trapped, b + 1, True, True))
                pieces.append((b + 1, hi, False, False))
            for start, stop, in_w, trapped in pieces:
                if stop > start:
                    yield ItineraryBlock(box.target, kappa, stop - start, start, in_w, trapped)
            if i == len(boxes) - 1:
                break
            t_exit = box.exit
            going_to_phat = box.target == "p"
            for j in range(hi, _ceil(t_exit + tau)):
                q = float((j - t_exit) / tau)
                k = 1.0 - 2.0 * q if going_to_phat else -1.0 + 2.0 * q
                yield ItineraryBlock("transit", k, 1, j)


def stepping_itinerary(params: BowenParams, n: int) -> list[tuple[str, float]]:
    """``(label, kappa)`` at integer times ``0..n-1`` by repeated :func:`time_one`."""
    s = initial_state(params)
    out = []
    for _ in range(n):
        out.append((s.region.label, flow_kappa(params, s)))
        s = time_one(params, s)
    return out
