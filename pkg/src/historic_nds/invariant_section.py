"""The invariant section ``Y`` of a non-historic driver via the graph transform
``G(b)(omega) = f_{theta^-1 omega}(b(theta^-1 omega))``.

``Y`` is only ever represented by pullback samples
``Y_n(omega) = F(n, theta^-n omega, x0)``. On ``I0`` every fiber map has
slope 1/2, so ``|Y_{n+1} - Y_n| <= 2**-n * diam(I0)`` and depth 60 is exact
at double precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath as mp

from .circle import affine_step, in_i0
from .cocycle import NDS
from .drivers import NonInvertibleDriverError
from .analytics import birkhoff_at

I0_DIAMETER = 0.5
EXACT_DEPTH = 60


@dataclass(frozen=True)
class SectionSample:
    base_state: object
    value: float
    depth: int

    def __post_init__(self):
        if not in_i0(self.value):
            raise ValueError(f"section values live in I0, got {self.value}")


def _require_invertible(driver) -> None:
    if not getattr(driver, "invertible", False) or not hasattr(driver, "step_back"):
        raise NonInvertibleDriverError(
            f"{type(driver).__name__} is one-sided; the pullback needs the driver's past"
        )


def past_states(driver, omega, n: int) -> list:
    """``[theta^-n omega, ..., theta^-1 omega]``."""
    _require_invertible(driver)
    out = []
    s = omega
    for _ in range(n):
        s = driver.step_back(s)
        out.append(s)
    out.reverse()
    return out


def pullback(nds: NDS, driver, omega, n: int, x0: float = 0.5) -> SectionSample:
    """``Y_n(omega)``: push ``x0`` forward along the ``n`` past states."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if not in_i0(x0):
        raise ValueError("x0 must lie in I0")
    x = x0
    for s in past_states(driver, omega, n):
        x = nds.apply(driver.kappa(s), x)
    return SectionSample(omega, x, n)


def pullback_series(nds: NDS, driver, omega, depth: int, x0: float = 0.5) -> list[float]:
    """``Y_0(omega), ..., Y_depth(omega)`` sharing one backward walk.

    ``Y_n`` starts ``n`` steps back, so each depth is its own forward pass
    over the tail of the same list of past states.
    """
    past = past_states(driver, omega, depth)
    kappas = [driver.kappa(s) for s in past]
    out = []
    for n in range(depth + 1):
        x = x0
        for k in kappas[depth - n:]:
            x = nds.apply(k, x)
        out.append(x)
    return out


def invariance_residual(nds: NDS, driver, here: SectionSample, there: SectionSample) -> float:
    """``|f_omega(Y_n(omega)) - Y_n(theta omega)|``."""
    if here.depth != there.depth:
        raise ValueError(f"samples at different depths ({here.depth} vs {there.depth})")
    return abs(nds.apply(driver.kappa(here.base_state), here.value) - there.value)


def graph_transform(nds: NDS, driver, states: Sequence, values: Sequence[float]) -> list[float]:
    """``G(b)`` on the images: the value at ``theta omega`` is ``f_omega(b(omega))``."""
    return [nds.apply(driver.kappa(s), v) for s, v in zip(states, values)]


def contraction_probe(nds: NDS, driver, states: Sequence, b1: Sequence[float],
                      b2: Sequence[float]) -> float:
    """Sup-norm ratio ``||G b1 - G b2|| / ||b1 - b2||`` over shared states."""
    if len(b1) != len(states) or len(b2) != len(states):
        raise ValueError("sections must be sampled on the same states")
    if not all(in_i0(v) for v in (*b1, *b2)):
        raise ValueError("section values must lie in I0")
    before = max(abs(u - v) for u, v in zip(b1, b2))
    if before == 0.0:
        raise ValueError("the sections coincide; the contraction ratio is undefined")
    g1 = graph_transform(nds, driver, states, b1)
    g2 = graph_transform(nds, driver, states, b2)
    after = max(abs(u - v) for u, v in zip(g1, g2))
    return after / before


@dataclass(frozen=True)
class DecayReport:
    distances: tuple[float, ...]  # |F(j, omega, x) - Y(theta^j omega)|, j = 0..n
    ratios: tuple[float, ...]  # d_{j+1} / d_j, nan where d_j = 0

    def within(self, tol: float) -> bool:
        return all(abs(r - 0.5) <= tol for r in self.ratios)


def decay_check(nds: NDS, driver, omega, x: float, n: int, depth: int | None = None) -> DecayReport:
    """Per-step decay of the distance between an orbit and the section.

    ``Y(theta^j omega)`` is the forward image of one pullback anchored at
    ``theta^-depth omega`` (``depth >= n + 20``, default ``n + 60``), so both
    sequences see the same maps. The arithmetic runs in ``mpmath`` with
    enough digits to resolve ``2**-n`` on top of values of order one.
    """
    if not in_i0(x):
        raise ValueError("x must lie in I0")
    if n < 0:
        raise ValueError("n must be nonnegative")
    depth = n + EXACT_DEPTH if depth is None else depth
    if depth < n + 20:
        raise ValueError("the anchor must be at least n + 20 steps deep")
    past = past_states(driver, omega, depth)
    kappas_past = [driver.kappa(s) for s in past]
    kappas_future = []
    s = omega
    for _ in range(n):
        kappas_future.append(driver.kappa(s))
        s = driver.step(s)
    digits = 40 + int(0.31 * (depth + n)) + 1
    with mp.workdps(digits):
        eps = mp.mpf(nds.epsilon)
        y = mp.mpf("0.5")
        for k in kappas_past:
            y = affine_step(y, eps, mp.mpf(k))
        xj = mp.mpf(x)
        dists = [abs(xj - y)]
        for k in kappas_future:
            xj = affine_step(xj, eps, mp.mpf(k))
            y = affine_step(y, eps, mp.mpf(k))
            dists.append(abs(xj - y))
        ratios = [float(b / a) if a != 0 else float("nan") for a, b in zip(dists, dists[1:])]
        return DecayReport(tuple(float(d) for d in dists), tuple(ratios))


def average_transfer(nds: NDS, driver, omega, x: float, n: int, observable=None) -> float:
    """``|avg_x(n) - avg_Y(n)|`` with the second orbit started on ``Y(omega)``."""
    y = pullback(nds, driver, omega, EXACT_DEPTH).value
    ax, = birkhoff_at(nds, driver, x, [n], observable, state=omega)
    ay, = birkhoff_at(nds, driver, y, [n], observable, state=omega)
    return abs(ax - ay)
