"""Driving systems: the base dynamics that choose which fiber map acts at each
step.

Every driver exposes the same small surface (see :class:`Driver`). States are
immutable values; ``step`` returns a new state. Drivers that can run
backwards also provide ``step_back``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Protocol, runtime_checkable

import numpy as np

from .circle import UnperturbedMap, circle_dist, f0_eval, project

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

TARGETS = ("p", "phat")


class NonInvertibleDriverError(TypeError):
    """Raised when an operation needs the past of a one-sided driver."""


@runtime_checkable
class Driver(Protocol):
    invertible: bool

    def initial_state(self): ...

    def step(self, state): ...

    def kappa(self, state) -> float: ...

    def in_neighborhood(self, state, target: str, delta: float) -> bool: ...


def _check_target(target: str) -> None:
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")


# --------------------------------------------------------------------------
# SplitMix64


def splitmix64_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step. Returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def unit_interval(z: int) -> float:
    """Top 53 bits of a 64-bit word as a float in ``[0, 1)``."""
    return (z >> 11) * 2.0**-53


def to_noise(z: int) -> float:
    """Affine map of a 64-bit output onto ``[-1, 1)``."""
    return 2.0 * unit_interval(z) - 1.0


def splitmix64_block(state: int, n: int) -> np.ndarray:
    """The next ``n`` SplitMix64 outputs after ``state`` as a uint64 array.

    SplitMix64 is counter based, so the stream vectorises exactly.
    """
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(state) + k * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def noise_block(state: int, n: int) -> np.ndarray:
    z = splitmix64_block(state, n)
    return 2.0 * ((z >> np.uint64(11)).astype(np.float64) * 2.0**-53) - 1.0


# --------------------------------------------------------------------------
# i.i.d. one-sided shift


@dataclass(frozen=True)
class IidDriverState:
    rng_state: int
    current_t: float


@dataclass(frozen=True)
class IidDriver:
    """One-sided shift on ``[-1, 1]^N`` with uniform i.i.d. coordinates.

    The coordinates are a SplitMix64 stream mapped affinely onto ``[-1, 1)``
    and ``kappa`` reads the current coordinate. The saddle points are taken
    as the sequences starting with ``t0 = 1`` (``p``) and ``t0 = -1``
    (``phat``); neighborhoods only look at the current coordinate.
    """

    seed: int = 0
    invertible = False

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def initial_state(self) -> IidDriverState:
        return self.step(IidDriverState(self.seed, 0.0))

    def step(self, s: IidDriverState) -> IidDriverState:
        return iid_step(s)

    def kappa(self, s: IidDriverState) -> float:
        return s.current_t

    def in_neighborhood(self, s: IidDriverState, target: str, delta: float) -> bool:
        _check_target(target)
        centre = 1.0 if target == "p" else -1.0
        return abs(s.current_t - centre) <= delta

    def kappas(self, s: IidDriverState, n: int) -> np.ndarray:
        """``kappa`` along the next ``n`` states starting at ``s`` (inclusive)."""
        if n <= 0:
            return np.empty(0)
        out = np.empty(n)
        out[0] = s.current_t
        out[1:] = noise_block(s.rng_state, n - 1)
        return out


def iid_step(s: IidDriverState) -> IidDriverState:
    """Shift by one coordinate: draw the next value of the stream."""
    new_state, z = splitmix64_next(s.rng_state)
    return IidDriverState(new_state, to_noise(z))


# --------------------------------------------------------------------------
# irrational rotation

GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RotationDriver:
    """Circle rotation ``omega -> omega + gamma`` with ``kappa = cos(2 pi omega)``.

    Uniquely ergodic for irrational ``gamma``, hence non-historic. ``p`` is
    ``omega = 0`` and ``phat`` is ``omega = 1/2``.
    """

    gamma: float = GOLDEN_ROTATION
    omega0: float = 0.0
    invertible = True

    def initial_state(self) -> float:
        return project(self.omega0)

    def step(self, omega: float) -> float:
        return project(omega + self.gamma)

    def step_back(self, omega: float) -> float:
        return project(omega - self.gamma)

    def kappa(self, omega: float) -> float:
        return math.cos(2.0 * math.pi * omega)

    def in_neighborhood(self, omega: float, target: str, delta: float) -> bool:
        _check_target(target)
        return circle_dist(omega, 0.0 if target == "p" else 0.5) <= delta

    def kappas(self, omega: float, n: int) -> np.ndarray:
        """``kappa`` along ``omega + j * gamma`` for ``j < n``.

        Uses the closed form rather than repeated stepping; the two differ by
        accumulated rounding of order ``n`` ulps.
        """
        omegas = np.mod(omega + self.gamma * np.arange(n, dtype=np.float64), 1.0)
        return np.cos(2.0 * np.pi * omegas)


def rotation_step(driver: RotationDriver, omega: float) -> float:
    return driver.step(omega)


@dataclass(frozen=True)
class ConstantDriver:
    """Trivial driver with a single state and fixed ``kappa``. Test control."""

    value: float = 0.0
    invertible = True

    def initial_state(self) -> int:
        return 0

    def step(self, s: int) -> int:
        return s

    step_back = step

    def kappa(self, s: int) -> float:
        return self.value

    def in_neighborhood(self, s: int, target: str, delta: float) -> bool:
        _check_target(target)
        return self.value == (1.0 if target == "p" else -1.0)

    def kappas(self, s: int, n: int) -> np.ndarray:
        return np.full(n, self.value)


def iter_states(driver, state, n: int) -> Iterator:
    """Yield ``state, step(state), ...`` (``n`` states)."""
    for _ in range(n):
        yield state
        state = driver.step(state)


def driver_kappas(driver, state, n: int) -> np.ndarray:
    if hasattr(driver, "kappas"):
        return driver.kappas(state, n)
    return np.fromiter((driver.kappa(s) for s in iter_states(driver, state, n)), float, n)


# --------------------------------------------------------------------------
# reachability of n-step images under i.i.d. noise

_GRID_BUDGET = 10**6


def _grid_size(n: int) -> int:
    if n == 1:
        return 1001
    size = int(round(_GRID_BUDGET ** (1.0 / n)))
    size -= 1 - size % 2  # odd, so that t = 0 is on the grid
    return max(size, 3)


def reachable_images(m: UnperturbedMap, eps: float, x: float, n: int) -> tuple[np.ndarray, int]:
    """All ``n``-step images of ``x`` over a product grid of noise values.

    Returns the images and the per-coordinate grid size.
    """
    if not 1 <= n <= 8:
        raise ValueError(f"grid enumeration supports 1 <= n <= 8, got {n}")
    g = _grid_size(n)
    grid = np.linspace(-1.0, 1.0, g)
    pts = np.array([x])
    for _ in range(n):
        base = np.array([f0_eval(m, float(y)) for y in pts])
        pts = (base[:, None] + eps * grid[None, :]).ravel() % 1.0
    return pts, g


def reachability_check(
    m: UnperturbedMap, eps: float, x: float, n: int, centre: str = "forward"
) -> bool:
    """Grid test that the ``n``-step image set contains an ``eps``-arc.

    ``centre="forward"`` targets the arc around ``f0^n(x)``; ``"previous"``
    targets ``f0^(n-1)(x)``. The image set covers an arc when every point of
    a 1001-point sampling of the arc lies within one noise-grid spacing of
    some image.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return True
    if centre not in ("forward", "previous"):
        raise ValueError("centre must be 'forward' or 'previous'")
    images, g = reachable_images(m, eps, x, n)
    c = x
    for _ in range(n if centre == "forward" else n - 1):
        c = f0_eval(m, c)
    spacing = 2.0 * eps / (g - 1)
    offsets = np.sort(((images - c + 0.5) % 1.0) - 0.5)
    targets = np.linspace(-eps, eps, 1001)
    idx = np.clip(np.searchsorted(offsets, targets), 1, len(offsets) - 1)
    gaps = np.minimum(np.abs(offsets[idx] - targets), np.abs(offsets[idx - 1] - targets))
    return bool(np.all(gaps <= spacing * (1.0 + 1e-9) + 1e-15))


def one_step_image_equals_arc(m: UnperturbedMap, eps: float, x: float, grid: int = 1000) -> bool:
    """Check that the one-step image set is exactly the closed ``eps``-arc
    around ``f0(x)``: images stay inside it and cover it to grid resolution."""
    t = np.linspace(-1.0, 1.0, grid)
    c = f0_eval(m, x)
    images = (c + eps * t) % 1.0
    offsets = ((images - c + 0.5) % 1.0) - 0.5
    inside = bool(np.all(np.abs(offsets) <= eps * (1 + 1e-12)))
    offsets.sort()
    spacing = 2.0 * eps / (grid - 1)
    covers = (
        offsets[0] <= -eps + 1e-12
        and offsets[-1] >= eps - 1e-12
        and bool(np.all(np.diff(offsets) <= spacing * (1 + 1e-9)))
    )
    return inside and covers
