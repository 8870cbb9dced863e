"""Circle arithmetic, the unperturbed contraction ``f0``, its noisy fiber maps
and the test observable ``phi0``.

Points of the circle R/Z are plain floats kept in ``[0, 1)``. The
invariant interval ``I0 = [1/4, 3/4]`` is where ``f0`` is exactly affine with
slope 1/2; every historic orbit studied in this package lives there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

I0_LOW = 0.25
I0_HIGH = 0.75


def project(raw: float) -> float:
    """Canonical representative of ``raw`` modulo 1, in ``[0, 1)``."""
    if not math.isfinite(raw):
        raise ValueError(f"cannot project non-finite value {raw!r} onto the circle")
    value = raw % 1.0
    # -1e-20 % 1.0 rounds up to 1.0
    if value >= 1.0:
        value = 0.0
    return value


def circle_dist(x: float, y: float) -> float:
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


def in_i0(x: float) -> bool:
    return I0_LOW <= x <= I0_HIGH


def _hermite(t, y0, y1, m0, m1, h):
    t2 = t * t
    t3 = t2 * t
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + t) * h * m0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * m1
    )


def _hermite_deriv(t, y0, y1, m0, m1, h):
    t2 = t * t
    return (
        (6 * t2 - 6 * t) * y0
        + (3 * t2 - 4 * t + 1) * h * m0
        + (-6 * t2 + 6 * t) * y1
        + (3 * t2 - 2 * t) * h * m1
    ) / h


@dataclass(frozen=True)
class UnperturbedMap:
    """C^1 circle diffeomorphism that is ``x/2 + 1/4`` on ``I0``.

    Outside ``I0`` the map is a cubic Hermite blend on ``[3/4, 1]`` (values
    5/8 -> 1, slopes 1/2 -> ``source_multiplier``) and on ``[0, 1/4]``
    (values 0 -> 3/8, slopes ``source_multiplier`` -> 1/2). The unique source
    sits at 0 and the unique sink at 1/2.

    Monotonicity of each blend follows from the Fritsch-Carlson condition
    ``a**2 + b**2 <= 9`` on the endpoint-slope/secant ratios, which is checked
    at construction.
    """

    source_multiplier: float = 2.0
    _blends: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = self.source_multiplier
        if not (s > 1.0 and math.isfinite(s)):
            raise ValueError(f"source multiplier must be a finite value > 1, got {s}")
        secant = (3.0 / 8.0) / 0.25
        a, b = 0.5 / secant, s / secant
        if a * a + b * b > 9.0:
            raise ValueError(
                f"source multiplier {s} breaks Fritsch-Carlson monotonicity of the blend"
            )
        # (x_left, y_left, y_right, slope_left, slope_right, width)
        upper = (0.75, 0.625, 1.0, 0.5, s, 0.25)
        lower = (0.0, 0.0, 0.375, s, 0.5, 0.25)
        object.__setattr__(self, "_blends", (upper, lower))

    def _blend_for(self, x: float):
        upper, lower = self._blends
        return upper if x > I0_HIGH else lower

    def __call__(self, x: float) -> float:
        return f0_eval(self, x)


def f0_eval(m: UnperturbedMap, x: float) -> float:
    if I0_LOW <= x <= I0_HIGH:
        return 0.5 * x + 0.25
    x0, y0, y1, m0, m1, h = m._blend_for(x)
    return project(_hermite((x - x0) / h, y0, y1, m0, m1, h))


def f0_deriv(m: UnperturbedMap, x: float) -> float:
    if I0_LOW <= x <= I0_HIGH:
        return 0.5
    x0, y0, y1, m0, m1, h = m._blend_for(x)
    return _hermite_deriv((x - x0) / h, y0, y1, m0, m1, h)


@dataclass(frozen=True)
class FiberMap:
    """The perturbed map ``f0 + epsilon * kappa (mod 1)`` for one noise value.

    No range validation happens here so that the verification suite can
    probe deliberately broken noise levels; :class:`historic_nds.cocycle.NDS`
    enforces ``0 < epsilon < 1/8``.
    """

    epsilon: float
    kappa: float


def fiber_apply(f: FiberMap, m: UnperturbedMap, x: float) -> float:
    if abs(f.kappa) > 1.0:
        raise ValueError(f"kappa must lie in [-1, 1], got {f.kappa}")
    return project(f0_eval(m, x) + f.epsilon * f.kappa)


def fixed_point(f: FiberMap) -> float:
    """Unique fixed point of the fiber map restricted to ``I0``."""
    if not 0.0 <= f.epsilon < 0.125:
        raise ValueError(f"fixed point inside I0 needs 0 <= epsilon < 1/8, got {f.epsilon}")
    return 0.5 + 2.0 * f.epsilon * f.kappa


def affine_step(x, epsilon, kappa):
    """Fiber map on ``I0`` without reduction mod 1; generic over number types."""
    return x * 0.5 + 0.25 + epsilon * kappa


@dataclass(frozen=True)
class ObservableSpec:
    """Tent observable equal to 1 near ``x_p`` and 0 near ``x_phat``.

    ``phi0`` is 1 on the closed ``rho0``-ball around ``x_p``, 0 on the closed
    ``rho0``-ball around ``x_phat``, and interpolates linearly in circle
    distance to the two balls elsewhere.
    """

    x_p: float
    x_phat: float
    rho0: float

    def __post_init__(self):
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if circle_dist(self.x_p, self.x_phat) <= 2.0 * self.rho0:
            raise ValueError("the two rho0-balls must be disjoint")

    @classmethod
    def from_noise(cls, epsilon: float, kappa_p: float = 1.0, kappa_phat: float = -1.0):
        """Observable built from the two saddle noise values, with
        ``rho0 = epsilon * |kappa_p - kappa_phat| / 2``."""
        return cls(
            x_p=fixed_point(FiberMap(epsilon, kappa_p)),
            x_phat=fixed_point(FiberMap(epsilon, kappa_phat)),
            rho0=epsilon * abs(kappa_p - kappa_phat) / 2.0,
        )

    def __call__(self, x: float) -> float:
        return phi0(self, x)


def phi0(spec: ObservableSpec, x: float) -> float:
    gp = circle_dist(x, spec.x_p) - spec.rho0
    if gp <= 0.0:
        return 1.0
    gq = circle_dist(x, spec.x_phat) - spec.rho0
    if gq <= 0.0:
        return 0.0
    return gq / (gp + gq)


def phi0_array(spec: ObservableSpec, x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`phi0`."""
    x = np.asarray(x, dtype=float)

    def dist(a, b):
        d = np.abs(a - b) % 1.0
        return np.minimum(d, 1.0 - d)

    gp = dist(x, spec.x_p) - spec.rho0
    gq = dist(x, spec.x_phat) - spec.rho0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(gp <= 0.0, 1.0, np.where(gq <= 0.0, 0.0, gq / (gp + gq)))
    return out


def nu0_for(rho0: float) -> int:
    """Smallest positive integer ``nu`` with ``2**-nu <= rho0 / 3``."""
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    nu = 1
    while 2.0 ** -nu > rho0 / 3.0:
        nu += 1
    return nu
