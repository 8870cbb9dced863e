"""Historic behaviour of nonautonomous circle contractions driven by historic
base dynamics, with exact long-horizon Birkhoff averages."""

__version__ = "0.1.0"

from .circle import ObservableSpec, UnperturbedMap, fixed_point, phi0  # noqa: E402
from .cocycle import NDS, BirkhoffAccumulator, iterate_blocks, iterate_naive  # noqa: E402
from .drivers import IidDriver, NonInvertibleDriverError, RotationDriver  # noqa: E402
from .bowen import BowenDriver, BowenParams  # noqa: E402
from .newhouse import ItineraryParams, NewhouseDriver, build_schedule  # noqa: E402

__all__ = [
    "BirkhoffAccumulator",
    "BowenDriver",
    "BowenParams",
    "IidDriver",
    "ItineraryParams",
    "NDS",
    "NewhouseDriver",
    "NonInvertibleDriverError",
    "ObservableSpec",
    "RotationDriver",
    "UnperturbedMap",
    "build_schedule",
    "fixed_point",
    "iterate_blocks",
    "iterate_naive",
    "phi0",
]
