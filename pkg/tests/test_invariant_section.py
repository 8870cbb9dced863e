import numpy as np
import pytest

from historic_nds import NDS, BowenDriver, IidDriver, NewhouseDriver, RotationDriver
from historic_nds.circle import UnperturbedMap
from historic_nds.drivers import ConstantDriver, NonInvertibleDriverError
from historic_nds.invariant_section import (
    SectionSample,
    average_transfer,
    contraction_probe,
    decay_check,
    invariance_residual,
    pullback,
    pullback_series,
)

F0 = UnperturbedMap()
NDS0 = NDS(F0, 0.1)


def _bowen_state(steps=300):
    d = BowenDriver()
    s = d.initial_state()
    for _ in range(steps):
        s = d.step(s)
    return d, s


def test_depth_zero_is_the_seed():
    assert pullback(NDS0, RotationDriver(), 0.2, 0, 0.4).value == 0.4


def test_constant_driver_converges_to_fixed_point():
    ys = pullback_series(NDS0, ConstantDriver(0.5), 0, 30, x0=0.25)
    for n, y in enumerate(ys):
        assert abs(y - 0.6) == pytest.approx(2.0**-n * 0.35, abs=1e-15)


@pytest.mark.parametrize("make", [lambda: (RotationDriver(), 0.37), _bowen_state])
def test_pullback_is_cauchy(make):
    d, w = make()
    ys = pullback_series(NDS0, d, w, 41)
    for n in range(41):
        assert abs(ys[n + 1] - ys[n]) <= 2.0**-n * 0.5 + 1e-15


def test_pullback_refuses_one_sided_driver():
    d = IidDriver()
    with pytest.raises(NonInvertibleDriverError):
        pullback(NDS0, d, d.initial_state(), 5)


def test_sample_must_lie_in_i0():
    with pytest.raises(ValueError):
        SectionSample(0, 0.9, 3)
    with pytest.raises(ValueError):
        pullback(NDS0, RotationDriver(), 0.1, 3, x0=0.9)


def test_invariance_residual_bounds():
    for d, w in ((RotationDriver(), 0.1), _bowen_state(),
                 (ConstantDriver(0.2), 0)):
        for n in (5, 20, 40):
            here = pullback(NDS0, d, w, n)
            there = pullback(NDS0, d, d.step(w), n)
            assert invariance_residual(NDS0, d, here, there) <= 2.0**-n * 0.5 + 1e-12
    with pytest.raises(ValueError):
        invariance_residual(NDS0, d, pullback(NDS0, d, w, 3), pullback(NDS0, d, w, 4))


def test_residual_decays_at_rate_one_half():
    d = RotationDriver()
    w = 0.21
    depths = np.arange(10, 41)
    # start both from the same point so the residual is a clean 2**-n signal
    res = [invariance_residual(NDS0, d, pullback(NDS0, d, w, n, 0.25),
                               pullback(NDS0, d, d.step(w), n, 0.25)) for n in depths]
    slope = np.polyfit(depths[:25], np.log2(res[:25]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.01)


def test_contraction_probe_examples():
    d = RotationDriver()
    states = [0.0, 0.3, 0.6]
    b1 = [0.4, 0.4, 0.4]
    assert contraction_probe(NDS0, d, states, b1, [0.5, 0.5, 0.5]) == pytest.approx(0.5, abs=1e-12)
    assert contraction_probe(NDS0, d, states, b1, [0.4, 0.45, 0.4]) == pytest.approx(0.5, abs=1e-12)
    r1 = contraction_probe(NDS0, ConstantDriver(1.0), [0], [0.3], [0.6])
    r2 = contraction_probe(NDS0, ConstantDriver(-1.0), [0], [0.3], [0.6])
    assert r1 == pytest.approx(0.5, abs=1e-12) and r2 == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        contraction_probe(NDS0, d, states, b1, b1)


def test_decay_rate_is_exactly_one_half():
    rep = decay_check(NDS0, RotationDriver(), 0.42, 0.3, 50)
    assert len(rep.ratios) == 50
    assert rep.within(1e-10)


def test_decay_from_distance_point_two():
    d = RotationDriver()
    y = pullback(NDS0, d, 0.1, 80).value
    rep = decay_check(NDS0, d, 0.1, y + 0.2 if y < 0.55 else y - 0.2, 10)
    assert rep.distances[10] == pytest.approx(0.2 * 2.0**-10, rel=1e-9)


def test_decay_on_the_section_stays_zero():
    d = ConstantDriver(0.5)
    rep = decay_check(NDS0, d, 0, 0.6, 10)
    # only the rounding of 0.6 to a double separates the two
    assert max(rep.distances) <= 1e-16


def test_decay_check_validation():
    with pytest.raises(ValueError):
        decay_check(NDS0, RotationDriver(), 0.1, 0.3, 30, depth=40)
    with pytest.raises(ValueError):
        decay_check(NDS0, RotationDriver(), 0.1, 0.9, 3)


def test_newhouse_driver_has_a_past(newhouse_params):
    d = NewhouseDriver(newhouse_params)
    rep = decay_check(NDS0, d, d.initial_state(), 0.7, 50)
    assert rep.within(1e-10)


def test_average_transfer_rotation():
    assert average_transfer(NDS0, RotationDriver(), 0.13, 0.3, 20_000) <= 0.01
