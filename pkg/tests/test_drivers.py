import numpy as np
import pytest

from historic_nds.circle import f0_eval
from historic_nds.drivers import (
    ConstantDriver,
    IidDriver,
    IidDriverState,
    NonInvertibleDriverError,
    RotationDriver,
    driver_kappas,
    iter_states,
    noise_block,
    one_step_image_equals_arc,
    reachability_check,
    reachable_images,
    splitmix64_block,
    splitmix64_next,
    to_noise,
    unit_interval,
)

# reference outputs of SplitMix64 seeded with 0
SPLITMIX_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_splitmix_reference_stream():
    s, out = 0, []
    for _ in range(3):
        s, z = splitmix64_next(s)
        out.append(z)
    assert out == SPLITMIX_SEED0


def test_vectorised_stream_matches_scalar():
    s = 123456789
    block = splitmix64_block(s, 200)
    for z in block:
        s, ref = splitmix64_next(s)
        assert int(z) == ref


def test_noise_mapping():
    assert unit_interval(0) == 0.0
    assert unit_interval((1 << 64) - 1) == 1.0 - 2.0**-53
    assert to_noise(0) == -1.0
    assert to_noise(1 << 63) == 0.0


def test_iid_driver_is_deterministic_and_bounded():
    d = IidDriver(seed=7)
    ks = [d.kappa(s) for s in iter_states(d, d.initial_state(), 1000)]
    assert ks == [d.kappa(s) for s in iter_states(d, d.initial_state(), 1000)]
    assert all(-1.0 <= k < 1.0 for k in ks)
    assert abs(np.mean(ks)) < 0.1
    assert ks != [IidDriver(seed=8).kappa(s) for s in iter_states(d, IidDriver(8).initial_state(), 1000)]


def test_iid_vectorised_kappas_match_stepping():
    d = IidDriver(seed=3)
    s = d.step(d.step(d.initial_state()))
    ref = [d.kappa(t) for t in iter_states(d, s, 500)]
    assert np.array_equal(driver_kappas(d, s, 500), ref)
    assert np.array_equal(noise_block(s.rng_state, 3), ref[1:4])


def test_iid_driver_neighborhoods():
    d = IidDriver()
    s = IidDriverState(0, 0.95)
    assert d.in_neighborhood(s, "p", 0.1)
    assert not d.in_neighborhood(s, "phat", 0.1)
    with pytest.raises(ValueError):
        d.in_neighborhood(s, "q", 0.1)
    assert not d.invertible and not hasattr(d, "step_back")
    with pytest.raises(ValueError):
        IidDriver(seed=-1)


def test_rotation_driver():
    r = RotationDriver(gamma=0.25)
    s = r.initial_state()
    assert r.kappa(s) == 1.0
    s2 = r.step(r.step(s))
    assert r.kappa(s2) == pytest.approx(-1.0)
    assert r.in_neighborhood(s2, "phat", 1e-9)
    assert r.step_back(r.step(0.3)) == pytest.approx(0.3)
    g = RotationDriver()
    assert np.allclose(driver_kappas(g, 0.1, 50), [g.kappa(t) for t in iter_states(g, 0.1, 50)])


def test_constant_driver():
    c = ConstantDriver(1.0)
    assert c.in_neighborhood(0, "p", 0.01) and not c.in_neighborhood(0, "phat", 0.5)
    assert np.all(c.kappas(0, 5) == 1.0)


def test_noninvertible_error_is_a_type_error():
    assert issubclass(NonInvertibleDriverError, TypeError)


@pytest.mark.parametrize("x", [0.1, 0.5, 0.8])
def test_one_step_image_is_the_arc(f0, x):
    assert one_step_image_equals_arc(f0, 0.1, x)


def test_reachability_small_n(f0):
    for n in (1, 2, 3):
        assert reachability_check(f0, 0.1, 0.4, n)
    imgs, g = reachable_images(f0, 0.1, 0.4, 1)
    assert g == 1001
    c = f0_eval(f0, 0.4)
    assert np.all(np.abs(((imgs - c + 0.5) % 1.0) - 0.5) <= 0.1 + 1e-12)


def test_reachability_centre_choice(f0):
    # after two steps the noise spread is centred on f0(f0(x)); the arc around
    # f0(x) is missed whenever the two centres are further apart than the spread
    x = 0.9
    assert reachability_check(f0, 0.01, x, 2, centre="forward")
    assert not reachability_check(f0, 0.01, x, 2, centre="previous")


def test_reachability_validation(f0):
    assert reachability_check(f0, 0.0, 0.3, 2)
    with pytest.raises(ValueError):
        reachability_check(f0, 0.1, 0.3, 9)
    with pytest.raises(ValueError):
        reachability_check(f0, -0.1, 0.3, 1)
