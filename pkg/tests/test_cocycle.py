import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from historic_nds import NDS, BowenDriver, IidDriver, NewhouseDriver, RotationDriver
from historic_nds.blocks import ItineraryBlock
from historic_nds.circle import UnperturbedMap, circle_dist
from historic_nds.cocycle import (
    EXPLICIT_PREFIX,
    NAIVE_BUDGET,
    BirkhoffAccumulator,
    iterate_blocks,
    iterate_naive,
    lemma1_check,
    run_constant,
    trapped_implies_V,
    unit_blocks,
)
from historic_nds.drivers import ConstantDriver

F0 = UnperturbedMap()


def _drivers(newhouse_params):
    return [
        BowenDriver(),
        NewhouseDriver(newhouse_params),
        IidDriver(seed=11),
        RotationDriver(),
    ]


def test_epsilon_range():
    for eps in (0.0, 0.125, -0.1):
        with pytest.raises(ValueError):
            NDS(F0, eps)


def test_zero_steps_is_identity(nds):
    nds = NDS(F0, 0.1, IidDriver())
    rec = iterate_naive(nds, nds.driver.initial_state(), 0.37, 0)
    assert rec.points == (0.37,)


def test_sink_is_constant_under_zero_noise():
    nds = NDS(F0, 0.1, ConstantDriver(0.0))
    rec = iterate_naive(nds, 0, 0.5, 100, trace=True)
    assert set(rec.points) == {0.5}


def test_naive_budget():
    nds = NDS(F0, 0.1, ConstantDriver(0.0))
    with pytest.raises(ValueError):
        iterate_naive(nds, 0, 0.5, NAIVE_BUDGET + 1)
    with pytest.raises(ValueError):
        iterate_naive(nds, 0, 0.5, 10, checkpoints=[11])


def test_block_closed_form_example():
    nds = NDS(F0, 0.1)
    x, _, _ = iterate_blocks(nds, [ItineraryBlock("p", 1.0, 10)], 0.5)
    assert x == pytest.approx(0.7 + 2.0**-10 * (0.5 - 0.7), abs=1e-15)
    assert x == pytest.approx(0.6998047, abs=1e-7)
    naive = iterate_naive(NDS(F0, 0.1, ConstantDriver(1.0)), 0, 0.5, 10)
    assert x == naive.points[-1]


def test_empty_block_and_fixed_point():
    nds = NDS(F0, 0.1)
    assert iterate_blocks(nds, [ItineraryBlock("p", 1.0, 0)], 0.4)[0] == 0.4
    assert iterate_blocks(nds, [ItineraryBlock("p", 1.0, 10**12)], 0.7)[0] == 0.7


def test_blocks_need_a_start_in_i0():
    with pytest.raises(ValueError):
        iterate_blocks(NDS(F0, 0.1), [], 0.1)


def test_long_run_lands_on_fixed_point_with_exact_sum(phi):
    nds = NDS(F0, 0.1)
    m = 10**15
    acc = BirkhoffAccumulator()
    x = run_constant(nds, 0.5, 1.0, m, acc, phi)
    assert x == pytest.approx(0.7, abs=1e-15)
    assert acc.steps == m
    assert acc.exact == m - EXPLICIT_PREFIX  # phi0 = 1 at the fixed point
    assert 0 < acc.approx <= EXPLICIT_PREFIX


@pytest.mark.parametrize("which", range(4))
def test_blocks_match_naive_on_all_drivers(newhouse_params, phi, which):
    driver = _drivers(newhouse_params)[which]
    nds = NDS(F0, 0.1, driver)
    n = 20_000
    s = driver.initial_state()
    cps = [1, 999, 5000, n]
    naive = iterate_naive(nds, s, 0.5, n, cps, phi)
    if isinstance(driver, (BowenDriver, NewhouseDriver)):
        blocks = driver.blocks(0.5, 20) if isinstance(driver, BowenDriver) else driver.blocks(30)
    else:
        blocks = unit_blocks(driver, s, n)
    x, acc, recs = iterate_blocks(nds, blocks, 0.5, phi, cps)
    for r, p, total in zip(recs, naive.points, naive.sums):
        assert abs(r.point - p) <= 1e-12
        assert abs(r.birkhoff.total - total) <= 1e-9 * r.n


def test_cocycle_identity_bitwise():
    nds = NDS(F0, 0.1, IidDriver(seed=5))
    s = nds.driver.initial_state()
    whole = iterate_naive(nds, s, 0.31, 500, trace=True)
    for m in (1, 17, 250, 499):
        first = iterate_naive(nds, s, 0.31, m)
        rest = iterate_naive(nds, first.final_state, first.points[-1], 500 - m)
        assert rest.points[-1] == whole.points[-1]


@settings(max_examples=100, deadline=None)
@given(st.floats(0.25, 0.75), st.floats(0.25, 0.75), st.integers(0, 40), st.integers(0, 2**32))
def test_contraction_is_exactly_one_half(x, y, n, seed):
    nds = NDS(F0, 0.1, IidDriver(seed))
    s = nds.driver.initial_state()
    fx = iterate_naive(nds, s, x, n).points[-1]
    fy = iterate_naive(nds, s, y, n).points[-1]
    assert abs(circle_dist(fx, fy) - 2.0**-n * circle_dist(x, y)) <= 1e-12


def test_constant_driver_is_pure_contraction():
    nds = NDS(F0, 0.1, ConstantDriver(0.3))
    for n in (0, 1, 5, 30):
        lhs, rhs, ok = lemma1_check(nds, 0, 0.25, 0.3, n)
        assert ok and lhs <= 2.0**-n * 0.5 + 1e-15


def test_lemma1_fuzz_small():
    rng = random.Random(1)
    nds = NDS(F0, 0.1, IidDriver(rng.getrandbits(64)))
    s = nds.driver.initial_state()
    for _ in range(500):
        assert lemma1_check(nds, s, rng.uniform(0.25, 0.75), rng.uniform(-1, 1), rng.randint(0, 60))[2]
        s = nds.driver.step(s)
    with pytest.raises(ValueError):
        lemma1_check(nds, s, 0.1, 0.0, 3)


def _bowen_trapped(nu, n):
    d = BowenDriver()
    idx = []
    for b in d.blocks(0.5, 12, nu):
        if b.trapped and b.label == "p":
            idx.extend(j for j in range(b.start, b.stop) if j < n)
    return idx


def test_trapped_times_sit_near_the_p_fixed_point(phi):
    nds = NDS(F0, 0.1, BowenDriver())
    n = 20_000
    orbit = iterate_naive(nds, nds.driver.initial_state(), 0.5, n, trace=True).points
    idx = _bowen_trapped(5, n)
    assert len(idx) >= 1000
    assert trapped_implies_V(nds, phi, orbit, idx, "p")
    assert trapped_implies_V(nds, phi, orbit, [], "p")


def test_trapping_needs_a_long_enough_memory(phi):
    # with nu = 0 the first step inside the p box still carries the phat history
    nds = NDS(F0, 0.1, BowenDriver())
    n = 20_000
    orbit = iterate_naive(nds, nds.driver.initial_state(), 0.5, n, trace=True).points
    assert not trapped_implies_V(nds, phi, orbit, _bowen_trapped(0, n), "p")


def test_accumulator_merge_is_associative():
    a = BirkhoffAccumulator(3, Fraction(1, 3), 0.25)
    b = BirkhoffAccumulator(5, Fraction(2, 7), 0.5)
    c = BirkhoffAccumulator(2, Fraction(0), 1.0)
    assert ((a + b) + c) == (a + (b + c))
    assert a.scaled(3) == a + a + a
    assert (a + b).average() == pytest.approx((1 / 3 + 0.25 + 2 / 7 + 0.5) / 8)
    with pytest.raises(ZeroDivisionError):
        BirkhoffAccumulator().average()
