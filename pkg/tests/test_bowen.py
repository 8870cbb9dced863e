import math

import pytest
from mpmath import mp
from scipy.integrate import solve_ivp

from historic_nds.blocks import PrecisionBudgetError
from historic_nds.bowen import (
    MAX_J,
    BowenDriver,
    BowenParams,
    Region,
    advance,
    block_stream,
    crossing_times,
    delta_window,
    flow_in_neighborhood,
    initial_state,
    local_coordinates,
    predicted_constants,
    saddle_passage,
    saddle_window,
    stepping_itinerary,
    window_ratio,
)

P = BowenParams()


def test_predicted_constants_defaults():
    pc = predicted_constants(P)
    assert (pc.sigma1, pc.sigma2) == (2.0, 2.0)
    assert pc.lambda1 == pytest.approx(1 / 3)
    assert pc.lambda2 == pytest.approx(2 / 3)


def test_predicted_constants_asymmetric():
    pc = predicted_constants(BowenParams(alpha_plus=1, alpha_minus=3, beta_plus=1.5, beta_minus=2))
    assert pc.sigma1 == 2.0 and pc.sigma2 == 2.0
    pc = predicted_constants(BowenParams(alpha_plus=1, alpha_minus=4, beta_plus=1, beta_minus=2))
    assert pc.lambda1 == pytest.approx(1 / 3) and pc.lambda2 == pytest.approx(0.8)


def test_non_attracting_cycle_rejected():
    with pytest.raises(ValueError):
        BowenParams(alpha_plus=2, alpha_minus=1, beta_plus=2, beta_minus=1)
    with pytest.raises(ValueError):
        BowenParams(initial_offset=0.6)
    with pytest.raises(ValueError):
        BowenParams(tube_contraction=1.5)


@pytest.mark.parametrize("h,e_u,e_s", [(0.1, 1.0, 2.0), (0.01, 2.0, 1.0), (0.3, 1.5, 1.5)])
def test_saddle_passage_matches_ode(h, e_u, e_s):
    box = 0.5

    def rhs(t, y):
        return [e_u * y[0], -e_s * y[1]]

    def leave(t, y):
        return y[0] - box

    leave.terminal = True
    sol = solve_ivp(rhs, (0, 100), [h, box], events=leave, rtol=1e-12, atol=1e-14)
    T, s_exit = saddle_passage(h, e_u, e_s, box)
    assert T == pytest.approx(sol.t_events[0][0], rel=1e-9)
    assert s_exit == pytest.approx(sol.y_events[0][0][1], rel=1e-7)


def test_saddle_passage_rejects_bad_offset():
    with pytest.raises(ValueError):
        saddle_passage(0.6, 1, 1, 0.5)


def test_saddle_window():
    T, _ = saddle_passage(1e-6, 1.0, 2.0, 0.5)
    start, end = saddle_window(T, 1.0, 2.0, 0.5, 0.05)
    assert start == pytest.approx(math.log(10) / 2)
    assert end == pytest.approx(T - math.log(10))
    assert saddle_window(0.5, 1.0, 1.0, 0.5, 0.05) is None


def test_crossing_time_ratios_at_25():
    cs = crossing_times(P, 26)
    rec, nxt = cs.records[24], cs.records[25]
    with mp.workdps(60):
        assert abs(float(rec.T_p / rec.T_phat) - 2) <= 0.01
        assert abs(float(nxt.T_phat / rec.T_p) - 2) <= 0.01


def test_schedules_are_increasing_and_interleaved():
    cs = crossing_times(P, 25)
    n1, n2 = cs.n1, cs.n2
    assert all(a < b for a, b in zip(n1, n2))
    assert all(b < a for a, b in zip(n1[1:], n2))
    assert 1e14 < n2[-1] < 1e16


def test_crossing_time_budget():
    with pytest.raises(PrecisionBudgetError):
        crossing_times(P, MAX_J + 1)
    with pytest.raises(ValueError):
        crossing_times(P, 0)


@pytest.mark.parametrize("delta", [0.05, 0.15])
def test_window_dominance(delta):
    cs = crossing_times(P, 30)
    for target in ("p", "phat"):
        assert window_ratio(cs.records[29], P, delta, target) >= 0.99
    assert delta_window(cs.records[0], P, delta) is not None


def test_advance_round_trip():
    s0 = initial_state(P)
    s = advance(P, s0, 123.4)
    back = advance(P, s, -100.0)
    fwd = advance(P, s0, 23.4)
    assert back.region == fwd.region
    assert back.entry_time == pytest.approx(fwd.entry_time, abs=1e-9)
    assert back.entry_log == pytest.approx(fwd.entry_log, rel=1e-12)
    # with c = 1 the past is defined forever; a contracting tube ends it
    assert advance(P, s0, -50.0).time == -50.0
    q = BowenParams(tube_contraction=0.5)
    with pytest.raises(ValueError):
        advance(q, initial_state(q), -50.0)


def test_driver_step_back_inverts_step():
    d = BowenDriver()
    s = d.initial_state()
    for _ in range(40):
        s = d.step(s)
    t = d.step_back(d.step(s))
    assert t.region == s.region and t.time == pytest.approx(s.time)


def test_local_coordinates_track_the_linear_flow():
    s = advance(P, initial_state(P), 0.5)
    u, v = local_coordinates(P, s)
    assert u == pytest.approx(0.1 * math.exp(0.5))
    assert v == pytest.approx(0.5 * math.exp(-1.0))


def test_neighborhood_membership():
    s = advance(P, initial_state(P), 1.0)
    assert flow_in_neighborhood(P, s, "p", 0.5)
    assert not flow_in_neighborhood(P, s, "phat", 0.5)
    # u = 0.1 e, v = 0.5 e^-2: inside the 0.3 ball, outside the 0.2 ball
    assert flow_in_neighborhood(P, s, "p", 0.3)
    assert not flow_in_neighborhood(P, s, "p", 0.2)


def test_block_stream_matches_stepping():
    J = 6
    blocks = list(block_stream(P, 0.5, J))
    n = blocks[-1].stop
    assert [b.start for b in blocks[1:]] == [b.stop for b in blocks[:-1]]
    oracle = stepping_itinerary(P, n)
    units = [(b.label, b.kappa) for b in blocks for _ in range(b.length)]
    assert len(units) == n
    assert [u[0] for u in units] == [o[0] for o in oracle]
    assert max(abs(u[1] - o[1]) for u, o in zip(units, oracle)) <= 1e-9


def test_block_stream_trapped_flags_follow_stepping():
    J, delta, nu = 5, 0.15, 2
    d = BowenDriver()
    blocks = list(d.blocks(delta, J, nu))
    s = d.initial_state()
    run = {"p": 0, "phat": 0}
    for b in blocks:
        for _ in range(b.length):
            for t in run:
                run[t] = run[t] + 1 if d.in_neighborhood(s, t, delta) else 0
            expected = run["p"] > nu if b.label == "p" else run["phat"] > nu
            assert b.trapped == (expected and b.label != "transit")
            s = d.step(s)


def test_region_metadata():
    assert Region.BOX_P.is_box and not Region.TUBE_TO_P.is_box
    assert Region.TUBE_TO_PHAT.label == "transit"
