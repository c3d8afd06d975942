import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinecover.errors import InvariantBreach
from onlinecover.fractional import run_fractional
from onlinecover.model import ScaledInstance
from onlinecover.oracles import greedy_increment
from onlinecover.rounding import (
    RoundingState,
    assign_job_integer,
    default_alpha,
    open_blue_step,
    red_choice,
    rounding_report,
    run_rounding,
    z_values,
)


def state(m, alpha, seed=0, costs=None, proc=None, p=2.0):
    costs = costs or [1.0] * m
    proc = proc or [[1.0] * m]
    return RoundingState(costs, proc, p, alpha, seed)


def test_default_alpha():
    assert default_alpha(5, 10) == pytest.approx(48 * math.log(50))
    assert default_alpha(5, 10) == pytest.approx(187.78, abs=0.01)
    assert default_alpha(2, 2) == pytest.approx(66.54, abs=0.01)
    assert default_alpha(1, 1) == 0.0
    with pytest.raises(ValueError):
        state(1, default_alpha(1, 1))


class FixedRng:
    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


def test_open_probability_formula():
    s = state(1, 4.0)
    # (4 * 0.1) / (1 - 0.4) = 2/3: a draw just below opens, just above does not
    open_blue_step(s, [0.1], [0.2], FixedRng([2 / 3 - 1e-9]))
    assert s.blue_open == [True]
    s = state(1, 4.0)
    open_blue_step(s, [0.1], [0.2], FixedRng([2 / 3 + 1e-9]))
    assert s.blue_open == [False]


def test_open_capped_is_sure():
    s = state(1, 4.0)
    assert open_blue_step(s, [0.2], [0.3], FixedRng([])) == [0]
    assert s.blue_cost == 1.0


def test_open_invariant_breach():
    s = state(1, 4.0)
    with pytest.raises(InvariantBreach):
        open_blue_step(s, [0.3], [0.4])


def test_z_values():
    z = z_values([0.1, 0.0, 0.5], [0.05, 0.05, 0.5], 8)
    assert z[0] == pytest.approx(1.0)
    assert z[1] == 0.0
    assert math.isnan(z[2])
    assert z_values([0.1], [0.1], 8)[0] == pytest.approx(4 / 8)


def test_case1_forced():
    s = state(2, 2.0)
    s.blue_open = [True, False]
    d = assign_job_integer(s, [1.0, 0.2], [0.6, 0.4], 0)
    assert (d.machine, d.color, d.case) == (0, "blue", 1)


def test_case2_symmetric():
    picks = []
    for seed in range(2000):
        s = state(2, 4.0, seed)
        s.blue_open = [True, True]
        d = assign_job_integer(s, [0.2, 0.2], [0.5, 0.5], 0)
        assert d.case == 2
        picks.append(d.machine)
    assert abs(np.mean(picks) - 0.5) < 4 * 0.5 / math.sqrt(2000)


def test_case3_greedy():
    s = state(2, 4.0, proc=[[3.0, 2.0]])
    d = assign_job_integer(s, [0.2, 0.2], [0.5, 0.5], 0)
    assert (d.machine, d.color, d.case) == (1, "red", 3)
    assert s.red_open == [False, True] and s.red_cost == 1.0


def test_case1_closed_copy_is_breach():
    s = state(2, 2.0)
    with pytest.raises(InvariantBreach):
        assign_job_integer(s, [1.0, 0.2], [0.6, 0.4], 0)


@settings(max_examples=200, deadline=None)
@given(
    loads=st.lists(st.floats(0, 10), min_size=1, max_size=6),
    data=st.data(),
    p=st.sampled_from([1.0, 1.5, 2.0, 3.0]),
)
def test_red_choice_matches_oracle_greedy(loads, data, p):
    row = data.draw(st.lists(st.floats(0, 10), min_size=len(loads), max_size=len(loads)))
    assert red_choice(loads, row, p) == greedy_increment(np.array(loads), np.array(row), p)


def example_run(alpha=4.0, seed=0):
    sc = ScaledInstance.direct([2, 2.5, 3, 4, 5], np.array([[1, 2, 3, 2, 1], [2, 1, 1, 3, 2], [3, 3, 1, 1, 2]]) * 0.1, 2)
    fs = run_fractional(sc)
    return sc, fs, run_rounding(sc, fs.trajectory, alpha, seed)


def test_reproducible():
    a = example_run(seed=7)[2]
    b = example_run(seed=7)[2]
    assert a.assignment == b.assignment and a.blue_open == b.blue_open


def test_report_ledger():
    sc, fs, rs = example_run()
    rep = rounding_report(rs, {"potential": fs.phi})
    opened = [i for i in range(5) if rs.blue_open[i]]
    assert rep["blue_cost"] == pytest.approx(sum(sc.scaled_costs[i] for i in opened))
    assert rep["case1"] + rep["case2"] + rep["case3"] == 3
    assert rep["cost_bound"] == pytest.approx(5 * fs.phi)
    rs.blue_cost += 1
    with pytest.raises(InvariantBreach):
        rounding_report(rs)


def test_targets_open_at_assignment():
    for seed in range(200):
        _, _, rs = example_run(seed=seed)
        for d in rs.assignment:
            assert (rs.blue_open if d.color == "blue" else rs.red_open)[d.machine]


def test_blue_open_is_monotone():
    s = state(3, 4.0, seed=3)
    traj = [[0.05, 0.1, 0.2], [0.1, 0.1, 0.22], [0.2, 0.15, 0.24], [0.3, 0.2, 0.25]]
    prev = [0.0] * 3
    seen = [False] * 3
    for x in traj:
        open_blue_step(s, prev, x)
        assert all(b or not a for a, b in zip(seen, s.blue_open))
        seen = list(s.blue_open)
        prev = x
    assert s.blue_open[0] and s.blue_open[2]


def test_uses_run_stream_by_default():
    s = state(1, 4.0, seed=11)
    open_blue_step(s, [0.0], [0.1])
    expected = random.Random(11).random() < 0.4
    assert s.blue_open == [expected]
