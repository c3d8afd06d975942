import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinecover.errors import AllMachinesDiscarded, ConstraintViolation, InvalidInstance, NormOutOfRange
from onlinecover.model import Instance, ScaledInstance, beta_for, lp_norm, lp_objective, preprocess, validate_feasibility


def test_preprocess_drops_and_clamps():
    inst = Instance([10, 200, 50], [[1, 1, 1]], 1, 100, 1)
    sc = preprocess(inst)
    assert sc.kept_machines == (0, 2)
    np.testing.assert_allclose(sc.unclamped_costs, [0.2, 1.0])
    np.testing.assert_array_equal(sc.scaled_costs, [1.0, 1.0])
    np.testing.assert_array_equal(sc.initial_x, [1.0, 1.0])
    assert sc.beta_scale == pytest.approx(2 * math.log(2) / 40, rel=1e-12)
    assert sc.beta_scale == pytest.approx(0.03466, abs=1e-5)


def test_single_machine_identity_scale():
    sc = preprocess(Instance([7.0], [[3.0]], 1, 7.0, 2.0))
    assert sc.scaled_costs.tolist() == [1.0]
    assert sc.initial_x.tolist() == [1.0]


def test_all_discarded():
    with pytest.raises(AllMachinesDiscarded):
        preprocess(Instance([30, 50], [[1, 1]], 1, 10, 1))


def test_instance_validation():
    with pytest.raises(InvalidInstance):
        Instance([1, 1], [[None, None]], 1, 1, 1)
    with pytest.raises(NormOutOfRange):
        Instance([1, 1], [[1, 1]], 2, 1, 1)
    with pytest.raises(NormOutOfRange):
        Instance([1, 1], [[1, 1]], 0.5, 1, 1)
    with pytest.raises(InvalidInstance):
        Instance([1, 1], [[1, 1]], 1, 0, 1)
    Instance([1] * 4, [[1] * 4], 2, 1, 1)  # p = log2 4 is accepted
    Instance([1, 1], [[1, 1]], 3, 1, 1, allow_large_p=True)


def test_unschedulable_kept_as_inf():
    sc = preprocess(Instance([1, 1], [[None, 2.0]], 1, 2, 1))
    assert math.isinf(sc.scaled_proc[0, 0])
    assert math.isfinite(sc.scaled_proc[0, 1])


def test_scaling_of_processing_times():
    inst = Instance([1, 2, 4, 8], [[1, 2, 3, 4]], 2, 8, 5)
    sc = preprocess(inst)
    f = beta_for(4, 2) ** 0.5 / 5
    np.testing.assert_allclose(sc.scaled_proc, [[f, 2 * f, 3 * f, 4 * f]], rtol=1e-12)
    np.testing.assert_allclose(sc.scaled_costs, [1, 1, 2, 4])
    np.testing.assert_allclose(sc.initial_x, [1, 1, 0.25, 0.25])


def test_json_roundtrip(tmp_path):
    inst = Instance([1, 2], [[1, None], [2, 3]], 1, 3, 4, guarantee_source="certified")
    d = inst.to_json()
    assert d["proc"][0][1] is None
    back = Instance.from_json(json.loads(json.dumps(d)))
    assert back.to_json() == d
    inst.save(tmp_path / "i.json")
    assert Instance.load(tmp_path / "i.json").to_json() == d
    bad = dict(d, n=5)
    with pytest.raises(InvalidInstance):
        Instance.from_json(bad)


def test_lp_objective_examples():
    sc = ScaledInstance.direct([1], [[2]], 2)
    assert lp_objective([0.5], [[0.5]], sc) == pytest.approx(4.0)
    assert lp_objective([0.5], [[0.0]], sc) == 0.0
    sc2 = ScaledInstance.direct([1, 1], [[2, 4]], 1)
    assert lp_objective([1, 1], [[0.5, 0.5]], sc2) == pytest.approx(6.0)


def test_lp_objective_rejects_overassignment():
    sc = ScaledInstance.direct([1], [[2]], 2)
    with pytest.raises(ConstraintViolation):
        lp_objective([0.5], [[0.6]], sc)
    assert lp_objective([0.5], [[0.6]], sc, fraction_cap=2.0) > 0


def test_validate_feasibility():
    sc = ScaledInstance.direct([1, 2], [[1, 1]], 1)
    assert validate_feasibility([1, 0.5], [[0.5, 0.5]], sc, 10) == []
    v = validate_feasibility([0.5, 0.5], [[0.6, 0.4]], sc, 10)
    assert [(x.kind, x.index) for x in v] == [("fraction", (0, 0))]
    v = validate_feasibility([1, 1], [[0.5, 0.4]], sc, 10)
    assert v[0].kind == "covering" and v[0].index == (0,) and v[0].amount == pytest.approx(0.1)
    v = validate_feasibility([1, 1], [[1, 0]], sc, 2)
    assert v[0].kind == "cost"


@settings(max_examples=60, deadline=None)
@given(
    costs=st.lists(st.floats(0.01, 100), min_size=1, max_size=6),
    C=st.floats(0.5, 200),
    p=st.sampled_from([1.0, 1.5, 2.0]),
)
def test_preprocess_invariants(costs, C, p):
    inst = Instance(costs, [[1.0] * len(costs)], p, C, 1.0, allow_large_p=True)
    if min(costs) > C:
        with pytest.raises(AllMachinesDiscarded):
            preprocess(inst)
        return
    sc = preprocess(inst)
    mk = sc.m
    assert mk == sum(c <= C for c in costs)
    assert np.all(sc.scaled_costs >= 1) and np.all(sc.scaled_costs <= mk * (1 + 1e-12))
    np.testing.assert_array_equal(sc.initial_x, np.where(sc.scaled_costs == 1, 1.0, 1.0 / mk))
    assert sc.beta_scale == pytest.approx(mk * math.log(mk) / (40 * p) ** p, rel=1e-12, abs=0)


def test_lp_norm():
    assert lp_norm([3, 4], 2) == pytest.approx(5)
    assert lp_norm([1, 2], 1) == 3
