import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adarf import engine
from adarf.cost import CostParams, calibrate_defaults, estimate, estimate_batch
from adarf.engine import InferenceTrace, Policy, PolicyConfig

# freq 1 MHz and 1000 mW make one cycle cost exactly one microjoule
UNIT = CostParams(1, 1, 1, 1, 1, 1, power_mw=1000.0, freq_mhz=1.0)


def trace(trees=0, nodes=0, accums=0, evals=0, policy=Policy.AGG_SM):
    return InferenceTrace(trees, nodes, accums, evals, False, 0, policy)


def test_zero_trace_costs_fixed_overhead():
    p = calibrate_defaults()
    rep = estimate(trace(), 2, p)
    assert rep.cycles == p.cycles_fixed
    assert rep.traversal == rep.accumulation == rep.policy == 0


def test_unit_params_sum_counters():
    # 1 fixed + 7 nodes + 3 trees + 6 accumulations + 2 evals * 2 classes
    rep = estimate(trace(trees=3, nodes=7, accums=6, evals=2), 2, UNIT)
    assert rep.cycles == 1 + 7 + 3 + 6 + 4
    assert rep.energy_uj == pytest.approx(rep.cycles)


def test_breakdown_sums_to_cycles():
    rep = estimate(trace(5, 17, 20, 4), 4, calibrate_defaults())
    assert sum(rep.breakdown.values()) == pytest.approx(rep.cycles)


def test_energy_dimensional_identity():
    p = CostParams(freq_mhz=100.0, power_mw=20.0)
    rep = estimate(trace(4, 12, 8, 3), 2, p)
    # cycles / Hz = seconds; seconds * W = J; J * 1e6 = uJ
    assert rep.energy_uj == pytest.approx(rep.cycles / 100e6 * 20e-3 * 1e6)


def test_fewer_policy_checks_cost_less_at_equal_trees(hand_qf):
    xq = hand_qf.quantize_input([0.8, 0.2])
    p = calibrate_defaults()
    _, t1 = engine.adaptive_infer(hand_qf, xq, PolicyConfig("agg-sm", alpha=0.25, batch=1))
    _, t2 = engine.adaptive_infer(hand_qf, xq, PolicyConfig("agg-sm", alpha=0.25, batch=2))
    assert t1.trees_executed == t2.trees_executed == 2
    assert (t1.policy_evaluations, t2.policy_evaluations) == (2, 1)
    assert estimate(t1, 2, p).policy >= estimate(t2, 2, p).policy


def test_policy_scan_costs_by_kind():
    p = CostParams(cycles_policy_max=2, cycles_policy_sm=7)
    assert p.policy_cycles_per_class(Policy.AGG_MAX) == 2
    assert p.policy_cycles_per_class(Policy.AGG_SM) == 7
    assert p.policy_cycles_per_class(Policy.LAST_SM) == 7


def test_defaults_clock_and_positive():
    p = calibrate_defaults()
    assert p.freq_mhz == 205.0
    assert all(getattr(p, f.name) > 0 for f in dataclasses.fields(p) if f.name != "description")
    assert "estimate" in p.description.lower()


def test_full_forty_tree_energy_order_of_magnitude(binary_desk):
    _, test, _, qf = binary_desk
    res = engine.run_batch(qf, qf.quantize_input(test.features))
    energy = calibrate_defaults().energy_uj(estimate_batch(res, calibrate_defaults()).mean())
    assert 0.048 / 10 <= energy <= 0.048 * 10


def test_batch_estimate_matches_per_trace():
    from conftest import two_blobs
    from adarf.quantize import quantize_forest
    from adarf.trainer import TrainConfig, train_forest

    train, test = two_blobs(200, 50, seed=3)
    qf = quantize_forest(train_forest(train, TrainConfig(8, 3, rng_seed=1)), train)
    res = engine.run_batch(qf, qf.quantize_input(test.features), PolicyConfig("agg-sm", alpha=1.0, batch=2))
    p = calibrate_defaults()
    per = [estimate(res.trace(i), 2, p).cycles for i in range(len(res))]
    np.testing.assert_allclose(estimate_batch(res, p), per)


def test_key_value_file(tmp_path):
    path = tmp_path / "mcu.cfg"
    path.write_text("# measured on a dev board\ncycles_per_node = 11\n\nfreq_mhz=100  # slow clock\n")
    p = CostParams.from_file(path)
    assert p.cycles_per_node == 11 and p.freq_mhz == 100 and p.power_mw == 5.0
    assert CostParams.from_text(p.to_text()) == dataclasses.replace(p, description="")


@pytest.mark.parametrize("text", ["bogus = 1", "cycles_per_node 3", "cycles_per_node = fast", "freq_mhz = 0", "power_mw = -1"])
def test_bad_config_rejected(text):
    with pytest.raises(ValueError):
        CostParams.from_text(text)


def test_negative_counter_rejected():
    with pytest.raises(ValueError):
        estimate(trace(nodes=-1), 2, UNIT)


COUNTERS = ("trees_executed", "nodes_visited", "score_accumulations", "policy_evaluations")


@given(
    base=st.tuples(*[st.integers(0, 500)] * 4),
    which=st.sampled_from(COUNTERS),
    extra=st.integers(0, 500),
    m=st.integers(2, 8),
)
def test_cycles_monotone_in_each_counter(base, which, extra, m):
    t = trace(*base)
    bigger = dataclasses.replace(t, **{which: getattr(t, which) + extra})
    p = calibrate_defaults()
    assert estimate(bigger, m, p).cycles >= estimate(t, m, p).cycles
