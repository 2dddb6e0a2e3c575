import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adarf import engine
from adarf.cost import calibrate_defaults
from adarf.forest import accuracy
from adarf.report import COLUMNS, parse_json, render, report
from adarf.sweep import (
    ParetoPoint,
    SweepSpec,
    dominates,
    pareto_front,
    reduced_rf_baseline,
    run_sweep,
)

PARAMS = calibrate_defaults()


def test_unreachable_threshold_is_full_forest(binary_desk):
    _, test, _, qf = binary_desk
    res = run_sweep(qf, test, SweepSpec("agg-sm", thresholds=(1e9,)), PARAMS)
    (p,) = res.points
    assert p.avg_trees == qf.num_trees
    assert p.accuracy == res.full.accuracy


@pytest.mark.parametrize("B", [1, 2, 4])
def test_zero_threshold_stops_at_first_batch(binary_desk, B):
    _, test, _, qf = binary_desk
    res = run_sweep(qf, test, SweepSpec("agg-sm", thresholds=(0.0,), batches=(B,)), PARAMS)
    table = engine.leaf_table(qf, qf.quantize_input(test.features))
    first = qf.leaves[table.leaf_ids[:, :B]].astype(np.int64).sum(axis=1)
    unequal = first[:, 0] != first[:, 1]
    run = engine.replay(qf, table, engine.PolicyConfig("agg-sm", alpha=0.0, batch=B))
    assert (run.trees[unequal] == B).all()
    if unequal.all():
        assert res.points[0].avg_trees == B


def test_one_point_per_grid_cell(binary_desk):
    _, test, _, qf = binary_desk
    spec = SweepSpec("agg-max", thresholds=(1.0, 5.0, 9.0), batches=(1, 2))
    res = run_sweep(qf, test, spec, PARAMS)
    assert [(p.batch, p.alpha) for p in res.points] == [(b, a) for b in (1, 2) for a in (1.0, 5.0, 9.0)]


def test_default_grids():
    spec = SweepSpec()
    grid = spec.threshold_grid(40)
    assert len(grid) == 64 and grid[0] == 0.0 and grid[-1] == 40.0
    eps = spec.eps_grid()
    assert len(eps) == 64 and all(0 <= lo <= hi <= 1 for lo, hi in eps)


@pytest.mark.parametrize("kwargs", [
    {"thresholds": ()}, {"batches": ()}, {"batches": (0,)}, {"drop_targets": (-0.1,)}, {"eps_pairs": ()},
    {"metric": "f1"},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SweepSpec(**kwargs)


def test_feature_mismatch(binary_desk, multiclass_desk):
    _, test, _, _ = binary_desk
    qf = multiclass_desk[3]
    with pytest.raises(ValueError):
        run_sweep(qf, test, SweepSpec(), PARAMS)


def test_drop_targets_measured_against_full_forest(binary_desk):
    _, test, _, qf = binary_desk
    res = run_sweep(qf, test, SweepSpec("agg-sm", drop_targets=(0.0, 0.005, 0.05)), PARAMS)
    for d, p in res.min_trees.items():
        assert p is not None and p.accuracy >= res.full.accuracy - d - 1e-12
        ok = [q for q in res.points if q.accuracy >= res.full.accuracy - d - 1e-12]
        assert p.avg_trees == min(q.avg_trees for q in ok)
        assert res.min_energy[d].avg_energy_uj == min(q.avg_energy_uj for q in ok)
    assert res.min_trees[0.05].avg_trees <= res.min_trees[0.0].avg_trees


def test_qwyc_sweep_uses_lattice(binary_desk):
    train, test, _, qf = binary_desk
    pairs = ((0.0, 1.0), (0.2, 0.8))
    res = run_sweep(qf, test, SweepSpec("qwyc", eps_pairs=pairs), PARAMS, calibration=train)
    assert [(p.eps_minus, p.eps_plus) for p in res.points] == list(pairs)
    assert res.points[0].accuracy == res.full.accuracy
    assert res.points[0].threshold == "0.0:1.0"


# Pareto filtering

points_st = st.lists(
    st.builds(
        lambda a, t: ParetoPoint("agg-sm", 1, a, a, t, 0.0, 0.0),
        st.sampled_from([0.5, 0.6, 0.7, 0.8, 0.9]),
        st.sampled_from([1.0, 2.0, 3.0, 4.0]),
    ),
    max_size=25,
)


@given(points_st)
def test_pareto_front_has_no_dominated_point(points):
    front = pareto_front(points)
    for p in front:
        assert not any(dominates(q, p) for q in points)
    # every non-dominated input point is represented
    for p in points:
        if not any(dominates(q, p) for q in points):
            assert any(q.accuracy == p.accuracy and q.avg_trees == p.avg_trees for q in front)


def test_pareto_front_on_sweep(multiclass_desk):
    _, test, _, qf = multiclass_desk
    res = run_sweep(qf, test, SweepSpec("agg-sm", metric="macro"), PARAMS)
    for p in res.pareto:
        assert not any(dominates(q, p, "macro") for q in res.points)
    assert all(0 <= p.avg_trees <= qf.num_trees and 0 <= p.accuracy <= 1 for p in res.points)


# static prefix baseline


def test_reduced_full_size_equals_full_forest(binary_desk):
    _, test, _, qf = binary_desk
    full = engine.predict(qf, qf.quantize_input(test.features))
    (p,) = reduced_rf_baseline(qf, test, [qf.num_trees], PARAMS)
    assert p.accuracy == accuracy(test.labels, full)
    assert p.avg_trees == qf.num_trees


def test_reduced_single_tree_not_better(binary_desk):
    _, test, _, qf = binary_desk
    one, full = reduced_rf_baseline(qf, test, [1, qf.num_trees], PARAMS)
    assert one.accuracy <= full.accuracy


def test_reduced_sizes_as_csv(binary_desk):
    _, test, _, qf = binary_desk
    pts = reduced_rf_baseline(qf, test, [1, 5, 10, 20, 40], PARAMS)
    lines = render(pts, "csv").splitlines()
    assert len(lines) == 6
    assert [ln.split(",")[1] for ln in lines[1:]] == ["1.0", "5.0", "10.0", "20.0", "40.0"]


def test_reduced_size_out_of_range(binary_desk):
    _, test, _, qf = binary_desk
    with pytest.raises(ValueError):
        reduced_rf_baseline(qf, test, [41], PARAMS)


# report


def _pt(**kw):
    base = dict(policy="agg-sm", batch=2, accuracy=0.9, macro_accuracy=0.85, avg_trees=7.25,
                avg_cycles=1234.5, avg_energy_uj=0.0301, alpha=1.5)
    base.update(kw)
    return ParetoPoint(**base)


def test_empty_csv_is_header_only():
    assert render([], "csv") == ",".join(COLUMNS) + "\n"


def test_one_point_one_row_eight_columns():
    lines = render([_pt()], "csv").splitlines()
    assert len(lines) == 2
    assert lines[1].split(",") == ["agg-sm", "1.5", "2", "0.9", "0.85", "7.25", "1234.5", "0.0301"]


def test_json_round_trip():
    pts = [_pt(), _pt(policy="qwyc", batch=1, alpha=None, eps_minus=0.1, eps_plus=0.9, accuracy=1 / 3)]
    assert parse_json(render(pts, "json")) == pts


def test_table_format_aligned():
    lines = render([_pt(), _pt(policy="agg-max")], "table").splitlines()
    assert lines[0].split() == list(COLUMNS)
    assert len({len(ln) for ln in lines}) == 1


def test_unknown_format():
    with pytest.raises(ValueError, match="unknown format"):
        render([_pt()], "xml")


def test_report_writes_file(tmp_path):
    out = tmp_path / "pts.json"
    text = report([_pt()], "json", out)
    assert out.read_text() == text and json.loads(text)[0]["B"] == 2


def test_sweep_csv_is_deterministic(binary_desk):
    _, test, _, qf = binary_desk
    spec = SweepSpec("agg-sm", batches=(1, 2))
    a = render(run_sweep(qf, test, spec, PARAMS).points, "csv")
    b = render(run_sweep(qf, test, spec, PARAMS, backend="numpy").points, "csv")
    assert a == b
