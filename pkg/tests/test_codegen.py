import json
import os
import re
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from adarf import engine
from adarf.codegen import export_c
from adarf.engine import PolicyConfig
from adarf.forest import Forest, TreeNode
from adarf.quantize import MAX_NODES, QuantizedForest, quantize_forest

from conftest import UNIT_SQUARE, hand_forest

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
FIXTURES = HERE / "fixtures"
REGEN = os.environ.get("ADARF_REGEN_GOLDENS") == "1"


def single_leaf_qf():
    return quantize_forest(Forest((TreeNode.leaf([0.25, 0.75]),), 2, 1, 1), np.array([[0.0], [1.0]]))


def hand_qf_fixture():
    return quantize_forest(hand_forest(), UNIT_SQUARE)


def small_qf():
    forest = Forest.load(FIXTURES / "small_forest.json")
    cal = json.loads((FIXTURES / "small_calibration.json").read_text())
    return quantize_forest(forest, np.array([cal["min"], cal["max"]]))


FIXTURE_FORESTS = {"single_leaf": single_leaf_qf, "hand": hand_qf_fixture, "small": small_qf}


def check_golden(name, text):
    path = GOLDEN / f"{name}.h"
    if REGEN:
        path.write_text(text)
    assert text == path.read_text(), f"{path.name} differs from export"


@pytest.mark.parametrize("name", sorted(FIXTURE_FORESTS))
def test_export_matches_golden(name):
    check_golden(name, export_c(FIXTURE_FORESTS[name](), prefix=name))


def parse_forest(text, prefix):
    P = prefix.upper()
    body = re.search(rf"{P}_FOREST\[{P}_N_NODES\] = \{{(.*?)\n\}};", text, re.S).group(1)
    return [tuple(map(int, m)) for m in re.findall(r"\{(-?\d+), (-?\d+), (\d+)\}", body)]


@pytest.mark.parametrize("name", sorted(FIXTURE_FORESTS))
def test_exported_structure(name):
    qf = FIXTURE_FORESTS[name]()
    nodes = parse_forest(export_c(qf, prefix=name), name)
    assert len(nodes) == qf.n_nodes <= MAX_NODES
    # every split's left subtree starts at i + 1 and ends right before its right child
    def end_of(i):
        f, _, r = nodes[i]
        return i + 1 if f == -1 else end_of(r)
    for i, (f, _, r) in enumerate(nodes):
        if f == -1:
            assert 0 <= r < qf.n_leaves
        else:
            assert end_of(i + 1) == r
    ends = [end_of(int(root)) for root in qf.roots]
    assert list(qf.roots[1:]) == ends[:-1] and ends[-1] == len(nodes)


def test_single_leaf_export():
    text = export_c(single_leaf_qf(), prefix="m")
    assert parse_forest(text, "m") == [(-1, 0, 0)]
    assert "#define M_N_TREES 1" in text and "#define M_LEAF_ONE 16384" in text
    assert "    {4096, 12288}," in text


def test_hand_forest_layout_root_then_left_child():
    nodes = parse_forest(export_c(hand_qf_fixture(), prefix="rf"), "rf")
    assert nodes[0] == (0, 0, 4) and nodes[1] == (1, 0, 3)


def test_export_after_json_round_trip_is_identical():
    qf = small_qf()
    again = QuantizedForest.from_json(qf.to_json())
    assert export_c(again, "rf", runtime=True) == export_c(qf, "rf", runtime=True)


def test_bad_prefix():
    with pytest.raises(ValueError):
        export_c(single_leaf_qf(), prefix="9lives")


HARNESS = r"""
#include <stdio.h>
#include "model.h"
static const int16_t XS[][RF_N_FEATURES] = {
%s
};
int main(void)
{
    int32_t out[RF_N_CLASSES];
    int trees, i, j;
    for (i = 0; i < (int)(sizeof XS / sizeof XS[0]); i++) {
        int cls = rf_predict(XS[i], %d, %d, out, &trees);
        printf("%%d %%d", cls, trees);
        for (j = 0; j < RF_N_CLASSES; j++) printf(" %%d", (int)out[j]);
        printf("\n");
    }
    return 0;
}
"""


@pytest.mark.skipif(shutil.which("cc") is None, reason="no C compiler")
@pytest.mark.parametrize("alpha,batch", [(0.5, 1), (0.5, 2), (1.2, 3), (float("inf"), 1)])
def test_c_runtime_matches_engine(tmp_path, alpha, batch):
    qf = small_qf()
    rng = np.random.default_rng(0)
    Xq = rng.integers(-32767, 32768, size=(200, qf.num_features)).astype(np.int16)
    pol = PolicyConfig("agg-sm", alpha=alpha, batch=batch)
    alpha_q = min(pol.alpha_q(qf.leaf_one), 2**31 - 1)
    (tmp_path / "model.h").write_text(export_c(qf, "rf", runtime=True))
    rows = ",\n".join("    {" + ", ".join(map(str, r)) + "}" for r in Xq.tolist())
    (tmp_path / "main.c").write_text(HARNESS % (rows, alpha_q, batch))
    exe = tmp_path / "rf"
    subprocess.run(["cc", "-std=c99", "-O1", "-Wall", "-Werror", "-Wno-unused-function", "-o", str(exe),
                    str(tmp_path / "main.c")], check=True, capture_output=True)
    got = [list(map(int, ln.split())) for ln in subprocess.run([str(exe)], capture_output=True, text=True, check=True).stdout.splitlines()]
    res = engine.run_batch(qf, Xq, pol)
    want = [[int(p), int(t), *map(int, s)] for p, t, s in zip(res.pred, res.trees, res.scores)]
    assert got == want
