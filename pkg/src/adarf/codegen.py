"""C header export of a quantized forest.

The header holds the FOREST node table, the ROOT index array and the LEAVES
probability matrix as ``static const`` data, plus ``#define`` sizes. With
``runtime=True`` it also carries a small adaptive inference routine
(aggregated score margin, tree batching) mirroring :mod:`adarf.engine`.
Output is a pure function of the forest and the prefix.
"""
from __future__ import annotations

import re

from .quantize import QuantizedForest

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _rows(items, per_line: int, indent: str = "    ") -> str:
    lines = []
    for i in range(0, len(items), per_line):
        lines.append(indent + ", ".join(items[i:i + per_line]) + ",")
    return "\n".join(lines)


def _c_float(v: float) -> str:
    return f"{v:.9e}f"


_RUNTIME = """
/* Index of the LEAVES row reached by quantized input x in the tree rooted at root. */
static uint16_t {p}_tree_leaf(uint16_t root, const int16_t *x)
{{
    uint16_t i = root;
    while ({P}_FOREST[i].fidx != -1) {{
        i = (x[{P}_FOREST[i].fidx] > {P}_FOREST[i].th) ? {P}_FOREST[i].right : (uint16_t)(i + 1);
    }}
    return {P}_FOREST[i].right;
}}

/*
 * Adaptive classification. After every complete batch of `batch` trees (except
 * the last tree) stop if the gap between the two largest aggregated scores
 * exceeds alpha_q, the threshold in LEAF_ONE units. alpha_q = INT32_MAX runs
 * the whole forest. Aggregated scores are left in out[], the number of trees
 * executed in *trees_out (if not NULL).
 */
static int {p}_predict(const int16_t *x, int32_t alpha_q, int batch, int32_t out[{P}_N_CLASSES], int *trees_out)
{{
    int t = 0, j, best = 0;
    for (j = 0; j < {P}_N_CLASSES; j++) out[j] = 0;
    while (t < {P}_N_TREES) {{
        const int16_t *row = {P}_LEAVES[{p}_tree_leaf({P}_ROOT[t], x)];
        for (j = 0; j < {P}_N_CLASSES; j++) out[j] += row[j];
        t++;
        if (t < {P}_N_TREES && t % batch == 0) {{
            int32_t a = out[0], b = out[0];
#if {P}_N_CLASSES > 1
            if (out[1] > a) {{ a = out[1]; }} else {{ b = out[1]; }}
            for (j = 2; j < {P}_N_CLASSES; j++) {{
                if (out[j] > a) {{ b = a; a = out[j]; }}
                else if (out[j] > b) {{ b = out[j]; }}
            }}
#endif
            if (a - b > alpha_q) break;
        }}
    }}
    for (j = 1; j < {P}_N_CLASSES; j++)
        if (out[j] > out[best]) best = j;
    if (trees_out) *trees_out = t;
    return best;
}}
"""


def export_c(qf: QuantizedForest, prefix: str = "rf", runtime: bool = False) -> str:
    if not _IDENT.match(prefix):
        raise ValueError(f"prefix {prefix!r} is not a valid C identifier")
    qf.check_structure()
    p, P = prefix.lower(), prefix.upper()
    nodes = [f"{{{int(f)}, {int(t)}, {int(r)}}}" for f, t, r in zip(qf.fidx, qf.th, qf.right)]
    node_lines = "\n".join(f"    {n}, /* {i} */" for i, n in enumerate(nodes))
    leaf_lines = "\n".join("    {" + ", ".join(str(int(v)) for v in row) + "}," for row in qf.leaves)
    parts = [
        f"/* Quantized random forest: {qf.num_trees} trees, {qf.num_classes} classes, "
        f"{qf.n_nodes} nodes, {qf.n_leaves} leaves. Generated by adarf. */",
        f"#ifndef {P}_MODEL_H",
        f"#define {P}_MODEL_H",
        "",
        "#include <stdint.h>",
        "",
        f"#define {P}_N_TREES {qf.num_trees}",
        f"#define {P}_N_CLASSES {qf.num_classes}",
        f"#define {P}_N_FEATURES {qf.num_features}",
        f"#define {P}_N_NODES {qf.n_nodes}",
        f"#define {P}_N_LEAVES {qf.n_leaves}",
        f"#define {P}_MAX_DEPTH {qf.max_depth}",
        f"#define {P}_LEAF_ONE {qf.leaf_one}",
        "",
        "/* fidx == -1 marks a leaf, whose right field indexes LEAVES; the left child of node i is node i + 1 */",
        "typedef struct {",
        "    int16_t fidx;",
        "    int16_t th;",
        "    uint16_t right;",
        f"}} {p}_node_t;",
        "",
        f"static const {p}_node_t {P}_FOREST[{P}_N_NODES] = {{",
        node_lines,
        "};",
        "",
        f"static const uint16_t {P}_ROOT[{P}_N_TREES] = {{",
        _rows([str(int(r)) for r in qf.roots], 12),
        "};",
        "",
        f"static const int16_t {P}_LEAVES[{P}_N_LEAVES][{P}_N_CLASSES] = {{",
        leaf_lines,
        "};",
        "",
        "/* input quantization: code = round((x - OFFSET) * SCALE), saturated to +-32767 */",
        f"static const float {P}_FEATURE_OFFSET[{P}_N_FEATURES] = {{",
        _rows([_c_float(v) for v in qf.feature_offset], 4),
        "};",
        "",
        f"static const float {P}_FEATURE_SCALE[{P}_N_FEATURES] = {{",
        _rows([_c_float(v) for v in qf.feature_scale], 4),
        "};",
    ]
    text = "\n".join(parts) + "\n"
    if runtime:
        text += _RUNTIME.format(p=p, P=P)
    return text + f"\n#endif /* {P}_MODEL_H */\n"
