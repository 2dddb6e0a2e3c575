"""Threshold sweeps, Pareto filtering and accuracy-drop tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .cost import CostParams, estimate_batch
from .engine import LeafTable, Policy, PolicyConfig
from .forest import Dataset, accuracy, macro_accuracy
from .quantize import QuantizedForest

DEFAULT_GRID_SIZE = 64
DEFAULT_DROPS = (0.0, 0.005)
QWYC_EPS_MINUS = tuple(float(v) for v in np.round(np.linspace(0.0, 0.35, 8), 6))
QWYC_EPS_PLUS = tuple(round(1.0 - v, 6) for v in QWYC_EPS_MINUS)


@dataclass(frozen=True)
class ParetoPoint:
    policy: str
    batch: int
    accuracy: float
    macro_accuracy: float
    avg_trees: float
    avg_cycles: float
    avg_energy_uj: float
    alpha: float | None = None
    eps_minus: float | None = None
    eps_plus: float | None = None

    @property
    def threshold(self) -> str:
        if self.eps_minus is not None:
            return f"{self.eps_minus!r}:{self.eps_plus!r}"
        return "" if self.alpha is None else repr(self.alpha)

    def metric(self, name: str) -> float:
        return self.macro_accuracy if name == "macro" else self.accuracy


@dataclass(frozen=True)
class SweepSpec:
    policy: Policy = Policy.AGG_SM
    thresholds: tuple[float, ...] | None = None  # None: DEFAULT_GRID_SIZE points over [0, N]
    batches: tuple[int, ...] = (1,)
    drop_targets: tuple[float, ...] = DEFAULT_DROPS
    eps_pairs: tuple[tuple[float, float], ...] | None = None  # None: 8x8 lattice
    metric: str = "accuracy"

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.thresholds is not None and len(self.thresholds) == 0:
            raise ValueError("threshold grid is empty")
        if not self.batches or min(self.batches) < 1:
            raise ValueError("batch sizes must be a non-empty list of positive integers")
        if any(d < 0 for d in self.drop_targets):
            raise ValueError("accuracy drops must be >= 0")
        if self.eps_pairs is not None and len(self.eps_pairs) == 0:
            raise ValueError("eps grid is empty")
        if self.metric not in ("accuracy", "macro"):
            raise ValueError(f"metric must be 'accuracy' or 'macro', got {self.metric!r}")

    def threshold_grid(self, num_trees: int) -> tuple[float, ...]:
        if self.thresholds is not None:
            return tuple(float(t) for t in self.thresholds)
        return tuple(float(v) for v in np.linspace(0.0, num_trees, DEFAULT_GRID_SIZE))

    def eps_grid(self) -> tuple[tuple[float, float], ...]:
        if self.eps_pairs is not None:
            return tuple((float(a), float(b)) for a, b in self.eps_pairs)
        return tuple((lo, hi) for lo in QWYC_EPS_MINUS for hi in QWYC_EPS_PLUS)


@dataclass
class SweepResult:
    points: list[ParetoPoint]
    pareto: list[ParetoPoint]
    full: ParetoPoint
    min_trees: dict[float, ParetoPoint | None] = field(default_factory=dict)
    min_energy: dict[float, ParetoPoint | None] = field(default_factory=dict)


def make_point(result, labels, num_classes, params: CostParams, policy: PolicyConfig | None, label=None) -> ParetoPoint:
    cycles = float(np.mean(estimate_batch(result, params))) if len(result) else 0.0
    kind = label or (policy.kind.value if policy else "full")
    alpha = eps_lo = eps_hi = None
    if policy is not None and policy.kind is Policy.QWYC:
        eps_lo, eps_hi = policy.eps_minus, policy.eps_plus
    elif policy is not None and policy.kind is not Policy.FULL:
        alpha = policy.alpha
    return ParetoPoint(
        policy=kind,
        batch=policy.batch if policy else 1,
        accuracy=accuracy(labels, result.pred),
        macro_accuracy=macro_accuracy(labels, result.pred, num_classes),
        avg_trees=float(np.mean(result.trees)) if len(result) else 0.0,
        avg_cycles=cycles,
        avg_energy_uj=params.energy_uj(cycles),
        alpha=alpha,
        eps_minus=eps_lo,
        eps_plus=eps_hi,
    )


def dominates(a: ParetoPoint, b: ParetoPoint, metric: str = "accuracy") -> bool:
    """``a`` is at least as accurate and as cheap as ``b``, and strictly better in one."""
    ma, mb = a.metric(metric), b.metric(metric)
    return ma >= mb and a.avg_trees <= b.avg_trees and (ma > mb or a.avg_trees < b.avg_trees)


def pareto_front(points, metric: str = "accuracy") -> list[ParetoPoint]:
    """Non-dominated points (maximal accuracy, minimal average trees), cheapest first."""
    ranked = sorted(points, key=lambda p: (p.avg_trees, -p.metric(metric)))
    front = []
    best = -math.inf
    for p in ranked:
        m = p.metric(metric)
        if m > best:
            front.append(p)
            best = m
        elif front and m == front[-1].metric(metric) and p.avg_trees == front[-1].avg_trees:
            front.append(p)  # exact duplicate of a front point
    return front


def best_under_drop(points, reference: float, drop: float, key, metric: str = "accuracy") -> ParetoPoint | None:
    """Point minimizing ``key`` among those within ``drop`` of ``reference``; first in grid order on ties."""
    ok = [p for p in points if p.metric(metric) >= reference - drop - 1e-12]
    return min(ok, key=key) if ok else None


def run_sweep(qf: QuantizedForest, data: Dataset, spec: SweepSpec, params: CostParams,
              calibration: Dataset | None = None, table: LeafTable | None = None, backend=None) -> SweepResult:
    """Evaluate every grid point of ``spec`` on ``data``.

    QWYC tree orders are fitted on ``calibration`` (``data`` itself when not
    given). ``table`` lets callers reuse a precomputed leaf walk.
    """
    if data.n_features != qf.num_features:
        raise ValueError(f"dataset has {data.n_features} features, forest expects {qf.num_features}")
    if table is None:
        table = engine.leaf_table(qf, qf.quantize_input(data.features), backend=backend)
    y = data.labels
    m = qf.num_classes
    full = make_point(engine.replay(qf, table, backend=backend), y, m, params, None)

    points = []
    if spec.policy is Policy.QWYC:
        calib = qf.quantize_input((calibration or data).features)
        for lo, hi in spec.eps_grid():
            perm = engine.qwyc_order_trees(qf, calib, lo, hi, backend=backend)
            pol = PolicyConfig(Policy.QWYC, eps_minus=lo, eps_plus=hi)
            res = engine.replay(qf, table.reordered(perm), pol, backend=backend)
            points.append(make_point(res, y, m, params, pol))
    elif spec.policy is Policy.FULL:
        points.append(full)
    else:
        for b in spec.batches:
            for alpha in spec.threshold_grid(qf.num_trees):
                pol = PolicyConfig(spec.policy, alpha=alpha, batch=b)
                res = engine.replay(qf, table, pol, backend=backend)
                points.append(make_point(res, y, m, params, pol))

    ref = full.metric(spec.metric)
    return SweepResult(
        points=points,
        pareto=pareto_front(points, spec.metric),
        full=full,
        min_trees={d: best_under_drop(points, ref, d, lambda p: p.avg_trees, spec.metric) for d in spec.drop_targets},
        min_energy={d: best_under_drop(points, ref, d, lambda p: p.avg_energy_uj, spec.metric) for d in spec.drop_targets},
    )


def reduced_rf_baseline(qf: QuantizedForest, data: Dataset, sizes, params: CostParams,
                        table: LeafTable | None = None, backend=None) -> list[ParetoPoint]:
    """Static forests made of the first ``n`` trees, one point per size."""
    if table is None:
        table = engine.leaf_table(qf, qf.quantize_input(data.features), backend=backend)
    points = []
    for n in sizes:
        n = int(n)
        if not 1 <= n <= qf.num_trees:
            raise ValueError(f"reduced size {n} outside [1, {qf.num_trees}]")
        res = engine.replay(qf, table.prefix(n), backend=backend)
        p = make_point(res, data.labels, qf.num_classes, params, None, label="reduced")
        points.append(ParetoPoint(**{**p.__dict__, "alpha": float(n)}))
    return points
