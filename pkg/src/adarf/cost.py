"""Linear cycle/energy model driven by inference trace counters.

Cycles are ``fixed + nodes*c_node + trees*c_tree + accumulations*c_accum
+ evaluations*M*c_policy``, where the policy term uses the per-class scan
cost of the active rule. Energy in microjoules is
``cycles / (freq_mhz * 1e6) * power_mw * 1e3``.

Memory hierarchy effects are not modelled. The defaults are estimates for a
small single-core RISC-V MCU, not measurements.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .engine import BatchResult, InferenceTrace, Policy


@dataclass(frozen=True)
class CostParams:
    cycles_per_node: float = 9.0
    cycles_per_class_accum: float = 4.0
    cycles_policy_max: float = 3.0
    cycles_policy_sm: float = 5.0
    cycles_tree_overhead: float = 12.0
    cycles_fixed: float = 60.0
    power_mw: float = 5.0
    freq_mhz: float = 205.0
    description: str = ""

    def __post_init__(self):
        for f in fields(self):
            if f.name == "description":
                continue
            v = getattr(self, f.name)
            if not v >= 0:
                raise ValueError(f"{f.name} must be >= 0, got {v}")
        if self.freq_mhz <= 0:
            raise ValueError("freq_mhz must be > 0")

    def policy_cycles_per_class(self, policy: Policy) -> float:
        # QWYC is two comparisons on one running sum; charge it as a max scan
        if policy in (Policy.AGG_SM, Policy.LAST_SM):
            return self.cycles_policy_sm
        return self.cycles_policy_max

    def energy_uj(self, cycles):
        return cycles / (self.freq_mhz * 1e6) * self.power_mw * 1e3

    @classmethod
    def from_file(cls, path) -> "CostParams":
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_text(cls, text: str) -> "CostParams":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name for f in fields(cls)} - {"description"}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
            if key not in known:
                raise ValueError(f"line {lineno}: unknown cost parameter {key!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise ValueError(f"line {lineno}: {key} is not a number: {value.strip()!r}") from None
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items() if k != "description")


def calibrate_defaults() -> CostParams:
    return CostParams(
        description=(
            "Estimated per-operation cycle costs for int16 tree walking on a 32-bit "
            "single-core RISC-V MCU clocked at 205 MHz. Power is an assumed average "
            "active figure. Not measured, so use for relative comparisons only."
        )
    )


@dataclass(frozen=True)
class CostReport:
    cycles: float
    energy_uj: float
    traversal: float
    accumulation: float
    policy: float
    fixed: float

    @property
    def breakdown(self) -> dict:
        return {"traversal": self.traversal, "accumulation": self.accumulation,
                "policy": self.policy, "fixed": self.fixed}


def estimate(trace: InferenceTrace, num_classes: int, params: CostParams) -> CostReport:
    counters = (trace.trees_executed, trace.nodes_visited, trace.score_accumulations, trace.policy_evaluations)
    if min(counters) < 0:
        raise ValueError(f"negative trace counter in {trace}")
    traversal = trace.nodes_visited * params.cycles_per_node + trace.trees_executed * params.cycles_tree_overhead
    accumulation = trace.score_accumulations * params.cycles_per_class_accum
    policy = trace.policy_evaluations * num_classes * params.policy_cycles_per_class(trace.policy)
    fixed = params.cycles_fixed
    cycles = fixed + traversal + accumulation + policy
    return CostReport(cycles, params.energy_uj(cycles), traversal, accumulation, policy, fixed)


def estimate_batch(result: BatchResult, params: CostParams) -> np.ndarray:
    """Per-sample cycles for a batched run, same formula as :func:`estimate`."""
    m = result.num_classes
    return (
        params.cycles_fixed
        + result.nodes * params.cycles_per_node
        + result.trees * params.cycles_tree_overhead
        + result.accumulations * params.cycles_per_class_accum
        + result.evals * m * params.policy_cycles_per_class(result.policy)
    )
