"""Random forests with runtime-tunable early stopping for microcontrollers."""
from .cost import CostParams, CostReport, calibrate_defaults, estimate
from .engine import (
    InferenceTrace,
    Policy,
    PolicyConfig,
    adaptive_infer,
    conf_agg_max,
    conf_agg_sm,
    conf_last_sm,
    full_infer,
    qwyc_infer,
    qwyc_order_trees,
    run_batch,
    tree_infer,
)
from .forest import Dataset, Forest, TreeNode, argmax_class
from .quantize import QuantizedForest, comparison_consistency_check, quantize_forest, quantize_input
from .trainer import TrainConfig, train_forest, train_test_split

__version__ = "0.1.0"
