"""Distance-shell graph propagation.

Decomposes a graph's neighborhoods into disjoint hop shells, fuses them with
geometrically decaying coefficients into a single propagation operator,
trains a small MLP classifier on the propagated features, and measures how
classical propagators drown a node's own signal as depth grows.
"""

__version__ = "0.1.0"

from .data import Dataset, Split, load_dataset, make_split, synth_planted_partition, write_dataset
from .errors import ConfigError, InputError, NumericError, ResourceError, ShellPropError
from .graph import (
    UNREACHABLE,
    DistanceField,
    SparseGraph,
    SparseMatrix,
    adjacency_matrix,
    bfs_distances,
    build_graph,
    component_count,
    diameter,
    distance_matrix,
    is_connected,
    read_edge_list,
    spmm,
)
from .metrics import (
    AggregationBoundsVerdict,
    MetricReport,
    Propagator,
    aggregation_bounds_check,
    avg_nat,
    fused_shell_propagator,
    raw_adjacency_propagator,
    residual_propagator,
    rw_norm_propagator,
    sas,
    sas_trajectory,
    sym_norm_propagator,
)
from .model import (
    AdamState,
    ModelParams,
    TrainConfig,
    TrainHistory,
    adam_step,
    backward,
    evaluate,
    forward,
    init_adam,
    init_params,
    load_checkpoint,
    loss,
    save_checkpoint,
    train,
)
from .shells import (
    FusedPropagator,
    ShellDecomposition,
    cumulative_matrix,
    fuse_shells,
    fused_propagate,
    normalize_shell,
    ppr_coefficients,
    shell_decompose,
    shell_degree_profile,
    shell_report,
    shell_union,
)

__all__ = [
    "__version__",
    "UNREACHABLE",
    "AdamState",
    "AggregationBoundsVerdict",
    "ConfigError",
    "Dataset",
    "DistanceField",
    "FusedPropagator",
    "InputError",
    "MetricReport",
    "ModelParams",
    "NumericError",
    "Propagator",
    "ResourceError",
    "ShellDecomposition",
    "ShellPropError",
    "SparseGraph",
    "SparseMatrix",
    "Split",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "adjacency_matrix",
    "aggregation_bounds_check",
    "avg_nat",
    "backward",
    "bfs_distances",
    "build_graph",
    "component_count",
    "cumulative_matrix",
    "diameter",
    "distance_matrix",
    "evaluate",
    "forward",
    "fuse_shells",
    "fused_propagate",
    "fused_shell_propagator",
    "init_adam",
    "init_params",
    "is_connected",
    "load_checkpoint",
    "load_dataset",
    "loss",
    "make_split",
    "normalize_shell",
    "ppr_coefficients",
    "raw_adjacency_propagator",
    "read_edge_list",
    "residual_propagator",
    "rw_norm_propagator",
    "sas",
    "sas_trajectory",
    "save_checkpoint",
    "shell_decompose",
    "shell_degree_profile",
    "shell_report",
    "shell_union",
    "spmm",
    "sym_norm_propagator",
    "synth_planted_partition",
    "train",
    "write_dataset",
]
