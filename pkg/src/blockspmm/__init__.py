"""Degree sorting, block-level partitioning and a functional combined-warp SpMM model for GCN aggregation."""

__version__ = "0.1.0"

from .degree_sort import RowPermutation, permute_rows, restore_rows, sort_rows_by_degree
from .graph import (
    CsrMatrix,
    DegreeStats,
    MatrixFormatError,
    degree_stats,
    gcn_normalize,
    load_edge_list,
    load_matrix_market,
    load_snapshot,
    save_snapshot,
    synth_power_law,
    synth_uniform_degree,
    write_matrix_market,
)
from .memmodel import balance_report, compare_strategies, count_transactions, shared_padding
from .partition import (
    BlockDescriptor,
    PartitionConfig,
    PatternTable,
    WarpTask,
    block_partition,
    get_partition_patterns,
    pack_descriptor,
    storage_ratio,
    unpack_descriptor,
    warp_partition,
)
from .simulate import (
    CombinedWarpPlan,
    ExecTrace,
    plan_combined_warps,
    run_block_pipeline,
    simulate_block_spmm,
    simulate_warp_spmm,
    spmm,
)
from .gcn import gcn_layer_forward
