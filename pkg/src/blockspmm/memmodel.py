"""Analytic global-memory model and workload-balance metrics.

Transaction model: 4-byte elements, 128-byte segments, dense rows padded so
each starts on a segment boundary (plus an optional constant byte offset for
misalignment studies). A warp-wide access costs one instruction issue and one
transaction per segment touched by its active lanes.

Per nonzero both strategies read ``ceil(col_dim / 32)`` slices of a dense X
row, so read traffic is identical. They differ in how often the output row and
the partition metadata are touched: the looped-warp baseline writes Y and reads
a 16-byte record once per warp task, while a block writes each of its rows once
after the shared-memory merge and reads one record for all of its warps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .degree_sort import sort_rows_by_degree
from .graph import CsrMatrix
from .partition import WARP_SIZE, PartitionConfig, block_partition, get_partition_patterns, warp_partition
from .simulate import BLOCK_COMBINED, WARP_LOOPED, ExecTrace, block_workload_trace, warp_workload_trace

SEGMENT_BYTES = 128
ELEM_BYTES = 4
RECORD_BYTES = 16
STRATEGIES = (BLOCK_COMBINED, WARP_LOOPED)


def shared_padding(col_dim: int) -> int:
    """Smallest multiple of 32 that is >= col_dim."""
    if col_dim < 1:
        raise ValueError("col_dim must be >= 1")
    return -(-col_dim // WARP_SIZE) * WARP_SIZE


def segments_touched(first_byte: int, n_bytes: int) -> int:
    if n_bytes <= 0:
        return 0
    return (first_byte + n_bytes - 1) // SEGMENT_BYTES - first_byte // SEGMENT_BYTES + 1


def row_access_cost(col_dim: int, row_base_offset: int = 0) -> tuple[int, int]:
    """(issues, transactions) for 32-lane slices covering one dense row.

    Rows are padded to ``shared_padding(col_dim)`` elements, so every row has
    the same cost and only the base offset matters.
    """
    issues = tx = 0
    for start in range(0, col_dim, WARP_SIZE):
        lanes = min(WARP_SIZE, col_dim - start)
        issues += 1
        tx += segments_touched(row_base_offset + start * ELEM_BYTES, lanes * ELEM_BYTES)
    return issues, tx


@dataclass(frozen=True)
class MemReport:
    strategy: str
    col_dim: int
    read_transactions: int
    write_transactions: int
    warp_instruction_issues: int
    read_issues: int
    write_issues: int
    metadata_issues: int
    metadata_transactions: int
    column_loop_iterations: int
    segment_size: int = SEGMENT_BYTES

    def to_dict(self) -> dict:
        return asdict(self)


def _writes_per_pass(trace: ExecTrace) -> int:
    """Number of (block, row) output writes; each is one full dense-row write."""
    col_dim = trace.col_dim
    return (trace.totals["global_stores"] + trace.totals["global_atomic_adds"]) // col_dim


def mem_report_from_trace(trace: ExecTrace, n_records: int, row_base_offset: int = 0) -> MemReport:
    col_dim = trace.col_dim
    issues_row, tx_row = row_access_cost(col_dim, row_base_offset)
    nnz = trace.totals["nnz"]
    row_writes = _writes_per_pass(trace)
    meta_tx = segments_touched(0, RECORD_BYTES)  # records are 16-byte aligned
    if trace.strategy == BLOCK_COMBINED:
        loops = 0
    else:
        loops = trace.totals["inner_loop_iterations"]
    read_issues = nnz * issues_row
    write_issues = row_writes * issues_row
    return MemReport(
        strategy=trace.strategy,
        col_dim=col_dim,
        read_transactions=nnz * tx_row,
        write_transactions=row_writes * tx_row,
        warp_instruction_issues=read_issues + write_issues + n_records,
        read_issues=read_issues,
        write_issues=write_issues,
        metadata_issues=n_records,
        metadata_transactions=n_records * meta_tx,
        column_loop_iterations=loops,
    )


def strategy_trace(a: CsrMatrix, col_dim: int, strategy: str, cfg: PartitionConfig):
    """Workload trace and metadata record count for one strategy."""
    if strategy == BLOCK_COMBINED:
        sorted_a, _ = sort_rows_by_degree(a)
        blocks = block_partition(sorted_a, get_partition_patterns(cfg), cfg)
        return block_workload_trace(sorted_a, blocks, col_dim, cfg), len(blocks)
    if strategy == WARP_LOOPED:
        tasks = warp_partition(a, cfg.max_warp_nzs)
        return warp_workload_trace(a, tasks, col_dim, cfg), len(tasks)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def count_transactions(
    a: CsrMatrix, col_dim: int, strategy: str, cfg: PartitionConfig, row_base_offset: int = 0
) -> MemReport:
    if col_dim < 1:
        raise ValueError("col_dim must be >= 1")
    trace, n_records = strategy_trace(a, col_dim, strategy, cfg)
    return mem_report_from_trace(trace, n_records, row_base_offset)


# ---------------------------------------------------------------------------
# balance


@dataclass(frozen=True)
class BalanceReport:
    """Per-warp workload statistics.

    ``imbalance`` is the issue-slot view: each active warp of a block is
    charged for as long as the block's busiest warp, so
    ``sum(active_warps_b * max_b) / nnz``. It is 1.0 exactly when every active
    warp in each block carries the same load. ``global_max_over_mean`` is the
    plain max/mean over all launched warps, kept for reference.
    """

    per_warp_nnz: tuple[int, ...]
    mean: float
    max: int
    min: int
    imbalance: float
    active_warp_fraction: float
    global_max_over_mean: float

    def to_dict(self, include_warps: bool = False) -> dict:
        d = asdict(self)
        if include_warps:
            d["per_warp_nnz"] = list(self.per_warp_nnz)
        else:
            del d["per_warp_nnz"]
        return d


def balance_report(trace: ExecTrace) -> BalanceReport:
    per_warp = trace.per_warp_nnz()
    if per_warp.size == 0:
        return BalanceReport((), 0.0, 0, 0, 1.0, 0.0, 1.0)
    nnz = int(per_warp.sum())
    mean = nnz / per_warp.size
    slot_time = 0
    for b in trace.per_block:
        loads = [n for n in b.per_warp_nnz if n > 0]
        if loads:
            slot_time += len(loads) * max(loads)
    return BalanceReport(
        per_warp_nnz=tuple(per_warp.tolist()),
        mean=mean,
        max=int(per_warp.max()),
        min=int(per_warp.min()),
        imbalance=slot_time / nnz if nnz else 1.0,
        active_warp_fraction=float(np.count_nonzero(per_warp)) / per_warp.size,
        global_max_over_mean=float(per_warp.max()) / mean if mean > 0 else 1.0,
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class StrategyComparison:
    col_dim: int
    mem: dict  # strategy -> MemReport
    balance: dict  # strategy -> BalanceReport

    def to_dict(self) -> dict:
        return {
            "col_dim": self.col_dim,
            "strategies": {
                s: {"mem": self.mem[s].to_dict(), "balance": self.balance[s].to_dict()} for s in STRATEGIES
            },
        }


def compare_strategies(a: CsrMatrix, col_dims, cfg: PartitionConfig, row_base_offset: int = 0):
    col_dims = list(col_dims)
    if any(k < 1 for k in col_dims):
        raise ValueError("col_dim values must be >= 1")
    # partitions do not depend on col_dim; build them once
    sorted_a, _ = sort_rows_by_degree(a)
    blocks = block_partition(sorted_a, get_partition_patterns(cfg), cfg)
    tasks = warp_partition(a, cfg.max_warp_nzs)
    rows = []
    for k in col_dims:
        traces = {
            BLOCK_COMBINED: (block_workload_trace(sorted_a, blocks, k, cfg), len(blocks)),
            WARP_LOOPED: (warp_workload_trace(a, tasks, k, cfg), len(tasks)),
        }
        mem = {s: mem_report_from_trace(t, n, row_base_offset) for s, (t, n) in traces.items()}
        bal = {s: balance_report(t) for s, (t, _) in traces.items()}
        rows.append(StrategyComparison(k, mem, bal))
    return rows


CSV_FIELDS = [
    "col_dim",
    "strategy",
    "read_transactions",
    "write_transactions",
    "warp_instruction_issues",
    "read_issues",
    "write_issues",
    "metadata_issues",
    "metadata_transactions",
    "column_loop_iterations",
    "segment_size",
    "mean_warp_nnz",
    "max_warp_nnz",
    "min_warp_nnz",
    "imbalance",
    "active_warp_fraction",
    "global_max_over_mean",
]


def comparison_rows(table) -> list[dict]:
    """Flatten to one record per (col_dim, strategy)."""
    out = []
    for row in table:
        for s in STRATEGIES:
            m, b = row.mem[s], row.balance[s]
            out.append(
                {
                    "col_dim": row.col_dim,
                    "strategy": s,
                    "read_transactions": m.read_transactions,
                    "write_transactions": m.write_transactions,
                    "warp_instruction_issues": m.warp_instruction_issues,
                    "read_issues": m.read_issues,
                    "write_issues": m.write_issues,
                    "metadata_issues": m.metadata_issues,
                    "metadata_transactions": m.metadata_transactions,
                    "column_loop_iterations": m.column_loop_iterations,
                    "segment_size": m.segment_size,
                    "mean_warp_nnz": b.mean,
                    "max_warp_nnz": b.max,
                    "min_warp_nnz": b.min,
                    "imbalance": b.imbalance,
                    "active_warp_fraction": b.active_warp_fraction,
                    "global_max_over_mean": b.global_max_over_mean,
                }
            )
    return out


def comparison_to_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(comparison_rows(table))
    return buf.getvalue()


def comparison_to_json(table) -> str:
    return json.dumps([row.to_dict() for row in table], indent=2)
