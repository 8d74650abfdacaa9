"""Functional model of the block-level / combined-warp SpMM kernel and the looped-warp baseline.

Nothing here models time. The simulators execute the same arithmetic a GPU
kernel would, in a fixed order, and count the modeled atomic operations:

* level 1: every active lane accumulates its own output column in a register
  over the nonzeros assigned to its warp;
* level 2: warps of one block that work on the same row merge into a shared
  memory row buffer padded to ``round_dim``;
* level 3: rows split over several blocks merge in global memory.

The first contribution to a buffer is a plain store; every later one is a
counted atomic add. Merges happen in ascending warp id, then ascending block
id, so results are bitwise reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .degree_sort import RowPermutation, restore_rows, sort_rows_by_degree
from .graph import VALUE_DTYPE, CsrMatrix
from .partition import (
    WARP_SIZE,
    BlockDescriptor,
    PartitionConfig,
    PatternTable,
    WarpTask,
    block_partition,
    get_partition_patterns,
    warp_partition,
)

BLOCK_COMBINED = "block-combined"
WARP_LOOPED = "warp-looped"


class LaneAssignment(NamedTuple):
    iteration: int  # pass j of the 0..c-1 loop
    thread_id: int  # physical thread id inside the block
    virtual_id: int
    combined_warp_id: int
    lane_id: int
    active: bool


@dataclass(frozen=True)
class CombinedWarpPlan:
    col_dim: int
    c: int
    round_dim: int
    block_dim: int

    @property
    def n_combined_warps(self) -> int:
        return self.block_dim * self.c // self.round_dim

    @property
    def inactive_lanes(self) -> int:
        return self.round_dim - self.col_dim

    def lane_assignments(self):
        """Every (pass, physical thread) pair mapped onto a combined warp lane."""
        for j in range(self.c):
            for tid in range(self.block_dim):
                vid = tid + j * self.block_dim
                lane = vid % self.round_dim
                yield LaneAssignment(j, tid, vid, vid // self.round_dim, lane, lane < self.col_dim)

    def members(self) -> dict[int, list[tuple[int, int]]]:
        """Combined warp id -> [(pass, physical warp id), ...] in virtual id order."""
        out: dict[int, list[tuple[int, int]]] = {}
        for j in range(self.c):
            for w in range(self.block_dim // WARP_SIZE):
                vid = w * WARP_SIZE + j * self.block_dim
                out.setdefault(vid // self.round_dim, []).append((j, w))
        return out

    def active_columns(self) -> np.ndarray:
        """Output column served by each active lane of a combined warp."""
        lanes = np.arange(self.round_dim)
        return lanes[lanes < self.col_dim]

    def to_dict(self) -> dict:
        return {
            "col_dim": self.col_dim,
            "c": self.c,
            "round_dim": self.round_dim,
            "block_dim": self.block_dim,
            "combined_warps_per_block": self.n_combined_warps,
            "physical_warps_per_combined_warp": self.c,
            "members": {str(k): [list(m) for m in v] for k, v in self.members().items()},
        }


def plan_combined_warps(col_dim: int, cfg: PartitionConfig) -> CombinedWarpPlan:
    if col_dim < 1:
        raise ValueError("col_dim must be >= 1")
    c = -(-col_dim // WARP_SIZE)
    return CombinedWarpPlan(col_dim, c, c * WARP_SIZE, cfg.max_block_warps * WARP_SIZE)


# ---------------------------------------------------------------------------
# traces


@dataclass
class BlockTrace:
    descriptor: object  # BlockDescriptor, or the tuple of WarpTasks of one baseline block
    per_warp_nnz: tuple[int, ...]
    shared_atomic_adds: int = 0
    global_atomic_adds: int = 0
    global_stores: int = 0

    def to_dict(self) -> dict:
        if isinstance(self.descriptor, BlockDescriptor):
            desc = self.descriptor._asdict()
        else:
            desc = [t._asdict() for t in self.descriptor]
        return {
            "descriptor": desc,
            "per_warp_nnz": list(self.per_warp_nnz),
            "shared_atomic_adds": self.shared_atomic_adds,
            "global_atomic_adds": self.global_atomic_adds,
            "global_stores": self.global_stores,
        }


@dataclass
class ExecTrace:
    strategy: str
    col_dim: int
    max_block_warps: int
    per_block: list[BlockTrace] = field(default_factory=list)
    inner_loop_iterations: int = 0
    virtual_thread_passes: int = 0

    @property
    def totals(self) -> dict:
        per_warp = [n for b in self.per_block for n in b.per_warp_nnz]
        return {
            "blocks": len(self.per_block),
            "warps_launched": len(per_warp),
            "active_warps": sum(1 for n in per_warp if n > 0),
            "nnz": sum(per_warp),
            "shared_atomic_adds": sum(b.shared_atomic_adds for b in self.per_block),
            "global_atomic_adds": sum(b.global_atomic_adds for b in self.per_block),
            "global_stores": sum(b.global_stores for b in self.per_block),
            "inner_loop_iterations": self.inner_loop_iterations,
            "virtual_thread_passes": self.virtual_thread_passes,
        }

    def per_warp_nnz(self) -> np.ndarray:
        return np.fromiter((n for b in self.per_block for n in b.per_warp_nnz), dtype=np.int64)

    def counters(self) -> tuple:
        """Everything except the descriptors, for equality checks."""
        return (
            self.strategy,
            self.col_dim,
            tuple((b.per_warp_nnz, b.shared_atomic_adds, b.global_atomic_adds, b.global_stores) for b in self.per_block),
            self.inner_loop_iterations,
            self.virtual_thread_passes,
        )

    def to_dict(self, include_blocks: bool = True) -> dict:
        d = {"strategy": self.strategy, "col_dim": self.col_dim, "max_block_warps": self.max_block_warps}
        if include_blocks:
            d["blocks"] = [b.to_dict() for b in self.per_block]
        d["totals"] = self.totals
        return d

    def to_json(self, include_blocks: bool = True) -> str:
        return json.dumps(self.to_dict(include_blocks))


# ---------------------------------------------------------------------------
# warp workloads


def block_warp_slices(blk: BlockDescriptor, sorted_a: CsrMatrix, cfg: PartitionConfig) -> list[tuple[int, int, int]]:
    """(row, lo, hi) nonzero range for each of the block's warps; idle warps get row -1.

    Only the descriptor is consulted to lay out the work; the matrix is used
    to reject descriptors that point outside it.
    """
    mbw = cfg.max_block_warps
    row_ptr = sorted_a.row_ptr
    if not 0 <= blk.row < sorted_a.n_rows:
        raise ValueError(f"descriptor {blk} references row outside the matrix")
    slices = []
    if blk.is_oversized(cfg):
        lo_row, hi_row = int(row_ptr[blk.row]), int(row_ptr[blk.row + 1])
        if hi_row - lo_row != blk.deg or not (lo_row <= blk.loc and blk.loc + blk.info <= hi_row) or blk.info < 1:
            raise ValueError(f"descriptor {blk} references out-of-range nonzeros")
        base, rem = divmod(blk.info, mbw)
        lo = blk.loc
        for q in range(mbw):
            n = base + (q < rem)
            slices.append((blk.row, lo, lo + n) if n else (-1, lo, lo))
            lo += n
        return slices

    wn, n_rows = blk.warp_nzs, blk.rows
    if wn < 1 or n_rows < 1:
        raise ValueError(f"descriptor {blk} has an empty info field")
    chunks = -(-blk.deg // wn)
    if n_rows * chunks > mbw:
        raise ValueError(f"descriptor {blk} needs {n_rows * chunks} warps, block has {mbw}")
    last = blk.row + n_rows
    if last > sorted_a.n_rows or int(row_ptr[blk.row]) != blk.loc:
        raise ValueError(f"descriptor {blk} references out-of-range nonzeros")
    if np.any(np.diff(row_ptr[blk.row : last + 1]) != blk.deg):
        raise ValueError(f"descriptor {blk} spans rows whose degree is not {blk.deg}")
    for r in range(blk.row, last):
        start = int(row_ptr[r])
        for q in range(chunks):
            lo = start + q * wn
            slices.append((r, lo, min(lo + wn, start + blk.deg)))
    slices.extend((-1, 0, 0) for _ in range(mbw - len(slices)))
    return slices


def _check_operands(a: CsrMatrix, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("dense operand must be 2-D")
    if a.n_cols != x.shape[0]:
        raise ValueError(f"dimension mismatch: sparse is {a.shape}, dense has {x.shape[0]} rows")
    if x.shape[1] < 1:
        raise ValueError("dense operand needs at least one column")
    return np.ascontiguousarray(x, dtype=VALUE_DTYPE)


def simulate_block_spmm(sorted_a: CsrMatrix, x, blocks, plan: CombinedWarpPlan, cfg: PartitionConfig):
    """Execute the block-level kernel; returns ``(y_sorted, trace)``."""
    x = _check_operands(sorted_a, x)
    col_dim = x.shape[1]
    if plan.col_dim != col_dim:
        raise ValueError(f"plan is for col_dim={plan.col_dim}, dense operand has {col_dim} columns")
    if plan.block_dim != cfg.max_block_warps * WARP_SIZE:
        raise ValueError("plan block_dim does not match the partition config")
    cols = sorted_a.col_idx
    vals = sorted_a.values
    lanes = plan.active_columns()  # lane l of every combined warp serves column l

    y = np.zeros((sorted_a.n_rows, col_dim), dtype=VALUE_DTYPE)
    written = np.zeros(sorted_a.n_rows, dtype=bool)
    trace = ExecTrace(BLOCK_COMBINED, col_dim, cfg.max_block_warps)
    covered = 0
    for blk in blocks:
        slices = block_warp_slices(blk, sorted_a, cfg)
        shared: dict[int, np.ndarray] = {}
        bt = BlockTrace(blk, tuple(hi - lo for _, lo, hi in slices))
        # combined warp w executes partition warp w
        for row, lo, hi in slices:
            if hi == lo:
                continue
            acc = np.zeros(lanes.size, dtype=VALUE_DTYPE)
            for p in range(lo, hi):
                acc += vals[p] * x[cols[p], lanes]
            buf = shared.get(row)
            if buf is None:
                buf = np.zeros(plan.round_dim, dtype=VALUE_DTYPE)
                buf[lanes] = acc
                shared[row] = buf
            else:
                buf[lanes] += acc
                bt.shared_atomic_adds += lanes.size
        for row in sorted(shared):
            part = shared[row][:col_dim]
            if written[row]:
                y[row] += part
                bt.global_atomic_adds += col_dim
            else:
                y[row] = part
                written[row] = True
                bt.global_stores += col_dim
        covered += sum(bt.per_warp_nnz)
        trace.per_block.append(bt)
    trace.virtual_thread_passes = len(trace.per_block) * plan.c
    if covered != sorted_a.nnz:
        raise ValueError(f"descriptors cover {covered} nonzeros, matrix has {sorted_a.nnz}")
    return y, trace


def _check_task(t: WarpTask, a: CsrMatrix, max_warp_nzs: int):
    if not 0 <= t.row < a.n_rows:
        raise ValueError(f"warp task {t} references row outside the matrix")
    if t.len < 1 or t.len > max_warp_nzs or t.col < 0 or t.col + t.len > a.row_ptr[t.row + 1] - a.row_ptr[t.row]:
        raise ValueError(f"warp task {t} references out-of-range nonzeros")


def simulate_warp_spmm(a: CsrMatrix, x, warps, cfg: PartitionConfig):
    """Looped-warp baseline: one warp per task walks the columns 32 at a time."""
    x = _check_operands(a, x)
    col_dim = x.shape[1]
    passes = -(-col_dim // WARP_SIZE)
    cols, vals = a.col_idx, a.values
    y = np.zeros((a.n_rows, col_dim), dtype=VALUE_DTYPE)
    written = np.zeros(a.n_rows, dtype=bool)
    trace = ExecTrace(WARP_LOOPED, col_dim, cfg.max_block_warps)
    mbw = cfg.max_block_warps
    warps = list(warps)
    for first in range(0, len(warps), mbw):
        group = tuple(warps[first : first + mbw])
        bt = BlockTrace(group, tuple(t.len for t in group) + (0,) * (mbw - len(group)))
        for t in group:
            _check_task(t, a, cfg.max_warp_nzs)
            start = int(a.row_ptr[t.row]) + t.col
            acc = np.zeros(col_dim, dtype=VALUE_DTYPE)
            for it in range(passes):
                lanes = slice(it * WARP_SIZE, min((it + 1) * WARP_SIZE, col_dim))
                for p in range(start, start + t.len):
                    acc[lanes] += vals[p] * x[cols[p], lanes]
            trace.inner_loop_iterations += passes
            if written[t.row]:
                y[t.row] += acc
                bt.global_atomic_adds += col_dim
            else:
                y[t.row] = acc
                written[t.row] = True
                bt.global_stores += col_dim
        trace.per_block.append(bt)
    covered = sum(t.len for t in warps)
    if covered != a.nnz:
        raise ValueError(f"warp tasks cover {covered} nonzeros, matrix has {a.nnz}")
    return y, trace


# ---------------------------------------------------------------------------
# workload-only traces (same counters, no arithmetic)


def block_workload_trace(sorted_a: CsrMatrix, blocks, col_dim: int, cfg: PartitionConfig) -> ExecTrace:
    trace = ExecTrace(BLOCK_COMBINED, col_dim, cfg.max_block_warps)
    seen_rows: set[int] = set()
    for blk in blocks:
        slices = block_warp_slices(blk, sorted_a, cfg)
        per_row: dict[int, int] = {}
        for row, lo, hi in slices:
            if hi > lo:
                per_row[row] = per_row.get(row, 0) + 1
        bt = BlockTrace(blk, tuple(hi - lo for _, lo, hi in slices))
        bt.shared_atomic_adds = sum(k - 1 for k in per_row.values()) * col_dim
        for row in per_row:
            if row in seen_rows:
                bt.global_atomic_adds += col_dim
            else:
                seen_rows.add(row)
                bt.global_stores += col_dim
        trace.per_block.append(bt)
    trace.virtual_thread_passes = len(blocks) * -(-col_dim // WARP_SIZE)
    return trace


def warp_workload_trace(a: CsrMatrix, warps, col_dim: int, cfg: PartitionConfig) -> ExecTrace:
    trace = ExecTrace(WARP_LOOPED, col_dim, cfg.max_block_warps)
    mbw = cfg.max_block_warps
    passes = -(-col_dim // WARP_SIZE)
    seen_rows: set[int] = set()
    warps = list(warps)
    for first in range(0, len(warps), mbw):
        group = tuple(warps[first : first + mbw])
        bt = BlockTrace(group, tuple(t.len for t in group) + (0,) * (mbw - len(group)))
        for t in group:
            if t.row in seen_rows:
                bt.global_atomic_adds += col_dim
            else:
                seen_rows.add(t.row)
                bt.global_stores += col_dim
        trace.per_block.append(bt)
    trace.inner_loop_iterations = len(warps) * passes
    return trace


# ---------------------------------------------------------------------------
# end-to-end


@dataclass
class PipelineResult:
    y: np.ndarray
    y_sorted: np.ndarray
    sorted_a: CsrMatrix
    perm: RowPermutation
    patterns: PatternTable
    blocks: list[BlockDescriptor]
    plan: CombinedWarpPlan
    trace: ExecTrace
    preprocess_seconds: float
    simulate_seconds: float


def run_block_pipeline(a: CsrMatrix, x, cfg: PartitionConfig) -> PipelineResult:
    """Sort, partition, simulate, then put the rows back in their original order."""
    x = _check_operands(a, x)
    t0 = time.perf_counter()
    sorted_a, perm = sort_rows_by_degree(a)
    patterns = get_partition_patterns(cfg)
    blocks = block_partition(sorted_a, patterns, cfg)
    t1 = time.perf_counter()
    plan = plan_combined_warps(x.shape[1], cfg)
    y_sorted, trace = simulate_block_spmm(sorted_a, x, blocks, plan, cfg)
    y = restore_rows(y_sorted, perm)
    t2 = time.perf_counter()
    return PipelineResult(y, y_sorted, sorted_a, perm, patterns, blocks, plan, trace, t1 - t0, t2 - t1)


def spmm(a: CsrMatrix, x, cfg: PartitionConfig | None = None) -> np.ndarray:
    """A @ X through the block-level simulator, rows in original order."""
    return run_block_pipeline(a, x, cfg or PartitionConfig()).y


def run_warp_baseline(a: CsrMatrix, x, cfg: PartitionConfig):
    tasks = warp_partition(a, cfg.max_warp_nzs)
    y, trace = simulate_warp_spmm(a, x, tasks, cfg)
    return y, trace, tasks


def reference_spmm(a: CsrMatrix, x) -> np.ndarray:
    """Float64 A @ X by per-row segment sums; independent of the simulators."""
    x = np.asarray(x, dtype=np.float64)
    if a.n_cols != x.shape[0]:
        raise ValueError(f"dimension mismatch: sparse is {a.shape}, dense has {x.shape[0]} rows")
    y = np.zeros((a.n_rows, x.shape[1]), dtype=np.float64)
    deg = a.degrees()
    nonempty = np.flatnonzero(deg)
    if nonempty.size == 0:
        return y
    vals = a.values.astype(np.float64)
    # bounded memory: process rows in chunks of roughly 1M products
    step = max(1, 1_000_000 // max(1, x.shape[1]))
    start = 0
    while start < nonempty.size:
        stop = start
        budget = 0
        while stop < nonempty.size and (budget == 0 or budget + deg[nonempty[stop]] <= step):
            budget += deg[nonempty[stop]]
            stop += 1
        rows = nonempty[start:stop]
        lo, hi = int(a.row_ptr[rows[0]]), int(a.row_ptr[rows[-1] + 1])
        prod = vals[lo:hi, None] * x[a.col_idx[lo:hi]]
        y[rows] = np.add.reduceat(prod, a.row_ptr[rows] - lo, axis=0)
        start = stop
    return y


def error_scale(a: CsrMatrix, x) -> np.ndarray:
    """|A| |X| elementwise: the natural magnitude bound for rounding in A @ X."""
    absa = CsrMatrix(a.n_rows, a.n_cols, a.row_ptr, a.col_idx, np.abs(a.values))
    return reference_spmm(absa, np.abs(np.asarray(x, dtype=np.float64)))


def relative_error(y, ref, scale) -> float:
    err = np.abs(np.asarray(y, dtype=np.float64) - ref)
    if err.size == 0:
        return 0.0
    safe = np.where(scale > 0, scale, 1.0)
    rel = np.where(scale > 0, err / safe, np.where(err > 0, np.inf, 0.0))
    return float(rel.max())


def max_relative_error(y, a: CsrMatrix, x) -> float:
    """max |y - A X| / (|A| |X|), elementwise."""
    return relative_error(y, reference_spmm(a, x), error_scale(a, x))
