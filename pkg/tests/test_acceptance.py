"""Acceptance criteria. Each test records one PASS/FAIL line, printed at the end of the run.

Tolerances are pinned here and nowhere else.
"""

import random
import time

import numpy as np
import pytest

from blockspmm.degree_sort import sort_rows_by_degree
from blockspmm.graph import CsrMatrix, synth_power_law, synth_uniform_degree
from blockspmm.memmodel import balance_report, compare_strategies
from blockspmm.partition import (
    BlockDescriptor,
    PartitionConfig,
    WarpTask,
    block_partition,
    descriptor_spans,
    get_partition_patterns,
    pack_info,
    storage_ratio,
    warp_partition,
)
from blockspmm.simulate import (
    BLOCK_COMBINED,
    WARP_LOOPED,
    block_workload_trace,
    error_scale,
    plan_combined_warps,
    relative_error,
    spmm,
    warp_workload_trace,
)
from oracles import coverage_counts, golden_matrix, pattern_oracle, random_int_csr, triple_loop_spmm

pytestmark = pytest.mark.acceptance

# pinned tolerances and budgets
GOLDEN_SECONDS = 1.0
STORAGE_SECONDS = 10.0
POWER_LAW_RATIO_MAX = 0.10
ORACLE_SECONDS = 60.0
REL_TOL = 1e-5
COVERAGE_SECONDS = 30.0
BALANCE_SECONDS = 30.0
PLAN_SECONDS = 10.0
LINEARITY_SECONDS = 60.0
LINEARITY_GROWTH_MAX = 2.5
LINEARITY_REPEATS = 7  # min over repeats filters scheduler noise
SWEEP = list(range(16, 129, 16))


def power_law_graph(i, n=10_000):
    return synth_power_law(n, [4, 8, 16, 32][i % 4], [1.1, 1.3, 1.5, 1.8, 2.2][i % 5], 100 + i)


def partition(a, cfg):
    sorted_a, _ = sort_rows_by_degree(a)
    return sorted_a, block_partition(sorted_a, get_partition_patterns(cfg), cfg)


def test_criterion_1_golden_golden(record_criterion):
    t0 = time.perf_counter()
    cfg = PartitionConfig(2, 2)
    a = golden_matrix()
    _, blocks = partition(a, cfg)
    tasks = warp_partition(a, cfg.max_warp_nzs)
    elapsed = time.perf_counter() - t0
    ok = (
        blocks == [BlockDescriptor(2, 0, 0, pack_info(2, 2)), BlockDescriptor(4, 4, 2, pack_info(2, 1))]
        and tasks == [WarpTask(0, 0, 2), WarpTask(1, 0, 2), WarpTask(1, 2, 2), WarpTask(2, 0, 2)]
        and elapsed < GOLDEN_SECONDS
    )
    record_criterion(1, "golden descriptors and warp tasks", ok, f"{elapsed:.3f}s")
    assert ok


def test_criterion_2_storage_ratio(record_criterion):
    t0 = time.perf_counter()
    cfg = PartitionConfig(12, 32)
    exact = []
    # degree 32: one warp per row, 12 rows per block. degree 384: one row fills 12 warps.
    for degree, n in [(32, 1200), (384, 240), (96, 480)]:
        a = synth_uniform_degree(n, degree, seed=degree, n_cols=1000)
        _, blocks = partition(a, cfg)
        exact.append(storage_ratio(blocks, warp_partition(a, 32)) == 1 / 12)
    ratios = []
    for avg, skew, seed in [(8, 1.5, 0), (16, 1.5, 1), (4, 1.2, 2)]:
        a = synth_power_law(100_000, avg, skew, seed)
        _, blocks = partition(a, cfg)
        ratios.append(storage_ratio(blocks, warp_partition(a, 32)))
    elapsed = time.perf_counter() - t0
    ok = all(exact) and max(ratios) <= POWER_LAW_RATIO_MAX and elapsed < STORAGE_SECONDS
    record_criterion(
        2, "storage ratio", ok, f"uniform exact={all(exact)}, power-law max={max(ratios):.4f}, {elapsed:.1f}s"
    )
    assert ok


def test_criterion_3_oracle_equivalence(record_criterion):
    t0 = time.perf_counter()
    rng = random.Random(2024)
    np_rng = np.random.default_rng(2024)
    exact_fail = 0
    worst = 0.0
    for k in range(200):
        cfg = PartitionConfig(rng.randint(1, 16), rng.randint(1, 40))
        a = random_int_csr(rng, max_rows=40, max_cols=40)
        col_dim = rng.randint(1, 130)
        x = np_rng.integers(-4, 5, size=(a.n_cols, col_dim)).astype(np.float32)
        if not np.array_equal(spmm(a, x, cfg), triple_loop_spmm(a, x)):
            exact_fail += 1
        # same structure, real values
        ar = CsrMatrix(a.n_rows, a.n_cols, a.row_ptr, a.col_idx, np_rng.standard_normal(a.nnz).astype(np.float32))
        xr = np_rng.standard_normal((a.n_cols, col_dim)).astype(np.float32)
        err = relative_error(spmm(ar, xr, cfg), triple_loop_spmm(ar, xr), error_scale(ar, xr))
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = exact_fail == 0 and worst <= REL_TOL and elapsed < ORACLE_SECONDS
    record_criterion(
        3, "oracle equivalence", ok, f"integer mismatches={exact_fail}/200, real max rel err={worst:.2e}, {elapsed:.1f}s"
    )
    assert ok


def test_criterion_4_partition_coverage(record_criterion):
    t0 = time.perf_counter()
    rng = random.Random(77)
    bad_cover = bad_pattern = 0
    checked_tables = {}
    for _ in range(1000):
        cfg = PartitionConfig(rng.randint(1, 24), rng.randint(1, 48))
        a = random_int_csr(rng, max_rows=50, max_cols=80)
        sorted_a, blocks = partition(a, cfg)
        if coverage_counts(descriptor_spans(blocks, cfg).tolist(), a.nnz) != [1] * a.nnz:
            bad_cover += 1
        key = (cfg.max_block_warps, cfg.max_warp_nzs)
        if key not in checked_tables:
            table = get_partition_patterns(cfg)
            checked_tables[key] = len(table) == cfg.deg_bound and all(
                tuple(table[d]) == pattern_oracle(d, *key)
                and cfg.max_block_warps % table[d].block_rows == 0
                and (cfg.max_block_warps // table[d].block_rows) * table[d].warp_nzs >= d
                for d in range(1, cfg.deg_bound + 1)
            )
    bad_pattern = sum(not v for v in checked_tables.values())
    elapsed = time.perf_counter() - t0
    ok = bad_cover == 0 and bad_pattern == 0 and elapsed < COVERAGE_SECONDS
    record_criterion(
        4,
        "partition coverage",
        ok,
        f"cover failures={bad_cover}/1000, pattern tables checked={len(checked_tables)} bad={bad_pattern}, {elapsed:.1f}s",
    )
    assert ok


def _balance_pairs():
    cfg = PartitionConfig(12, 32)
    out = []
    for i in range(20):
        a = power_law_graph(i)
        sorted_a, blocks = partition(a, cfg)
        bb = balance_report(block_workload_trace(sorted_a, blocks, 32, cfg))
        bw = balance_report(warp_workload_trace(a, warp_partition(a, 32), 32, cfg))
        out.append((bb, bw))
    return out


def test_criterion_5_balance(record_criterion):
    # imbalance: busiest warp over mean load, taken per block (the issue-slot view) and nnz-weighted
    t0 = time.perf_counter()
    pairs = _balance_pairs()
    wins = sum(bb.imbalance <= bw.imbalance for bb, bw in pairs)
    elapsed = time.perf_counter() - t0
    ok = wins == 20 and elapsed < BALANCE_SECONDS
    worst_block = max(bb.imbalance for bb, _ in pairs)
    best_warp = min(bw.imbalance for _, bw in pairs)
    record_criterion(
        5,
        "balance (within-block max/mean)",
        ok,
        f"block <= warp in {wins}/20, block max={worst_block:.4f}, warp min={best_warp:.4f}, {elapsed:.1f}s",
    )
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="max/mean over all launched warps: both maxima equal max_warp_nzs and block-level launches more warps",
)
def test_criterion_5_global_reading(record_criterion):
    pairs = _balance_pairs()
    wins = sum(bb.global_max_over_mean <= bw.global_max_over_mean for bb, bw in pairs)
    ok = wins == 20
    record_criterion(5, "balance (global max/mean over all warps, informational)", ok, f"block <= warp in {wins}/20")
    assert ok


def test_criterion_6_combined_warp_plan(record_criterion):
    t0 = time.perf_counter()
    plan = plan_combined_warps(96, PartitionConfig(12, 32))
    golden = (plan.c, plan.round_dim) == (3, 96)
    bad = 0
    for mbw in (1, 2, 3, 12, 32):
        cfg = PartitionConfig(mbw, 4)
        for col_dim in range(1, 129):
            p = plan_combined_warps(col_dim, cfg)
            hits = {}
            for la in p.lane_assignments():
                if la.active:
                    hits[la.combined_warp_id, la.lane_id] = hits.get((la.combined_warp_id, la.lane_id), 0) + 1
            expected = {(w, k): 1 for w in range(mbw) for k in range(col_dim)}
            bad += hits != expected
    elapsed = time.perf_counter() - t0
    ok = golden and bad == 0 and elapsed < PLAN_SECONDS
    record_criterion(6, "combined-warp plan", ok, f"c=3/round_dim=96: {golden}, lane coverage failures={bad}, {elapsed:.1f}s")
    assert ok


def test_criterion_7_preprocessing_linearity(record_criterion):
    t0 = time.perf_counter()
    cfg = PartitionConfig(12, 32)
    times = {}
    for n in (100_000, 200_000, 400_000):
        a = synth_power_law(n, 8, 1.5, 0)
        best = float("inf")
        for _ in range(LINEARITY_REPEATS):
            s = time.perf_counter()
            sorted_a, _ = sort_rows_by_degree(a)
            block_partition(sorted_a, get_partition_patterns(cfg), cfg)
            best = min(best, time.perf_counter() - s)
        times[n] = best
    growth = [times[200_000] / times[100_000], times[400_000] / times[200_000]]
    elapsed = time.perf_counter() - t0
    ok = max(growth) < LINEARITY_GROWTH_MAX and elapsed < LINEARITY_SECONDS
    record_criterion(
        7, "preprocessing linearity", ok, f"growth per doubling={growth[0]:.2f}, {growth[1]:.2f}, {elapsed:.1f}s"
    )
    assert ok


def test_criterion_8_issue_counts(record_criterion):
    cfg = PartitionConfig(12, 32)
    graphs = [golden_matrix()] + [power_law_graph(i, n=5000) for i in range(5)]
    graphs.append(synth_uniform_degree(1200, 32, seed=3))
    violations = 0
    cases = 0
    margin = []
    for a in graphs:
        for row in compare_strategies(a, list(range(1, 129)) + SWEEP, cfg):
            cases += 1
            comb = row.mem[BLOCK_COMBINED].warp_instruction_issues
            loop = row.mem[WARP_LOOPED].warp_instruction_issues
            violations += comb > loop
            margin.append(comb / loop)
    ok = violations == 0
    record_criterion(
        8, "combined issues <= looped issues", ok, f"violations={violations}/{cases}, max ratio={max(margin):.3f}"
    )
    assert ok
