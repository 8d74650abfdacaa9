"""Walk the 3-row example through sorting, both partitions and the simulated kernel."""

import argparse

import numpy as np

from blockspmm import (
    CsrMatrix,
    PartitionConfig,
    block_partition,
    get_partition_patterns,
    plan_combined_warps,
    run_block_pipeline,
    sort_rows_by_degree,
    storage_ratio,
    warp_partition,
)

ROWS = [0, 0, 1, 1, 1, 1, 2, 2]
COLS = [1, 3, 0, 1, 2, 3, 0, 2]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--col-dim", type=int, default=96)
    args = ap.parse_args()

    cfg = PartitionConfig(max_block_warps=2, max_warp_nzs=2)
    a = CsrMatrix.from_triplets(3, 4, ROWS, COLS, np.arange(1, 9))
    print("degrees:", a.degrees().tolist())

    sorted_a, perm = sort_rows_by_degree(a)
    print("sorted -> original rows:", perm.sorted_to_orig.tolist())

    patterns = get_partition_patterns(cfg)
    for d, p in patterns.items():
        print(f"  degree {d}: {p.block_rows} row(s) per block, {p.warp_nzs} nonzeros per warp")

    blocks = block_partition(sorted_a, patterns, cfg)
    for b in blocks:
        print("block", b.to_dict(cfg))
    tasks = warp_partition(a, cfg.max_warp_nzs)
    for i, t in enumerate(tasks, 1):
        print(f"warp task {i}:", t._asdict())
    print("storage ratio:", storage_ratio(blocks, tasks))

    plan = plan_combined_warps(args.col_dim, cfg)
    print(f"col_dim={args.col_dim}: c={plan.c}, round_dim={plan.round_dim}, combined warps={plan.n_combined_warps}")
    for w, members in plan.members().items():
        print(f"  combined warp {w}: (pass, physical warp) {members}")

    res = run_block_pipeline(a, np.eye(4, dtype=np.float32), cfg)
    print("A @ I equals A:", np.array_equal(res.y, a.to_dense()))
    print("trace totals:", res.trace.totals)


if __name__ == "__main__":
    main()
