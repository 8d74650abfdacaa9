"""Descriptor count relative to warp tasks across max_block_warps and graph skew."""

import argparse

from blockspmm import (
    PartitionConfig,
    block_partition,
    get_partition_patterns,
    sort_rows_by_degree,
    storage_ratio,
    synth_power_law,
    warp_partition,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--avg-degree", type=float, default=8.0)
    ap.add_argument("--skews", default="1.2,1.5,2.0")
    ap.add_argument("--block-warps", default="1,2,4,6,12,24")
    ap.add_argument("--max-warp-nzs", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    block_warps = [int(b) for b in args.block_warps.split(",")]
    print("skew  " + "  ".join(f"mbw={b:<3d}" for b in block_warps))
    for skew in (float(s) for s in args.skews.split(",")):
        a = synth_power_law(args.n, args.avg_degree, skew, args.seed)
        sorted_a, _ = sort_rows_by_degree(a)
        tasks = warp_partition(a, args.max_warp_nzs)
        cells = []
        for mbw in block_warps:
            cfg = PartitionConfig(mbw, args.max_warp_nzs)
            blocks = block_partition(sorted_a, get_partition_patterns(cfg), cfg)
            cells.append(f"{storage_ratio(blocks, tasks):.4f} ")
        print(f"{skew:<5.2f} " + "  ".join(cells))


if __name__ == "__main__":
    main()
