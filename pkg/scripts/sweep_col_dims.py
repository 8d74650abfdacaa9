"""Memory/issue model sweep over col_dim on synthetic power-law graphs; writes CSV."""

import argparse
import sys

from blockspmm import PartitionConfig, synth_power_law
from blockspmm.memmodel import comparison_to_csv, compare_strategies
from blockspmm.simulate import BLOCK_COMBINED, WARP_LOOPED


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--avg-degree", type=float, default=8.0)
    ap.add_argument("--skew", type=float, default=1.5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--col-dims", default="16,32,48,64,80,96,112,128")
    ap.add_argument("--max-block-warps", type=int, default=12)
    ap.add_argument("--max-warp-nzs", type=int, default=32)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    a = synth_power_law(args.n, args.avg_degree, args.skew, args.seed)
    cfg = PartitionConfig(args.max_block_warps, args.max_warp_nzs)
    table = compare_strategies(a, [int(k) for k in args.col_dims.split(",")], cfg)
    text = comparison_to_csv(table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for row in table:
        comb = row.mem[BLOCK_COMBINED].warp_instruction_issues
        loop = row.mem[WARP_LOOPED].warp_instruction_issues
        print(f"col_dim={row.col_dim:4d}  issues combined/looped = {comb / loop:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
