#!/usr/bin/env python3
"""Rank sweep on the default degree-8 two-variable instance (table analogue).

Writes sweep.csv / sweep_timing.csv plus per-cell problem files under --out.
"""

import argparse

from sdpsketch.experiments import ExperimentConfig, run_rank_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/pop_sweep")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--ranks", default="1,3,6,9,11,14,17,19,22,25")
    ap.add_argument("--nested", action="store_true")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        kind="pop",
        ranks=tuple(int(r) for r in args.ranks.split(",")),
        samples=args.samples,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        nested=args.nested,
        jobs=args.jobs,
        out_dir=args.out,
    )
    res = run_rank_sweep(cfg)
    print(f"full reference: {res.reference.objective!r}")
    for rank in sorted(set(c.rank for c in res.cells)):
        print(f"rank {rank:3d}  cone {rank * (rank + 1) // 2:4d}  "
              f"median {res.median_objective(rank)!r}")
    print(f"table: {res.table_path}")


if __name__ == "__main__":
    main()
