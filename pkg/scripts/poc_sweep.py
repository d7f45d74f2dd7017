#!/usr/bin/env python3
"""Rank sweep on the 1-D optimal-control instance (attained value 1).

The attained objective climbs from -inf at rank 1 to the analytic value 1 at
full rank, mirroring the control table's shape.
"""

import argparse

from sdpsketch.experiments import ExperimentConfig, run_rank_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/poc_sweep")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--ranks", default="1,2,3")
    ap.add_argument("--nested", action="store_true")
    ap.add_argument("--problem", default=None, help="ControlProblem JSON file")
    args = ap.parse_args()

    cfg = ExperimentConfig(
        kind="poc",
        ranks=tuple(int(r) for r in args.ranks.split(",")),
        samples=args.samples,
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        nested=args.nested,
        problem_path=args.problem,
        out_dir=args.out,
    )
    res = run_rank_sweep(cfg)
    print(f"full reference: {res.reference.objective!r}")
    for rank in sorted(set(c.rank for c in res.cells)):
        print(f"rank {rank:3d}  median {res.median_objective(rank)!r}")
    print(f"table: {res.table_path}")


if __name__ == "__main__":
    main()
