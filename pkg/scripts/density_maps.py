#!/usr/bin/env python3
"""Dual density grids per rank (figure analogues).

For the polynomial instance the moment-side dual concentrates on the four
minimizers; for the control instance the state marginal traces the
occupation measure.  Infeasible ranks are skipped with a note.
"""

import argparse

from sdpsketch.experiments import ExperimentConfig, run_density


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", choices=["pop", "poc"], default="pop")
    ap.add_argument("--out", default="runs/density")
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--ranks", default="6,11")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid-points", type=int, default=201)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        kind=args.kind,
        ranks=tuple(int(r) for r in args.ranks.split(",")),
        samples=args.samples,
        seeds=(args.seed,),
        out_dir=args.out,
        grid_points=args.grid_points,
    )
    res = run_density(cfg)
    for tag in sorted(res["grids"]):
        print(f"{tag}: grid written")
    for tag, why in sorted(res["skipped"].items()):
        print(f"{tag}: skipped ({why})")


if __name__ == "__main__":
    main()
