#!/usr/bin/env python3
"""Adaptive run of the rigid-wedge push benchmark (ex72), 20 levels.

No closed-form solution: the run tracks the estimator decay and reports how
strongly the marking concentrates near the contact boundary and the
Dirichlet-Neumann corners (the free-boundary region of this problem).
"""

import argparse

import signorini.adaptive as ad
import signorini.problems as prb


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=int, default=20)
    parser.add_argument("--theta", type=float, default=0.5)
    parser.add_argument("--n0", type=int, default=4)
    parser.add_argument("--out", default="out_wedge")
    args = parser.parse_args()

    problem = prb.rigid_wedge_push()
    result = ad.adapt(problem, ad.AdaptiveParams(levels=args.levels,
                                                 theta=args.theta, n0=args.n0),
                      out_dir=args.out, write_trace=True)

    print(f"{'lvl':>4} {'ndof':>8} {'eta_h':>12} {'eta6':>10} {'eta7':>10} "
          f"{'active':>7} {'near':>6}")
    for r in result.records:
        near = f"{r.marked_near_fraction:.2f}" if r.n_marked else "  -"
        print(f"{r.level:>4} {r.ndof:>8} {r.eta_h:12.4e} {r.eta6:10.2e} "
              f"{r.eta7:10.2e} {r.active_nodes:>7} {near:>6}")
    print(f"estimator: {result.records[0].eta_h:.1f} -> {result.records[-1].eta_h:.1f}")
    print(f"outputs in {args.out}/")


if __name__ == "__main__":
    main()
