#!/usr/bin/env python3
"""Sweep the graph neighborhood size M and report accuracy per value.

Mirrors the neighborhood-size ablation at desk scale: train once on a
synthetic split, then rebuild the graph and rerun Louvain for each M. With
the default well-separated blobs the curve is flat at 1.0; lower
--separation (e.g. 6) to watch accuracy decay as extra neighbors bridge
classes.
"""

import argparse

import catdisc as cd


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--separation", type=float, default=20.0)
    ap.add_argument("--stddev", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--m-values", type=int, nargs="+", default=[5, 10, 15, 20, 25, 30])
    args = ap.parse_args()

    synth = cd.SynthSpec(
        num_classes=args.classes,
        points_per_class=args.per_class,
        dim=args.dim,
        center_separation=args.separation,
        cluster_stddev=args.stddev,
        seed=args.seed,
    )
    ds = cd.make_split(cd.generate_synthetic(synth), cd.SplitSpec(0.5, 0.5, seed=args.seed))
    spec = cd.TrainSpec(epochs=args.epochs, seed=args.seed, view=cd.ViewSpec(seed=args.seed))
    head, _, _ = cd.train(ds, spec)
    z = cd.embed(ds, head)

    print(f"# N={ds.n} known={ds.known_classes.size} separation/stddev="
          f"{args.separation / args.stddev:.1f}")
    print("M     acc_all  acc_known  acc_novel  k")
    for m in args.m_values:
        part = cd.louvain(cd.build_graph(z, ds, m))
        rep = cd.evaluate(part, ds)
        print(f"{m:<5d} {rep.acc_all:.4f}   {rep.acc_known:.4f}     "
              f"{rep.acc_novel:.4f}     {rep.discovered_k}")


if __name__ == "__main__":
    main()
