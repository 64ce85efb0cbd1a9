"""Exact boundary connection probabilities on a small grid, next to Wilson-sampler estimates."""

import argparse
import math

from ustfusion.combinat import enumerate_valenced
from ustfusion.discrete import GridDomain, connection_probability
from ustfusion.ust import mc_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=6)
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    n = args.size
    # two marked edges on the bottom side fused into one point, plus two singles on the right
    G = GridDomain(n, n, marked=(n // 2, n // 2 + 1, n + 1, n + 3))
    vals = (2, 1, 1)
    print(f"{n}x{n} grid, marked edges {G.marked}, valences {vals}")
    for alpha in enumerate_valenced(vals):
        p = connection_probability(G, vals, alpha)
        est = mc_estimate(G, vals, alpha, args.samples, seed=args.seed)
        z = (est["estimate"] - float(p)) / math.sqrt(float(p) * (1 - float(p)) / args.samples)
        print(f"  {alpha}: exact {p} = {float(p):.6g}, sampled {est['estimate']:.6g} (z = {z:+.2f})")


if __name__ == "__main__":
    main()
