"""Renormalized discrete probabilities on shrinking meshes against the continuum value."""

from fractions import Fraction

from ustfusion.discrete import convergence_series

half = Fraction(1, 2)
cases = {
    "one link, opposite sides": ((1, 1), [(1, 2)], [("left", half), ("right", half)]),
    "two nested links": ((1, 1, 1, 1), [(1, 4), (2, 3)],
                         [("left", half), ("bottom", Fraction(1, 4)), ("bottom", Fraction(3, 4)), ("right", half)]),
}

for name, (vals, links, placements) in cases.items():
    out = convergence_series(vals, links, placements, sizes=(7, 15, 31))
    print(f"{name}: continuum {out['target']:.8g}")
    for row in out["rows"]:
        print(f"  delta={row['delta']:>5}  renormalized={row['renormalized']:.8g}  gap={row['relative_gap']:.2e}")
    print(f"  fitted order {out['order']:.2f}")
