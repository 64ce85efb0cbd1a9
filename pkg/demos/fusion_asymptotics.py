"""Merging two boundary points: measured exponents and constants against the predicted ones."""

from fractions import Fraction

from ustfusion.cft import asy_check, fusion_limit_check
from ustfusion.combinat import enumerate_valenced

print(" s  s'  m   predicted  measured       constant error")
for s in range(1, 4):
    for sp in range(1, 6 - s):
        for m in range(min(s, sp) + 1):
            r = asy_check(s, sp, m)
            err = r.get("constant_relative_error")
            print(f"{s:2d} {sp:2d} {m:3d} {r['predicted_exponent']:10d} {r['measured_exponent']:10.5f}   "
                  f"{'-' if err is None else f'{err:.1e}'}")

# collapsing three unfused points onto one fused point of valence 3
(alpha,) = enumerate_valenced((3, 1, 1, 1))
out = fusion_limit_check(alpha, (0, 2, 3, 5), 0, [Fraction(1, 10 ** k) for k in range(2, 6)], mode="simultaneous")
for row in out["rows"]:
    print(f"eps={row['eps']}: relative error {row['relative_error']:.2e}")
