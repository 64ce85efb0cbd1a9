"""Simulate driving functions for the three growth variants and write them as CSV files."""

import sys
from pathlib import Path

from ustfusion.combinat import enumerate_valenced
from ustfusion.sle import simulate_driving

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "sle_out")
out_dir.mkdir(exist_ok=True)

(alpha,) = [a for a in enumerate_valenced((1, 2, 1)) if a.count(1, 2) == 1]
runs = {
    "local_fused": simulate_driving("local-fused", [0.0, 1.0, 2.0], dt=1e-5, horizon=0.02, seed=7,
                                    alpha=alpha, valences=(1, 2, 1), j=0),
    "watermelon": simulate_driving("watermelon", [0.0, 0.6, 1.5], dt=1e-5, horizon=0.02, seed=7, j=1),
    "simultaneous": simulate_driving("simultaneous", [-1.0, 0.0, 1.2], dt=1e-5, horizon=0.02, seed=7),
}
for name, rec in runs.items():
    (out_dir / f"{name}.csv").write_text(rec.to_csv())
    info = rec.to_dict()
    print(f"{name}: {info['steps']} steps, stop={info['stop_reason']}, final points {info['final_points']}")
