"""Synthetic worlds: terrain, demonstrations, energy labels, images.

Generates one world, walks through what each piece of a sample contains,
and renders the ground-truth cost map and the demonstration overlay as
netpbm images under demos/out/.
"""

from pathlib import Path

import numpy as np

from travirl.render import trajectory_overlay, write_pgm, write_ppm
from travirl.synth import WorldSpec, gen_dataset, gen_world

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

spec = WorldSpec(rows=16, cols=16, seed=42, obstacle_density=0.08, roughness=1.0,
                 beta=0.0, energy_noise=0.0, imu_len=64)
features, gt_cost = gen_world(spec)
print(f"world {spec.rows}x{spec.cols}: elevation [{features.elevation.min():.2f}, "
      f"{features.elevation.max():.2f}] m, cost [{gt_cost.min():.2f}, {gt_cost.max():.2f}]")
print(f"obstacle cells (cost > 10): {(gt_cost > 10).sum()}")

samples = gen_dataset(spec, count=12, split_ratio=0.75)
print(f"\ndataset: {sum(s.split == 'train' for s in samples)} train / "
      f"{sum(s.split == 'test' for s in samples)} test")
for s in samples[:5]:
    cells = s.trajectory.cells()
    mean_cost = np.mean([s.gt_cost[r, c] for r, c in cells])
    print(f"  sample {s.sample_id}: {len(cells):2d} steps, "
          f"mean crossed cost {mean_cost:5.2f}, AEC {s.trajectory.aec:.4f}")

sample = samples[0]
write_pgm(out / "gt_cost.pgm", sample.gt_cost)
write_pgm(out / "elevation.pgm", sample.features.elevation)
write_ppm(out / "demo_overlay.ppm", trajectory_overlay(sample.features.color, sample.trajectory))
print(f"\nwrote gt_cost.pgm, elevation.pgm, demo_overlay.ppm to {out}")
print("(the overlay paints visited cells red and the stop cell cyan)")
