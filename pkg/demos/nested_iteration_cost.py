"""Nested iteration: most of the work happens on coarse meshes.

Costs are counted in work units: one unit is one assemble-and-solve on the
finest mesh, and coarser steps are weighted by their share of nonzeros.
Starting the fine solve from the interpolated coarse solution leaves only
one or two Newton steps on each fine level. Solving on the finest mesh
alone needs many more steps because the initial guess is far away and the
damping schedule is conservative there.
"""
from nematicmin import bench

LEVELS = 4

for nested in (True, False):
    row, rep = bench.run(bench.RunConfig(stepping="damped", levels=LEVELS, nested=nested))
    label = "with nested iteration" if nested else "finest mesh only"
    print(f"{label:22s} WU={row.wu:6.2f}  Newton steps per level {row.iterations}  "
          f"energy {row.energy:.6f}")

row, _ = bench.run(bench.RunConfig(problem="tilt-twist", levels=LEVELS))
print(f"\ntilt-twist, perturbed start: energy {row.energy:.5f}")
row, _ = bench.run(bench.RunConfig(problem="tilt-twist", levels=LEVELS, perturb=0.0))
print(f"tilt-twist, planar start:    energy {row.energy:.5f} (a higher-energy planar state)")
