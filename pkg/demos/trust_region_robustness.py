"""Nano-patterned cell: damped Newton against trust regions.

With a large penalty weight the penalty functional becomes stiff and plain
damped Newton steps overshoot; the iteration blows up and is flagged as
divergent. The trust-region variants compare the actual and predicted
decrease of the functional at each step and shrink the region when the
quadratic model is not trustworthy, so they converge for the same weights.
"""
from nematicmin import bench

LEVELS = 3

for zeta in (1e3, 1e5, 1e6):
    for stepping in ("damped", "tr_simple", "tr_2d"):
        row, _ = bench.run(bench.RunConfig(problem="nano", method="penalty", stepping=stepping,
                                           zeta=zeta, levels=LEVELS))
        status = f"energy {row.energy:.5f}" if row.converged else "diverged"
        print(f"zeta={zeta:8.0e}  {stepping:9s}  {status:18s} iterations per level {row.iterations}")

row, _ = bench.run(bench.RunConfig(problem="nano", levels=LEVELS))
print(f"\nLagrange multiplier reference: energy {row.energy:.5f} "
      f"(unit-length deviation {row.min_dev:.1e} .. {row.max_dev:.1e})")
