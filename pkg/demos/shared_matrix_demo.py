"""Why one factorization can serve a whole ensemble.

All samples of the max-friction stepper share the same implicit operator
per subdomain, so a run factorizes twice no matter how many samples or
steps it advances; the per-sample baseline refactorizes for every sample at
every step.  The wall-time gap below is the whole point.
"""

from ensheat import RunConfig, run_timing_study

cfg = RunConfig(
    experiment="timing", mesh=(16,), dt=(0.05,), T=0.5, sizes=(2, 4),
    seed=7, timing_repeats=1, timing_warmup=False,
)
result = run_timing_study(cfg)

print(f"mesh 1/{result.n}, {round(result.T / result.dt)} steps\n")
print(f"{'ensemble':>9} {'algorithm':>10} {'seconds':>9} {'factorizations':>15}")
for row in result.rows:
    print(f"{row.size}x{row.size:<7} {row.algorithm:>10} {row.seconds:9.3f} "
          f"{row.factorizations:15d}")

for size in (2, 4):
    a2 = result.savings(size, "a2")
    a3 = result.savings(size, "a3")
    print(f"\nsavings at {size}x{size}: a2 {100 * a2:.0f}%  a3 {100 * a3:.0f}%")
