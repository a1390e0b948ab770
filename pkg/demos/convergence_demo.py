"""Mesh-refinement study on the smooth two-domain problem.

Runs the three ensemble steppers with dt = h^2 on a short ladder of meshes
and prints per-sample relative errors with their observed orders.  The L2
columns should shrink by ~4x per refinement (order 2) and the H1 columns
by ~2x (order 1).
"""

from ensheat import RunConfig, run_convergence_study

cfg = RunConfig(experiment="converge", algo="all", mesh=(4, 8, 16), T=1.0)
result = run_convergence_study(cfg)

print(f"forcing residual gate: {result.gate_residual:.2e}\n")
for algo, data in result.per_algo.items():
    print(f"=== {algo} (factorizations per run: {data.factorizations}) ===")
    for norm in ("l2", "h1"):
        e = data.errors("u1", norm)
        rates = data.rates("u1", norm)
        print(f"  {norm} errors of the upper field, sample 0:")
        for li, n in enumerate(data.ns):
            rate = f"  order {rates[li - 1, 0]:.2f}" if li else ""
            print(f"    1/{n:<3d} {e[li, 0]:.6f}{rate}")
    print()

print("Sample spread at the finest level (l2, upper field):")
finest = {a: d.errors("u1", "l2")[-1] for a, d in result.per_algo.items()}
for algo, row in finest.items():
    print(f"  {algo}: min {row.min():.6f}  max {row.max():.6f}")
