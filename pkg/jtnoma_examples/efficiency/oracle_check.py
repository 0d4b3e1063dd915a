"""Compare the solver with the exhaustive oracle on micro instances.

The oracle enumerates every feasible schedule and grid-searches the powers, so it is
only usable for a handful of SBSs, SUTs and subcarriers. With one subcarrier the SIC
cap keeps every schedule small enough for the power grid.
"""

import logging

import jtnoma

logging.basicConfig(level=logging.WARNING)

for seed in range(3):
    inst = jtnoma.generate_instance(
        jtnoma.NetworkConfig(num_sbs=2, num_sut=2, num_put=1, num_subcarriers=1, rng_seed=seed)
    )
    oracle = jtnoma.best_joint(inst, grid_points=16)
    report = jtnoma.run_algorithm1(inst, jtnoma.AlgorithmSettings(max_outer_iters=10))
    if oracle is None:
        print(f"seed {seed}: the oracle found no feasible point, solver {report.status.value}")
        continue
    print(
        f"seed {seed}: solver {report.utility:.4f}, oracle {oracle.utility:.4f}"
        f" ({oracle.schedules_evaluated} schedules, {oracle.schedules_skipped} skipped),"
        f" ratio {report.utility / oracle.utility:.3f}"
    )
