"""Tight versus fixed convexification of the joint-transmission interference.

The per-pair policy refreshes the bound parameters from the previous powers, which makes
the convex bound exact at that point. A fixed scalar is looser and usually settles on a
lower total QoE.
"""

import logging

import jtnoma
from jtnoma.solvers import LambdaPolicy, PowerSolveConfig

logging.basicConfig(level=logging.WARNING)

inst = jtnoma.generate_instance(
    jtnoma.NetworkConfig.default("audio", num_sbs=3, num_sut=3, num_subcarriers=4, num_put=2)
)
for policy in LambdaPolicy:
    settings = jtnoma.AlgorithmSettings(
        max_outer_iters=10, power=PowerSolveConfig(lambda_policy=policy)
    )
    report = jtnoma.run_algorithm1(inst, settings)
    print(
        f"{policy.value}: total QoE {report.utility:.4f},"
        f" {report.status.value} after {report.iterations} iterations"
    )
