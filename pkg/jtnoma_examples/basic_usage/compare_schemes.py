"""Run the four multiple-access schemes on the same instances."""

import logging

import pandas as pd

import jtnoma

logging.basicConfig(level=logging.WARNING)

settings = jtnoma.AlgorithmSettings(max_outer_iters=10)
rows = []
for seed in range(3):
    config = jtnoma.NetworkConfig.default(
        "video", num_sbs=3, num_sut=4, num_subcarriers=4, num_put=2, rng_seed=seed
    )
    inst = jtnoma.generate_instance(config)
    for scheme, report in jtnoma.run_all_schemes(inst, settings=settings).items():
        rows.append(
            {
                "seed": seed,
                "scheme": scheme.value,
                "status": report.status.value,
                "total_qoe": report.utility,
                "avg_mos": float(report.per_user_mos.mean()),
            }
        )

results = pd.DataFrame(rows)
print(results.to_string(index=False))
print()
print(results.groupby("scheme")[["total_qoe", "avg_mos"]].mean())
