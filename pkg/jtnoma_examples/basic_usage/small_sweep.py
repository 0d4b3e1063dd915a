"""Average MOS per SUT against the number of SUTs for every scheme.

Analyse the results afterwards with

    python -m jtnoma_examples.basic_usage.analyse
"""

import logging

import jtnoma

logging.basicConfig(level=logging.INFO)

spec = jtnoma.ScenarioSpec(
    service="web",
    axis="num_sut",
    values=[2, 3, 4],
    seeds=[0, 1],
    schemes=["jt_noma", "non_jt_oma"],
    network={"num_sbs": 3, "num_subcarriers": 4, "num_put": 2},
    solver=jtnoma.AlgorithmSettings(max_outer_iters=5),
    out_dir="results/small_sweep",
)
result = jtnoma.run_sweep(spec)
print(result.results[["value", "seed", "scheme", "status", "avg_mos"]])
