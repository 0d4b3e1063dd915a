"""How to summarize and plot the results of a sweep.

Before running this example analysis, run the small sweep example with:

    python -m jtnoma_examples.basic_usage.small_sweep
"""

import pandas as pd

import jtnoma
from jtnoma.experiments import plot_sweep

# 1. A sweep directory holds human readable files: results.csv, timings.csv,
# summary.yaml, one convergence and one violations file per run and avg_mos.svg

# 2. Printing a summary. Alternatively use `python -m jtnoma status results/small_sweep`
summary = jtnoma.summarize_sweep("results/small_sweep")
print(summary["trends"])

# 3. Plot another metric next to the average MOS
results = pd.read_csv("results/small_sweep/results.csv")
path = plot_sweep(results, "results/small_sweep", metric="avg_rate", filename="avg_rate")
print(f"Plot written to {path}")
