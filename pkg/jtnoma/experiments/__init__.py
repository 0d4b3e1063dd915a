from jtnoma.experiments.info import ScenarioConfigs
from jtnoma.experiments.plotting import plot_sweep
from jtnoma.experiments.status import aggregate, summarize_sweep, trend_statistics
from jtnoma.experiments.sweep import (
    ScenarioSpec,
    SweepAxis,
    SweepResult,
    run_cell,
    run_sweep,
)

__all__ = [
    "ScenarioConfigs",
    "ScenarioSpec",
    "SweepAxis",
    "SweepResult",
    "aggregate",
    "plot_sweep",
    "run_cell",
    "run_sweep",
    "summarize_sweep",
    "trend_statistics",
]
