"""Run a sweep described in a YAML file.

The same file runs from the command line with

    python -m jtnoma sweep jtnoma_examples/declarative_usage/scenario.yaml
"""

import logging
from pathlib import Path

import jtnoma

logging.basicConfig(level=logging.INFO)

spec = jtnoma.ScenarioSpec.from_yaml(Path(__file__).parent / "scenario.yaml")
result = jtnoma.run_sweep(spec)
print(f"Worst status: {result.worst_status}")
jtnoma.summarize_sweep(result.out_dir)
