"""Loading of YAML configuration files.

A config file has up to four top-level sections, each mirroring the field names of one
settings dataclass:

```yaml
network:      # NetworkConfig
  service: web
  num_sut: 8
channel:      # ChannelModelParams
  pathloss_exponent_mbs: 3.76
solver:       # AlgorithmSettings (nested `power`, `schedule`, `alm`, `tolerances`)
  max_outer_iters: 50
sweep:        # ScenarioSpec
  axis: num_sut
  values: [4, 6, 8]
```
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path
from typing import Any, Mapping

import yaml

from jtnoma.config import InvalidConfigError

logger = logging.getLogger(__name__)

NETWORK = "network"
CHANNEL = "channel"
SOLVER = "solver"
SWEEP = "sweep"

SECTIONS = (NETWORK, CHANNEL, SOLVER, SWEEP)


def config_loader(path: str | Path) -> dict:
    """Loads a YAML file and returns its contents.

    Args:
        path: Path to the YAML file.

    Returns:
        Content of the yaml (dict). An empty file yields an empty dict.

    Raises:
        FileNotFoundError: If the file at 'path' does not exist.
        ValueError: If the file is not a valid YAML mapping.
    """
    try:
        with open(path) as file:  # noqa: PTH123
            config = yaml.safe_load(file)
    except FileNotFoundError as e:
        raise FileNotFoundError(
            f"The specified file was not found: '{path}'."
            f" Please make sure that the path is correct and "
            f"try again."
        ) from e
    except yaml.YAMLError as e:
        raise ValueError(f"The file at {path} is not a valid YAML file.") from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ValueError(f"The file at {path} must contain a mapping at the top level.")
    return config


def get_sections_from_yaml(path: str | Path) -> dict[str, dict[str, Any]]:
    """Load a config file and split it into its known sections.

    Raises:
        InvalidConfigError: If the file has an unknown top-level section or a section
            that is not a mapping.
    """
    config = config_loader(path)
    sections: dict[str, dict[str, Any]] = {}
    for key, value in config.items():
        if key not in SECTIONS:
            raise InvalidConfigError(
                f"Section '{key}' is not a valid section of a jtnoma config file."
                f" See here all valid sections: {', '.join(SECTIONS)}"
            )
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise InvalidConfigError(f"Section '{key}' must be a mapping, got {value!r}")
        sections[key] = value

    logger.debug(f"Loaded config sections {sorted(sections)} from {path}")
    return sections


def check_keys(section: str, data: Mapping[str, Any], target: type) -> None:
    """Check that every key of `data` names a field of the dataclass `target`.

    Raises:
        InvalidConfigError: Naming the offending keys and the allowed ones.
    """
    allowed = [f.name for f in dataclasses.fields(target)]
    unknown = [key for key in data if key not in allowed]
    if unknown:
        raise InvalidConfigError(
            f"Parameter(s) {unknown} of section '{section}' are not valid."
            f" See here all valid parameters: {', '.join(allowed)}"
        )
