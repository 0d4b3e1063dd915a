"""Primitive types used across jtnoma."""

from __future__ import annotations

from typing import Sequence, Tuple, Union
from typing_extensions import TypeAlias

import numpy as np
import torch

Array: TypeAlias = Union[np.ndarray, torch.Tensor]

# A per-entity limit given either once for every entity or once per entity.
PerEntity: TypeAlias = Union[float, Sequence[float]]

# (family, index) pair locating a single constraint residual, e.g. ("sbs_power", (3,)).
ResidualKey: TypeAlias = Tuple[str, Tuple[int, ...]]

TORCH_DTYPE = torch.float64


def as_tensor(values: Array | float, *, dtype: torch.dtype = TORCH_DTYPE) -> torch.Tensor:
    """Convert numpy arrays or python scalars to a float64 tensor without copying tensors."""
    if isinstance(values, torch.Tensor):
        return values.to(dtype)
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=dtype)


def to_numpy(values: Array) -> np.ndarray:
    """Detach and convert a tensor (or array) to a float64 numpy array."""
    if isinstance(values, torch.Tensor):
        return values.detach().cpu().numpy().astype(np.float64, copy=False)
    return np.asarray(values, dtype=np.float64)
