"""Stacked per-agent iterates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class NetworkState:
    """Row ``i`` of ``x`` (and ``y``) belongs to agent ``i``.

    ``stage`` is -1 for single-stage algorithms.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    iteration: int = 0
    stage: int = -1

    @property
    def n_agents(self) -> int:
        return self.x.shape[0]

    @property
    def x_bar(self) -> np.ndarray:
        return self.x.mean(axis=0)

    @property
    def y_bar(self) -> np.ndarray | None:
        return None if self.y is None else self.y.mean(axis=0)

    def copy(self) -> "NetworkState":
        return NetworkState(self.x.copy(), None if self.y is None else self.y.copy(), self.iteration, self.stage)


def as_stacked(x, n_agents: int | None = None) -> np.ndarray:
    """Coerce per-agent values to an ``N x K`` float array (scalars per agent become K=1)."""
    arr = np.array(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"expected an N x K array, got shape {arr.shape}")
    if n_agents is not None and arr.shape[0] != n_agents:
        raise ValueError(f"expected {n_agents} rows, got {arr.shape[0]}")
    return arr
