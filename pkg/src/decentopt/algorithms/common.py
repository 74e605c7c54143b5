"""Shared result types and bookkeeping for the iterative schemes."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from ..metrics import GapComponents, RunClass, classify_run
from ..state import NetworkState
from ..trace import TraceRecord


class Termination(enum.Enum):
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"
    CONVERGED = "converged"
    SUCCESS = "success"
    BUDGET = "budget"


class AlgorithmError(ValueError):
    """Invalid algorithm parameters."""


@dataclass
class RunResult:
    state: NetworkState
    termination: Termination
    gaps: list = field(default_factory=list)
    stages: list = field(default_factory=list)

    @property
    def classification(self) -> RunClass:
        return classify_run(self.gaps) if self.gaps else RunClass.UNDECIDED

    @property
    def iterations(self) -> int:
        return self.state.iteration


class Clock:
    def __init__(self):
        self.t0 = time.perf_counter_ns()

    def us(self) -> int:
        return (time.perf_counter_ns() - self.t0) // 1000


def baseline_record(run_id, name, r, alpha, comps: GapComponents, clock: Clock) -> TraceRecord:
    return TraceRecord(
        run_id=run_id,
        algorithm=name,
        stage=-1,
        iteration=r,
        alpha=None if alpha is None else float(alpha),
        radius=None,
        y_norm_sq=comps.y_norm_sq,
        mean_grad_norm_sq=comps.mean_grad_norm_sq,
        x_consensus_sq=comps.x_consensus_sq,
        y_consensus_sq=comps.y_consensus_sq,
        v_over_alpha_sq=None,
        potential=None,
        boundary_touch_count=0,
        wall_us=clock.us(),
    )


def fast_gap(x: np.ndarray, grads: np.ndarray) -> float:
    """Mean-gradient gap ``||mean grad||^2 + ||x - 1 xbar||^2`` without allocation of a record."""
    mg = grads.mean(axis=0)
    d = x - x.mean(axis=0)
    return float(mg @ mg + np.sum(d * d))
