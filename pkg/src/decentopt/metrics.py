"""Stationarity gaps, the MAGENTA potential, boundary touches and run classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .problems import ProblemInstance
from .state import NetworkState

CONVERGED_BELOW = 1e0
DIVERGED_ABOVE = 1e10


class MetricsError(ValueError):
    """Invalid metric request (missing field, parameter violation)."""


@dataclass(frozen=True)
class GapComponents:
    y_norm_sq: float | None
    mean_grad_norm_sq: float
    x_consensus_sq: float
    y_consensus_sq: float | None
    v_over_alpha_sq: float | None = None

    @property
    def eq25(self) -> float:
        """Mean-gradient gap used for the single-stage baselines."""
        return self.mean_grad_norm_sq + self.x_consensus_sq

    @property
    def eq26(self) -> float:
        if self.y_norm_sq is None or self.y_consensus_sq is None:
            raise MetricsError("tracking-variable gap needs y")
        return self.y_norm_sq + self.x_consensus_sq + self.y_consensus_sq


@dataclass(frozen=True)
class PotentialValue:
    value: float
    f_mean: float
    x_term: float
    y_term: float


def consensus_sq(x: np.ndarray) -> float:
    d = x - x.mean(axis=0)
    return float(np.sum(d * d))


def gap_from_arrays(x, grads, y=None, v_over_alpha=None) -> GapComponents:
    """Gap fields from raw arrays; ``grads`` is the stacked local gradient at ``x``."""
    mg = grads.mean(axis=0)
    return GapComponents(
        y_norm_sq=None if y is None else float(np.sum(y * y)),
        mean_grad_norm_sq=float(mg @ mg),
        x_consensus_sq=consensus_sq(x),
        y_consensus_sq=None if y is None else consensus_sq(y),
        v_over_alpha_sq=None if v_over_alpha is None else float(np.sum(v_over_alpha * v_over_alpha)),
    )


def gap_unconstrained(state: NetworkState, p: ProblemInstance) -> GapComponents:
    return gap_from_arrays(state.x, p.grad_stack(state.x), state.y)


class GapMode(enum.Enum):
    UNCONSTRAINED = "unconstrained"
    CONSTRAINED = "constrained"


def avg_gap(window: Sequence[GapComponents], mode: GapMode = GapMode.UNCONSTRAINED) -> float:
    if len(window) == 0:
        raise MetricsError("empty window")
    total = 0.0
    for g in window:
        if mode is GapMode.CONSTRAINED:
            if g.v_over_alpha_sq is None:
                raise MetricsError("constrained gap needs v_over_alpha_sq")
            lead = g.v_over_alpha_sq
        else:
            if g.y_norm_sq is None:
                raise MetricsError("unconstrained gap needs y_norm_sq")
            lead = g.y_norm_sq
        total += lead + g.x_consensus_sq + (g.y_consensus_sq or 0.0)
    return total / len(window)


def potential_coefficient(l_hat: float, gamma: float, xi: float, eta_used: float) -> float:
    slack = 1.0 - (1.0 + gamma) * eta_used**2
    if slack <= 0 or (1.0 + xi) * eta_used**2 >= 1:
        raise MetricsError(f"(1+gamma)eta^2 and (1+xi)eta^2 must be below 1 (eta={eta_used})")
    return slack / (32.0 * (1.0 + 1.0 / xi) * l_hat**2)


def potential_from_arrays(p: ProblemInstance, x, y, coef: float) -> PotentialValue:
    f = p.f_mean(x.mean(axis=0))
    xt = consensus_sq(x)
    yt = coef * consensus_sq(y)
    return PotentialValue(f + xt + yt, f, xt, yt)


def potential(state: NetworkState, p: ProblemInstance, l_hat: float, gamma: float, xi: float, eta_used: float) -> PotentialValue:
    if state.y is None:
        raise MetricsError("potential needs the tracking variable y")
    return potential_from_arrays(p, state.x, state.y, potential_coefficient(l_hat, gamma, xi, eta_used))


class RunClass(enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    UNDECIDED = "undecided"


def classify_run(gap_history: Sequence[float]) -> RunClass:
    """Divergence wins over convergence so that appending values can never
    turn a diverged history into anything else."""
    if len(gap_history) == 0:
        raise MetricsError("empty gap history")
    h = np.asarray(gap_history, dtype=float)
    if not np.all(np.isfinite(h)) or h.max() > DIVERGED_ABOVE:
        return RunClass.DIVERGED
    if h.min() < CONVERGED_BELOW:
        return RunClass.CONVERGED
    return RunClass.UNDECIDED


def is_divergent_value(g: float) -> bool:
    return not math.isfinite(g) or g > DIVERGED_ABOVE


def touch_flags(points: np.ndarray, center: np.ndarray, radius: float, tol: float | None = None) -> np.ndarray:
    tol = 1e-9 * radius if tol is None else tol
    dist = np.linalg.norm(points - center, axis=1)
    return radius - dist <= tol


def boundary_touch(state: NetworkState, schedule, tol: float | None = None, x_tilde: np.ndarray | None = None):
    """Per-agent flags ``(x_flags, x_tilde_flags)``; the second is ``None``
    when no ``x_tilde`` is given."""
    c = np.asarray(schedule.center, dtype=float)
    fx = touch_flags(state.x, c, schedule.radius, tol)
    ft = None if x_tilde is None else touch_flags(x_tilde, c, schedule.radius, tol)
    return fx, ft
