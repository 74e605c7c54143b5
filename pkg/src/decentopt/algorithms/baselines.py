"""DGD, two-point gradient tracking and Prox-PDA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..graph import MixingMatrix
from ..metrics import CONVERGED_BELOW, gap_from_arrays, is_divergent_value
from ..problems import ProblemInstance
from ..state import NetworkState, as_stacked
from ..trace import TraceSink
from .common import AlgorithmError, Clock, RunResult, Termination, baseline_record, fast_gap

Observer = Callable[[int, np.ndarray], None]


@dataclass(frozen=True)
class Constant:
    alpha: float

    def at(self, r: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class Diminishing:
    """``alpha / (1 + r)`` for ``r = 0, 1, ...``."""

    alpha: float

    def at(self, r: int) -> float:
        return self.alpha / (1.0 + r)


@dataclass
class _Loop:
    """Common stop/trace logic; ``step`` returns False when the run must stop."""

    p: ProblemInstance
    name: str
    max_iters: int
    sink: TraceSink | None
    run_id: int
    stop_on_divergence: bool
    stop_on_convergence: bool
    observer: Observer | None

    def __post_init__(self):
        self.clock = Clock()
        self.gaps: list[float] = []
        self.termination = Termination.MAX_ITERS

    def visit(self, r: int, x: np.ndarray, grads: np.ndarray, alpha) -> bool:
        if self.observer is not None:
            self.observer(r, x)
        with np.errstate(all="ignore"):
            if self.sink is not None and self.sink.wants(r):
                comps = gap_from_arrays(x, grads)
                self.sink.append(baseline_record(self.run_id, self.name, r, alpha, comps, self.clock))
                g = comps.eq25
            else:
                g = fast_gap(x, grads)
        self.gaps.append(g)
        if is_divergent_value(g) or not np.all(np.isfinite(x)):
            self.termination = Termination.DIVERGED
            return not self.stop_on_divergence
        if self.stop_on_convergence and g < CONVERGED_BELOW:
            self.termination = Termination.CONVERGED
            return False
        return True

    def result(self, x, r) -> RunResult:
        if self.termination is Termination.MAX_ITERS and self.gaps and any(is_divergent_value(g) for g in self.gaps):
            self.termination = Termination.DIVERGED
        return RunResult(NetworkState(x, None, r), self.termination, self.gaps)


def _w(w) -> np.ndarray:
    return np.asarray(w.entries if isinstance(w, MixingMatrix) else w, dtype=float)


def run_dgd(
    p: ProblemInstance,
    w,
    x0,
    stepsize,
    max_iters: int,
    trace_sink: TraceSink | None = None,
    *,
    run_id: int = 0,
    stop_on_divergence: bool = True,
    stop_on_convergence: bool = False,
    observer: Observer | None = None,
) -> RunResult:
    """``x^{r+1} = W x^r - alpha_r grad g(x^r)``; the trace covers ``r = 0..``."""
    if stepsize.alpha < 0:
        raise AlgorithmError("stepsize must be non-negative")
    wm = _w(w)
    x = as_stacked(x0, p.n_agents)
    loop = _Loop(p, "dgd", max_iters, trace_sink, run_id, stop_on_divergence, stop_on_convergence, observer)
    r = 0
    with np.errstate(all="ignore"):
        g = p.grad_stack(x)
        while loop.visit(r, x, g, stepsize.at(r)) and r < max_iters:
            x = wm @ x - stepsize.at(r) * g
            r += 1
            g = p.grad_stack(x)
    return loop.result(x, r)


def _two_point(p, loop, lin, scale, x_prev, x_cur, r0, max_iters, alpha_rec):
    """``x+ = lin(x, x_prev) - scale (g(x) - g(x_prev))``, shared by GT and Prox-PDA."""
    r = r0
    g_prev = p.grad_stack(x_prev)
    g = p.grad_stack(x_cur)
    steps = 0
    while loop.visit(r, x_cur, g, alpha_rec) and steps < max_iters:
        x_next = lin(x_cur, x_prev) - scale * (g - g_prev)
        x_prev, g_prev = x_cur, g
        x_cur = x_next
        g = p.grad_stack(x_cur)
        r += 1
        steps += 1
    return x_cur, r


def run_gradient_tracking(
    p: ProblemInstance,
    w,
    x_init_pair=None,
    alpha: float = 0.0,
    max_iters: int = 1000,
    trace_sink: TraceSink | None = None,
    *,
    bootstrap_from=None,
    first_index: int | None = None,
    run_id: int = 0,
    stop_on_divergence: bool = True,
    stop_on_convergence: bool = False,
    observer: Observer | None = None,
) -> RunResult:
    """Two-point form ``x^{r+1} = 2Wx^r - W^2 x^{r-1} - alpha (grad g(x^r) - grad g(x^{r-1}))``.

    Either pass ``x_init_pair = (x^{r-1}, x^r)`` or ``bootstrap_from = x^{-2}``;
    in the latter case ``x^{-1} = W x^{-2} - alpha grad g(x^{-2})`` and the
    trace starts at index -2. ``max_iters`` counts recursion steps.
    """
    if alpha <= 0:
        raise AlgorithmError("alpha must be positive")
    if (x_init_pair is None) == (bootstrap_from is None):
        raise AlgorithmError("give exactly one of x_init_pair or bootstrap_from")
    wm = _w(w)
    w2 = wm @ wm
    loop = _Loop(p, "gt", max_iters, trace_sink, run_id, stop_on_divergence, stop_on_convergence, observer)
    with np.errstate(all="ignore"):
        if bootstrap_from is not None:
            xm2 = as_stacked(bootstrap_from, p.n_agents)
            r0 = -2 if first_index is None else first_index
            gm2 = p.grad_stack(xm2)
            if not loop.visit(r0, xm2, gm2, alpha):
                return loop.result(xm2, r0)
            x_prev, x_cur, r1 = xm2, wm @ xm2 - alpha * gm2, r0 + 1
        else:
            x_prev = as_stacked(x_init_pair[0], p.n_agents)
            x_cur = as_stacked(x_init_pair[1], p.n_agents)
            r1 = 0 if first_index is None else first_index
        x, r = _two_point(p, loop, lambda xc, xp: (2.0 * wm) @ xc - w2 @ xp, alpha, x_prev, x_cur, r1, max_iters, alpha)
    return loop.result(x, r)


def run_prox_pda(
    p: ProblemInstance,
    incidence,
    rho: float,
    beta_reg: float,
    x0,
    max_iters: int,
    trace_sink: TraceSink | None = None,
    *,
    first_index: int = 0,
    run_id: int = 0,
    stop_on_divergence: bool = True,
    stop_on_convergence: bool = False,
    observer: Observer | None = None,
) -> RunResult:
    """Prox-PDA with the dual variable eliminated.

    The first step uses a zero dual variable:
    ``x^1 = x^0 - (grad g(x^0) + rho L x^0) / (beta_reg + rho lambda_max(L))``,
    afterwards ``x^{r+1} = (I - rho L / c)(2x^r - x^{r-1}) - (grad g(x^r) - grad g(x^{r-1})) / c``.
    """
    if rho <= 0:
        raise AlgorithmError("rho must be positive")
    if beta_reg < 0:
        raise AlgorithmError("beta_reg must be non-negative")
    a = np.asarray(incidence, dtype=float)
    lap = a.T @ a
    c = beta_reg + rho * float(np.max(np.linalg.eigvalsh(lap)))
    m = np.eye(lap.shape[0]) - rho * lap / c
    loop = _Loop(p, "prox_pda", max_iters, trace_sink, run_id, stop_on_divergence, stop_on_convergence, observer)
    with np.errstate(all="ignore"):
        x = as_stacked(x0, p.n_agents)
        g0 = p.grad_stack(x)
        if not loop.visit(first_index, x, g0, 1.0 / c) or max_iters < 1:
            return loop.result(x, first_index)
        x1 = m @ x - g0 / c
        xf, r = _two_point(p, loop, lambda xc, xp: m @ (2.0 * xc - xp), 1.0 / c, x, x1, first_index + 1, max_iters - 1, 1.0 / c)
    return loop.result(xf, r)
