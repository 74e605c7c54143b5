"""Multi-stage gradient tracking with growing ball constraints."""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..graph import MixingMatrix, max_consensus
from ..metrics import GapComponents, potential_coefficient
from ..problems import ProblemInstance, lipschitz_estimates
from ..state import NetworkState, as_stacked
from ..trace import TraceRecord, TraceSink
from .common import AlgorithmError, Clock, RunResult, Termination

STEPSIZE_RULES = ("theory", "inverse_square", "inverse_sqrt_stage")
CYCLE_MAX = 4


class MagentaInternalError(RuntimeError):
    """Non-finite value inside a stage; cannot happen for a valid problem."""


def default_gamma(eta_used: float) -> float:
    e2 = eta_used**2
    if e2 <= 1.0 / 3.0:
        # (1/e2 - 1)/2 >= 1 here; checking first also avoids 1/0 for tiny eta
        return 1.0
    return (1.0 / e2 - 1.0) / 2.0


def project_ball(x, center, radius: float) -> np.ndarray:
    if radius <= 0:
        raise AlgorithmError("radius must be positive")
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    d = x - c
    n = float(np.linalg.norm(d))
    if n <= radius:
        return x.copy()
    return c + radius * d / n


def project_rows(u: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Row-wise ball projection."""
    d = u - center
    n = np.sqrt(np.einsum("ij,ij->i", d, d))
    out = u.copy()
    far = n > radius
    if far.any():
        out[far] = center + d[far] * (radius / n[far])[:, None]
    return out


def _check_eta(gamma, xi, eta_used):
    if (1.0 + gamma) * eta_used**2 >= 1.0 or (1.0 + xi) * eta_used**2 >= 1.0:
        raise AlgorithmError(f"need (1+gamma)eta^2 < 1 and (1+xi)eta^2 < 1 (gamma={gamma}, xi={xi}, eta={eta_used})")


def magenta_stepsize(l_hat: float, n: int, gamma: float, xi: float, eta_used: float) -> float:
    _check_eta(gamma, xi, eta_used)
    if l_hat < 1:
        raise AlgorithmError(f"l_hat must be >= 1, got {l_hat}")
    e2 = eta_used**2
    first = (1.0 / (8.0 * n)) / (l_hat / (2.0 * n) + 1.0 / gamma + 1.25)
    second = n * (1.0 - (1.0 + gamma) * e2) * (1.0 - (1.0 + xi) * e2) / (64.0 * (1.0 + 1.0 / xi) * l_hat**2)
    return min(first, second, 1.0)


def theorem1_constants(alpha, l_hat, l_global, n, gamma, xi, eta_used, beta=0.5) -> tuple[float, float, float]:
    e2 = eta_used**2
    c1 = beta * (1.0 / (8.0 * n) - l_global * alpha * beta / (2.0 * n) - alpha * beta * (1.0 + 1.0 / gamma + 0.25))
    c2 = (1.0 - (1.0 + gamma) * e2) / 2.0 - l_hat**2 * alpha * beta / n
    c3 = (1.0 - (1.0 + gamma) * e2) * (1.0 - (1.0 + xi) * e2) / (32.0 * (1.0 + 1.0 / xi)) - 2.0 * alpha * beta * l_hat**2 / n
    return c1, c2, c3


def _ceil_guarded(v: float) -> int:
    """Ceiling that ignores round-off just above an integer."""
    k = round(v)
    if abs(v - k) <= 1e-9 * max(1.0, abs(v)):
        return int(k)
    return int(math.ceil(v))


@dataclass
class MagentaParams:
    """Run parameters.

    ``gamma``/``xi`` default to ``min(1, (1/eta^2 - 1)/2)`` (1 when eta = 0).
    ``stepsize_rule`` is ``theory`` (the theoretical rule), ``inverse_square``
    (``min(1, c / l_hat^2)``) or ``inverse_sqrt_stage`` (``min(1, c / sqrt(t))``)
    with ``c = stepsize_c``. ``max_iters`` caps computed inner iterations;
    ``target_gap`` stops as soon as the per-iteration gap drops below it.
    """

    epsilon: float
    d: float
    eta_used: float
    gamma: float | None = None
    xi: float | None = None
    beta: float = 0.5
    max_stages: int = 100
    max_iters: int | None = None
    target_gap: float | None = None
    stop_on_success: bool = True
    track_potential: bool = False
    check_tracking: bool = False
    stepsize_rule: str = "theory"
    stepsize_c: float = 1.0
    lower_bound: float | None = None
    boundary_rtol: float = 1e-9
    fast_forward: bool = True

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = default_gamma(self.eta_used)
        if self.xi is None:
            self.xi = default_gamma(self.eta_used)
        if not self.epsilon > 0:
            raise AlgorithmError("epsilon must be positive")
        if not self.d > 0:
            raise AlgorithmError("d must be positive")
        if not 0.0 < self.beta < 1.0:
            raise AlgorithmError("beta must lie in (0, 1)")
        if self.gamma <= 0 or self.xi <= 0:
            raise AlgorithmError("gamma and xi must be positive")
        _check_eta(self.gamma, self.xi, self.eta_used)
        if self.stepsize_rule not in STEPSIZE_RULES:
            raise AlgorithmError(f"unknown stepsize rule {self.stepsize_rule!r}")
        if self.max_stages < 1:
            raise AlgorithmError("max_stages must be >= 1")
        if self.epsilon >= 2.0 * (1.0 - (1.0 + self.gamma) * self.eta_used**2):
            warnings.warn("epsilon violates the stage-bound hypothesis epsilon < 2(1 - (1+gamma)eta^2)", stacklevel=2)


@dataclass(frozen=True)
class StageSchedule:
    t: int
    radius: float
    center: np.ndarray
    alpha: float
    inner_iters: int
    l_hat: float
    l_global: float = 1.0


@dataclass
class StageReport:
    schedule: StageSchedule
    computed_iters: int = 0
    completed_iters: int = 0
    touch_count: int = 0
    sum_unconstrained: float = 0.0
    sum_constrained: float = 0.0
    sum_weighted: float = 0.0
    constants: tuple = (0.0, 0.0, 0.0)
    p_start: float | None = None
    p_end: float | None = None
    max_potential_increase: float = -math.inf
    potential_checked: int = 0
    tracking_max_err: float = 0.0
    fast_forwarded: int = 0

    @property
    def t(self) -> int:
        return self.schedule.t

    @property
    def finished(self) -> bool:
        return self.completed_iters == self.schedule.inner_iters

    @property
    def boundary_free(self) -> bool:
        return self.touch_count == 0

    @property
    def avg_gap_unconstrained(self) -> float:
        return self.sum_unconstrained / max(1, self.completed_iters)

    @property
    def avg_gap_constrained(self) -> float:
        return self.sum_constrained / max(1, self.completed_iters)

    @property
    def weighted_avg_gap(self) -> float:
        return self.sum_weighted / max(1, self.completed_iters)


def magenta_stage_bound(params: MagentaParams, p0_minus_lower: float) -> int:
    """``T* = ceil(128 (P(w^0;1) - f_low) / (epsilon d^2))`` for ``v^t = t d``."""
    slack = 1.0 - (1.0 + params.gamma) * params.eta_used**2
    if not params.epsilon < 2.0 * slack:
        raise AlgorithmError("stage bound needs epsilon < 2(1 - (1+gamma)eta^2)")
    if not p0_minus_lower > 0:
        raise AlgorithmError("P(w^0;1) - f_low must be positive")
    return _ceil_guarded(128.0 * p0_minus_lower / (params.epsilon * params.d**2))


def stage_alpha(params: MagentaParams, t: int, l_hat: float, n: int) -> float:
    if params.stepsize_rule == "theory":
        return magenta_stepsize(l_hat, n, params.gamma, params.xi, params.eta_used)
    if params.stepsize_rule == "inverse_square":
        return min(1.0, params.stepsize_c / l_hat**2)
    return min(1.0, params.stepsize_c / math.sqrt(t))


def first_stage(x0: np.ndarray, center: np.ndarray, d: float) -> int:
    """Smallest ``t >= 1`` whose ball ``B(center, t d)`` holds every row of ``x0``."""
    far = float(np.max(np.linalg.norm(x0 - center, axis=1)))
    t = max(1, math.ceil(far / d))
    while far > t * d:
        t += 1
    return t


Observer = Callable[[int, int, np.ndarray, np.ndarray, "np.ndarray | None"], None]


def run_magenta(
    p: ProblemInstance,
    w: MixingMatrix,
    x0,
    params: MagentaParams,
    trace_sink: TraceSink | None = None,
    *,
    run_id: int = 0,
    observer: Observer | None = None,
) -> RunResult:
    """Run MAGENTA from ``x0`` with ball center ``z = mean(x0)``.

    Stages start at the first ``t`` whose ball contains ``x0``. Once an inner
    iteration reproduces one of the last ``CYCLE_MAX`` states ``(x, y)`` bit
    for bit, the rest of the stage is periodic and is accounted for without
    being recomputed. ``RunResult.gaps`` holds the per-iteration tracking gap
    ``||y||^2 + ||x - 1 xbar||^2 + ||y - 1 ybar||^2`` of computed iterations.
    """
    n = p.n_agents
    wm = np.asarray(w.entries, dtype=float)
    x = as_stacked(x0, n)
    if x.shape[1] != p.dim:
        raise AlgorithmError(f"x0 has {x.shape[1]} columns, problem dimension is {p.dim}")
    z = x.mean(axis=0)
    g = p.grad_stack(x)
    y = g.copy()
    beta = params.beta
    inv_n = 1.0 / n
    clock = Clock()
    reports: list[StageReport] = []
    gaps: list[float] = []
    computed = 0
    termination = Termination.BUDGET
    t = first_stage(x, z, params.d)
    stop = False

    for _ in range(params.max_stages):
        radius = t * params.d
        est = lipschitz_estimates(p, z, radius)
        l_hat = float(max_consensus(np.array(est.per_agent), w.graph)[0])
        alpha = stage_alpha(params, t, l_hat, n)
        big_r = max(1, math.ceil(1.0 / (params.epsilon * alpha)))
        sched = StageSchedule(t, radius, z, alpha, big_r, l_hat, est.l_global)
        c1, c2, c3 = theorem1_constants(alpha, l_hat, est.l_global, n, params.gamma, params.xi, params.eta_used, beta)
        rep = StageReport(sched, constants=(c1, c2, c3))
        reports.append(rep)
        slack = 1.0 - (1.0 + params.gamma) * params.eta_used**2
        y_weight = 2.0 * c3 / (n * slack)
        tol = params.boundary_rtol * radius
        if params.stepsize_rule == "theory" and params.epsilon / 8.0 > c2:
            warnings.warn(f"stage {t}: epsilon/8 exceeds c2", stacklevel=2)

        coef = None
        pot = None
        if params.track_potential:
            coef = potential_coefficient(l_hat, params.gamma, params.xi, params.eta_used)
            pot = _potential(p, x, y, coef)
            rep.p_start = pot
        rep.touch_count += int(np.count_nonzero(radius - np.linalg.norm(x - z, axis=1) <= tol))
        if observer is not None:
            observer(t, 0, x, y, None)

        r = 0
        states = deque([(x, y, g)], maxlen=CYCLE_MAX)
        contribs: deque = deque(maxlen=CYCLE_MAX)
        while r < big_r:
            if params.max_iters is not None and computed >= params.max_iters:
                stop = True
                termination = Termination.BUDGET
                break
            xt = project_rows(x - alpha * y, z, radius)
            v = xt - x
            x_new = wm @ (x + beta * v)
            g_new = p.grad_stack(x_new)
            y_new = wm @ y + g_new - g
            computed += 1
            rep.computed_iters += 1

            dx = x - x.sum(axis=0) * inv_n
            ys = y.sum(axis=0) * inv_n
            dy = y - ys
            xc = float(np.vdot(dx, dx))
            yc = float(np.vdot(dy, dy))
            yn = float(np.vdot(y, y))
            va = float(np.vdot(v, v)) / alpha**2
            gap = yn + xc + yc
            if not (math.isfinite(gap) and math.isfinite(va) and np.isfinite(x_new).all() and np.isfinite(y_new).all()):
                raise MagentaInternalError(f"non-finite value at stage {t}, iteration {r}")
            touches = _touches(xt, z, radius, tol) + _touches(x_new, z, radius, tol)

            if params.check_tracking:
                err = float(np.linalg.norm((y_new.sum(axis=0) - g_new.sum(axis=0)) * inv_n))
                rep.tracking_max_err = max(rep.tracking_max_err, err)

            if trace_sink is not None and trace_sink.wants(r):
                trace_sink.append(
                    TraceRecord(run_id, "magenta", t, r, alpha, radius, yn, _mean_grad_sq(g), xc, yc, va, pot, touches, clock.us())
                )

            step = (gap, va + xc + yc, c1 * va + c2 * xc + y_weight * yc, touches)
            _accumulate(rep, step, 1)
            gaps.append(gap)

            if params.target_gap is not None and gap < params.target_gap:
                stop = True
                termination = Termination.CONVERGED
                break

            if params.track_potential:
                new_pot = _potential(p, x_new, y_new, coef)
                if touches == 0:
                    rep.max_potential_increase = max(rep.max_potential_increase, new_pot - pot)
                    rep.potential_checked += 1
                pot = new_pot
            contribs.append(step)
            period = _period(states, x_new, y_new) if params.fast_forward else 0
            states.append((x_new, y_new, g_new))
            x, y, g = x_new, y_new, g_new
            r += 1
            if observer is not None:
                observer(t, r, x, y, xt)
            if period and r < big_r:
                # the orbit is periodic: replay the last `period` contributions
                skip = big_r - r
                cycle = list(contribs)[-period:]
                full, rest = divmod(skip, period)
                for k, c in enumerate(cycle):
                    _accumulate(rep, c, full + (1 if k < rest else 0))
                rep.fast_forwarded += skip
                x, y, g = states[-1 - period + rest] if rest else states[-1]
                if params.track_potential:
                    pot = _potential(p, x, y, coef)
                r = big_r
        rep.p_end = pot
        if stop:
            break
        if rep.boundary_free and rep.avg_gap_unconstrained <= params.epsilon and params.stop_on_success:
            termination = Termination.SUCCESS
            break
        t += 1

    state = NetworkState(x, y, sum(rp.completed_iters for rp in reports), reports[-1].t)
    return RunResult(state, termination, gaps, reports)


def _accumulate(rep: StageReport, step, times: int) -> None:
    if times <= 0:
        return
    rep.sum_unconstrained += times * step[0]
    rep.sum_constrained += times * step[1]
    rep.sum_weighted += times * step[2]
    rep.touch_count += times * step[3]
    rep.completed_iters += times


def _period(states, x_new, y_new) -> int:
    """Smallest ``P`` with ``(x_new, y_new)`` equal to the state ``P`` steps back, else 0."""
    for back in range(1, len(states) + 1):
        xo, yo, _ = states[-back]
        if np.array_equal(xo, x_new) and np.array_equal(yo, y_new):
            return back
    return 0


def _touches(pts, z, radius, tol) -> int:
    d = pts - z
    return int(np.count_nonzero(radius - np.sqrt(np.einsum("ij,ij->i", d, d)) <= tol))


def _mean_grad_sq(g: np.ndarray) -> float:
    m = g.mean(axis=0)
    return float(m @ m)


def _potential(p: ProblemInstance, x, y, coef: float) -> float:
    xb = x.sum(axis=0) / x.shape[0]
    dx = x - xb
    dy = y - y.sum(axis=0) / y.shape[0]
    return p.f_mean(xb) + float(np.vdot(dx, dx)) + coef * float(np.vdot(dy, dy))
