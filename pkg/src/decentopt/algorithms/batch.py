"""Many independent baseline runs advanced together.

Only for problems whose ``stacked_grad`` acts elementwise, so it accepts a
``B x N x K`` array. Each run follows exactly the recursion of its
single-run counterpart in :mod:`baselines`; a run is frozen as soon as it is
classified (gap below 1 with ``stop_on_convergence``, or divergent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..metrics import CONVERGED_BELOW, DIVERGED_ABOVE
from ..problems import ProblemInstance
from .common import AlgorithmError, Termination


@dataclass
class BatchOutcome:
    termination: list
    iterations: np.ndarray
    min_gap: np.ndarray
    last_gap: np.ndarray


def _gaps(x, grads):
    n = x.shape[1]
    mg = grads.sum(axis=1) / n
    dx = x - x.sum(axis=1, keepdims=True) / n
    return np.einsum("bk,bk->b", mg, mg) + np.einsum("bnk,bnk->b", dx, dx)


class _Tracker:
    def __init__(self, b, stop_on_convergence):
        self.term = [Termination.MAX_ITERS] * b
        self.iters = np.zeros(b, dtype=np.int64)
        self.min_gap = np.full(b, np.inf)
        self.last_gap = np.full(b, np.nan)
        self.stop_conv = stop_on_convergence

    def visit(self, idx, r, gaps, x):
        """Record gaps for runs ``idx`` at iteration ``r``; return the mask of runs that keep going."""
        self.min_gap[idx] = np.fmin(self.min_gap[idx], gaps)
        self.last_gap[idx] = gaps
        self.iters[idx] = r
        finite = np.isfinite(x).all(axis=(1, 2))
        div = ~np.isfinite(gaps) | (gaps > DIVERGED_ABOVE) | ~finite
        conv = (gaps < CONVERGED_BELOW) & ~div if self.stop_conv else np.zeros_like(div)
        for j in idx[div]:
            self.term[j] = Termination.DIVERGED
        for j in idx[conv]:
            self.term[j] = Termination.CONVERGED
        return ~(div | conv)

    def outcome(self):
        return BatchOutcome(self.term, self.iters, self.min_gap, self.last_gap)


def _check(p: ProblemInstance):
    if p.stacked_grad is None or not getattr(p, "elementwise", False):
        raise AlgorithmError("batched runs need an elementwise stacked gradient")


def batch_dgd(p, w, x0s, alphas, max_iters, stop_on_convergence=True) -> BatchOutcome:
    """Diminishing DGD: run ``b`` uses ``alphas[b] / (1 + r)``."""
    _check(p)
    wm = np.asarray(getattr(w, "entries", w), dtype=float)
    x = np.array(x0s, dtype=float)
    a = np.asarray(alphas, dtype=float)
    tr = _Tracker(x.shape[0], stop_on_convergence)
    idx = np.arange(x.shape[0])
    with np.errstate(all="ignore"):
        g = p.stacked_grad(x)
        for r in range(max_iters + 1):
            keep = tr.visit(idx, r, _gaps(x, g), x)
            idx, x, g, a = idx[keep], x[keep], g[keep], a[keep]
            if idx.size == 0 or r == max_iters:
                break
            x = np.matmul(wm, x) - (a / (1.0 + r))[:, None, None] * g
            g = p.stacked_grad(x)
    return tr.outcome()


def _two_point_batch(p, lin, scale, mats, x_prev, x_cur, tr, idx, r0, max_iters):
    """``x+ = lin(x, x_prev, mats) - scale (g(x) - g(x_prev))``; ``mats`` and
    ``scale`` are per-run and shrink with the active set."""
    g_prev = p.stacked_grad(x_prev)
    g = p.stacked_grad(x_cur)
    steps = 0
    r = r0
    while True:
        keep = tr.visit(idx, r, _gaps(x_cur, g), x_cur)
        idx, x_prev, x_cur, g_prev, g = idx[keep], x_prev[keep], x_cur[keep], g_prev[keep], g[keep]
        scale, mats = scale[keep], mats[keep]
        if idx.size == 0 or steps >= max_iters:
            break
        x_next = lin(x_cur, x_prev, mats) - scale[:, None, None] * (g - g_prev)
        x_prev, g_prev = x_cur, g
        x_cur = x_next
        g = p.stacked_grad(x_cur)
        r += 1
        steps += 1


def batch_gradient_tracking(p, w, x0s, alphas, max_iters, stop_on_convergence=True) -> BatchOutcome:
    """GT bootstrapped from ``x0`` (``x^1 = W x^0 - alpha grad g(x^0)``), indices from 0."""
    _check(p)
    wm = np.asarray(getattr(w, "entries", w), dtype=float)
    w2 = wm @ wm
    x = np.array(x0s, dtype=float)
    a = np.asarray(alphas, dtype=float)
    tr = _Tracker(x.shape[0], stop_on_convergence)
    idx = np.arange(x.shape[0])
    with np.errstate(all="ignore"):
        g = p.stacked_grad(x)
        keep = tr.visit(idx, 0, _gaps(x, g), x)
        idx, x, g, a = idx[keep], x[keep], g[keep], a[keep]
        if idx.size and max_iters > 0:
            x1 = np.matmul(wm, x) - a[:, None, None] * g
            _two_point_batch(
                p,
                lambda xc, xp, _: np.matmul(2.0 * wm, xc) - np.matmul(w2, xp),
                a,
                np.zeros(idx.size),
                x,
                x1,
                tr,
                idx,
                1,
                max_iters - 1,
            )
    return tr.outcome()


def batch_prox_pda(p, incidence, rhos, beta_reg, x0s, max_iters, stop_on_convergence=True) -> BatchOutcome:
    _check(p)
    am = np.asarray(incidence, dtype=float)
    lap = am.T @ am
    n = lap.shape[0]
    lam = float(np.max(np.linalg.eigvalsh(lap)))
    rho = np.asarray(rhos, dtype=float)[:, None, None]
    c = beta_reg + rho * lam
    m = np.eye(n)[None] - rho * lap[None] / c
    x = np.array(x0s, dtype=float)
    tr = _Tracker(x.shape[0], stop_on_convergence)
    idx = np.arange(x.shape[0])
    with np.errstate(all="ignore"):
        g = p.stacked_grad(x)
        keep = tr.visit(idx, 0, _gaps(x, g), x)
        idx, x, g, c, m = idx[keep], x[keep], g[keep], c[keep], m[keep]
        if idx.size and max_iters > 0:
            x1 = np.matmul(m, x) - g / c
            scale = 1.0 / c[:, 0, 0]
            _two_point_batch(p, lambda xc, xp, mm: np.matmul(mm, 2.0 * xc - xp), scale, m, x, x1, tr, idx, 1, max_iters - 1)
    return tr.outcome()
