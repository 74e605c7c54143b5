"""Convergence percentages of the baselines under the ``c / ||x0||`` stepsize heuristic.

DGD uses ``alpha_r = c * 5e-3 / ((r + 1) ||x0||)``, GT ``alpha = c * 2e-3 / ||x0||``
and Prox-PDA ``rho = 1e3 ||x0|| / c``. A run is Converged once its gap drops
below 1 and Diverged once it exceeds 1e10; everything else at the iteration
cap is Undecided.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..algorithms import batch_dgd, batch_gradient_tracking, batch_prox_pda
from ..algorithms.common import Termination
from ..graph import build_mixing_matrix, build_path_graph, incidence_matrix
from ..problems import make_quartic_pair
from .seeding import rng_for

SCALES = {"dgd": 5e-3, "gt": 2e-3, "prox_pda": 1e3}
DEFAULT_CS = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    c: float
    runs: int
    converged: int
    diverged: int
    undecided: int

    @property
    def converged_pct(self) -> float:
        return 100.0 * self.converged / self.runs

    @property
    def not_diverged_pct(self) -> float:
        return 100.0 * (self.runs - self.diverged) / self.runs

    def as_dict(self) -> dict:
        return {**asdict(self), "converged_pct": self.converged_pct, "not_diverged_pct": self.not_diverged_pct}


def quartic_inits(runs: int, seed: int) -> np.ndarray:
    """``runs x 2 x 1`` standard-normal points, run ``k`` from the harness init stream."""
    return np.stack([rng_for(seed, "init", k).standard_normal((2, 1)) for k in range(runs)])


def benchmark_sweep(algorithms=("dgd", "gt", "prox_pda"), cs=DEFAULT_CS, runs: int = 100, seed: int = 0, max_iters: int = 20000):
    p = make_quartic_pair()
    g = build_path_graph(2)
    w = build_mixing_matrix(g)
    a = incidence_matrix(g)
    x0s = quartic_inits(runs, seed)
    nrm = np.linalg.norm(x0s.reshape(runs, -1), axis=1)
    rows = []
    for name in algorithms:
        for c in cs:
            if name == "dgd":
                out = batch_dgd(p, w, x0s, c * SCALES[name] / nrm, max_iters)
            elif name == "gt":
                out = batch_gradient_tracking(p, w, x0s, c * SCALES[name] / nrm, max_iters)
            elif name == "prox_pda":
                out = batch_prox_pda(p, a, SCALES[name] * nrm / c, 0.0, x0s, max_iters)
            else:
                raise ValueError(f"unknown algorithm {name!r}")
            conv = sum(t is Termination.CONVERGED for t in out.termination)
            div = sum(t is Termination.DIVERGED for t in out.termination)
            rows.append(SweepRow(name, float(c), runs, conv, div, runs - conv - div))
    return rows


def strictly_increasing(values) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))
