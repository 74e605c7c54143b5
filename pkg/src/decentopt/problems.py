"""Local objectives f_i with analytic gradients and Lipschitz bounds on balls.

Every ``lipschitz_on_ball`` returns an upper bound on the Lipschitz constant
of ``grad`` over the closed ball ``B(center, radius)``, clamped below by 1.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .state import as_stacked

NETWORK_SAMPLE_PAIRS = 2000
NETWORK_SAFETY = 2.0
NETWORK_LEVEL_LO = -4


class ProblemError(ValueError):
    """Inconsistent problem construction."""


def _clamp(value: float) -> float:
    return max(1.0, float(value))


class LocalObjective:
    dim: int

    def eval(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_on_ball(self, center, radius: float) -> float:
        raise NotImplementedError


# ---------------------------------------------------------------- polynomials


class PolynomialLocal(LocalObjective):
    """``sum_w sigma_w prod_k x_k^{w_k}`` stored as an exponent matrix and coefficients."""

    def __init__(self, dim: int, exponents, coefs):
        self.dim = int(dim)
        exps = np.asarray(exponents, dtype=np.int64).reshape(-1, self.dim)
        self.exps = exps
        self.coefs = np.asarray(coefs, dtype=float).reshape(-1)
        if self.coefs.shape[0] != exps.shape[0]:
            raise ProblemError("one coefficient per monomial required")
        if np.any(exps < 0):
            raise ProblemError("negative exponent")

    @property
    def order(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self.coefs) else 0

    def eval(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        return float(self.coefs @ np.prod(x ** self.exps, axis=1))

    def grad(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        out = np.zeros(self.dim)
        for k in range(self.dim):
            pk = self.exps[:, k]
            live = pk > 0
            if not live.any():
                continue
            e = self.exps[live].copy()
            e[:, k] -= 1
            out[k] = (self.coefs[live] * pk[live]) @ np.prod(x ** e, axis=1)
        return out

    def hessian_abs_bound(self, center, radius: float) -> np.ndarray:
        """Entrywise bound on |Hessian| over the ball, by the triangle inequality
        at coordinate magnitudes ``|c_k| + radius``."""
        m = np.abs(np.asarray(center, dtype=float).reshape(self.dim)) + float(radius)
        h = np.zeros((self.dim, self.dim))
        a = np.abs(self.coefs)
        for k in range(self.dim):
            for l in range(k, self.dim):
                e = self.exps.copy()
                if k == l:
                    mult = e[:, k] * (e[:, k] - 1)
                else:
                    mult = e[:, k] * e[:, l]
                live = mult > 0
                if not live.any():
                    continue
                e = e[live]
                e[:, k] -= 1
                e[:, l] -= 1
                h[k, l] = h[l, k] = (a[live] * mult[live]) @ np.prod(m ** e, axis=1)
        return h

    def curvature_bound(self, center, radius: float) -> float:
        """Max row sum of the entrywise Hessian bound (unclamped)."""
        if self.dim == 0 or len(self.coefs) == 0:
            return 0.0
        return float(self.hessian_abs_bound(center, radius).sum(axis=1).max())

    def lipschitz_on_ball(self, center, radius):
        return _clamp(self.curvature_bound(center, radius))


class CubicLocal(LocalObjective):
    """``sign * x^3 / 3`` in one dimension."""

    dim = 1

    def __init__(self, sign: float):
        self.sign = float(sign)

    def eval(self, x):
        u = float(np.asarray(x).reshape(-1)[0])
        return self.sign * u**3 / 3.0

    def grad(self, x):
        u = float(np.asarray(x).reshape(-1)[0])
        return np.array([self.sign * u * u])

    def lipschitz_on_ball(self, center, radius):
        c = float(np.asarray(center).reshape(-1)[0])
        return _clamp(2.0 * (abs(c) + radius))


class QuarticLocal(LocalObjective):
    """``scale * (x - shift)^4`` in one dimension."""

    dim = 1

    def __init__(self, scale: float = 0.5, shift: float = 20.0):
        self.scale = float(scale)
        self.shift = float(shift)

    def eval(self, x):
        u = float(np.asarray(x).reshape(-1)[0]) - self.shift
        return self.scale * u**4

    def grad(self, x):
        u = float(np.asarray(x).reshape(-1)[0]) - self.shift
        return np.array([4.0 * self.scale * u**3])

    def lipschitz_on_ball(self, center, radius):
        c = float(np.asarray(center).reshape(-1)[0])
        return _clamp(12.0 * self.scale * (abs(c - self.shift) + radius) ** 2)


# ------------------------------------------------------------------- logistic


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


class LogisticLocal(LocalObjective):
    """Logistic loss plus the bounded non-convex penalty ``lam * sum rho t^2 / (1 + rho t^2)``."""

    def __init__(self, features, labels, lam: float, rho: float):
        a = np.asarray(features, dtype=float)
        b = np.asarray(labels, dtype=float).reshape(-1)
        if a.ndim != 2 or a.shape[0] == 0:
            raise ProblemError("logistic objective needs at least one data point")
        if a.shape[0] != b.shape[0]:
            raise ProblemError("features and labels differ in length")
        if lam < 0 or rho < 0:
            raise ProblemError("lambda and rho must be non-negative")
        self.a, self.b = a, b
        self.lam, self.rho = float(lam), float(rho)
        self.dim = a.shape[1]
        self._bound = float(np.sum(a * a)) / (4.0 * a.shape[0]) + 2.0 * self.lam * self.rho

    def eval(self, x):
        th = np.asarray(x, dtype=float).reshape(self.dim)
        margins = self.b * (self.a @ th)
        rt2 = self.rho * th * th
        return float(np.mean(np.logaddexp(0.0, -margins)) + self.lam * np.sum(rt2 / (1.0 + rt2)))

    def grad(self, x):
        th = np.asarray(x, dtype=float).reshape(self.dim)
        margins = self.b * (self.a @ th)
        w = -self.b * _sigmoid(-margins)
        reg = 2.0 * self.rho * th / (1.0 + self.rho * th * th) ** 2
        return self.a.T @ w / self.a.shape[0] + self.lam * reg

    def lipschitz_on_ball(self, center, radius):
        return _clamp(self._bound)


# -------------------------------------------------------------------- network


class NetworkLocal(LocalObjective):
    """Squared loss of a one-hidden-layer network ``W2 phi(W1 z)``.

    Parameters are stacked as ``(W1.ravel(), W2.ravel())`` with ``W1`` of shape
    ``hidden x in_dim`` and ``W2`` of shape ``1 x hidden``. The Lipschitz bound
    is sampled: pairs are drawn in balls of dyadic radius ``2^k`` and the
    largest gradient-difference ratio over all levels up to the requested
    radius is multiplied by ``NETWORK_SAFETY``. Taking the maximum over a
    growing set of levels keeps the bound monotone in the radius.
    """

    def __init__(self, inputs, targets, hidden: int, activation: str = "softplus", seed: int = 0):
        if hidden < 1:
            raise ProblemError("hidden layer needs at least one unit")
        if activation not in ("softplus", "relu"):
            raise ProblemError(f"unknown activation {activation!r}")
        z = np.asarray(inputs, dtype=float)
        v = np.asarray(targets, dtype=float).reshape(-1)
        if z.ndim != 2 or z.shape[0] == 0 or z.shape[0] != v.shape[0]:
            raise ProblemError("network objective needs matching, non-empty inputs and targets")
        self.z, self.v = z, v
        self.hidden = int(hidden)
        self.in_dim = z.shape[1]
        self.activation = activation
        self.seed = int(seed)
        self.dim = self.hidden * self.in_dim + self.hidden
        self._levels: dict = {}

    def _split(self, x):
        x = np.asarray(x, dtype=float).reshape(self.dim)
        h = self.hidden
        return x[: h * self.in_dim].reshape(h, self.in_dim), x[h * self.in_dim :]

    def _phi(self, s):
        if self.activation == "softplus":
            return np.logaddexp(0.0, s), _sigmoid(s)
        return np.maximum(s, 0.0), (s > 0).astype(float)

    def eval(self, x):
        w1, w2 = self._split(x)
        act, _ = self._phi(self.z @ w1.T)
        res = act @ w2 - self.v
        return float(np.mean(res * res))

    def grad(self, x):
        w1, w2 = self._split(x)
        act, dact = self._phi(self.z @ w1.T)
        res = act @ w2 - self.v
        n = self.z.shape[0]
        g2 = 2.0 * act.T @ res / n
        g1 = 2.0 * ((res[:, None] * dact) * w2[None, :]).T @ self.z / n
        return np.concatenate([g1.ravel(), g2])

    def grad_many(self, xs: np.ndarray) -> np.ndarray:
        """Gradients at the rows of ``xs`` (``B x dim``)."""
        xs = np.asarray(xs, dtype=float).reshape(-1, self.dim)
        h, k = self.hidden, self.in_dim
        w1 = xs[:, : h * k].reshape(-1, h, k)
        w2 = xs[:, h * k :]
        act, dact = self._phi(np.matmul(w1, self.z.T))
        res = np.matmul(w2[:, None, :], act)[:, 0, :] - self.v
        n = self.z.shape[0]
        g2 = 2.0 * np.matmul(act, res[:, :, None])[:, :, 0] / n
        g1 = 2.0 * np.matmul(res[:, None, :] * dact * w2[:, :, None], self.z) / n
        return np.concatenate([g1.reshape(xs.shape[0], -1), g2], axis=1)

    def _level_ratio(self, center: np.ndarray, k: int) -> float:
        key = (center.tobytes(), k)
        if key in self._levels:
            return self._levels[key]
        tag = zlib.crc32(center.tobytes())
        rng = np.random.default_rng(np.random.SeedSequence([self.seed % 2**64, tag, k - NETWORK_LEVEL_LO]))
        r = 2.0**k
        half = NETWORK_SAMPLE_PAIRS // 2
        # half the pairs are independent points, half are near-pairs at scale 1e-3 r
        p = center + _uniform_in_ball(rng, self.dim, r, 2 * half)
        q = np.concatenate([center + _uniform_in_ball(rng, self.dim, r, half), p[half:] + _uniform_in_ball(rng, self.dim, 1e-3 * r, half)])
        dist = np.linalg.norm(p - q, axis=1)
        diff = np.linalg.norm(self.grad_many(p) - self.grad_many(q), axis=1)
        ok = dist > 0
        best = float(np.max(diff[ok] / dist[ok])) if ok.any() else 0.0
        self._levels[key] = best
        return best

    def lipschitz_on_ball(self, center, radius):
        c = np.asarray(center, dtype=float).reshape(self.dim)
        top = max(NETWORK_LEVEL_LO, math.ceil(math.log2(radius))) if radius > 0 else NETWORK_LEVEL_LO
        ratio = max(self._level_ratio(c, k) for k in range(NETWORK_LEVEL_LO, top + 1))
        return _clamp(NETWORK_SAFETY * ratio)


def _uniform_in_ball(rng, dim: int, radius: float, count: int) -> np.ndarray:
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.random(count) ** (1.0 / dim))[:, None]


# ------------------------------------------------------------------ instances


@dataclass(frozen=True)
class LipschitzEstimate:
    per_agent: tuple
    l_hat: float
    l_global: float


@dataclass
class ProblemInstance:
    """``N`` local objectives over a shared dimension.

    ``average_curvature`` optionally bounds the Lipschitz constant of the
    average gradient on a ball (unclamped); ``stacked_grad`` is an optional
    vectorized replacement for the per-agent gradient loop; ``elementwise``
    marks a ``stacked_grad`` that also accepts a leading batch axis;
    ``mean_eval`` is an optional vectorized ``f(u)``.
    """

    locals: Sequence[LocalObjective]
    name: str
    lower_bound: float | None = None
    average_curvature: Callable | None = field(default=None, repr=False)
    stacked_grad: Callable | None = field(default=None, repr=False)
    elementwise: bool = False
    mean_eval: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.locals) < 1:
            raise ProblemError("a problem needs at least one agent")
        dims = {f.dim for f in self.locals}
        if len(dims) != 1:
            raise ProblemError(f"local objectives disagree on dimension: {sorted(dims)}")

    @property
    def n_agents(self) -> int:
        return len(self.locals)

    @property
    def dim(self) -> int:
        return self.locals[0].dim

    def grad_stack(self, x: np.ndarray) -> np.ndarray:
        """``grad g(x)``: row ``i`` is ``grad f_i(x_i)``."""
        if self.stacked_grad is not None:
            return self.stacked_grad(x)
        return np.stack([f.grad(x[i]) for i, f in enumerate(self.locals)])

    def eval_stack(self, x: np.ndarray) -> np.ndarray:
        return np.array([f.eval(x[i]) for i, f in enumerate(self.locals)])

    def f_mean(self, u) -> float:
        """Average objective ``f(u)`` at a single point."""
        u = np.asarray(u, dtype=float).reshape(self.dim)
        if self.mean_eval is not None:
            return self.mean_eval(u)
        return float(np.mean([f.eval(u) for f in self.locals]))

    def grad_mean(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.dim)
        return np.mean([f.grad(u) for f in self.locals], axis=0)


def lipschitz_estimates(p: ProblemInstance, center, radius: float) -> LipschitzEstimate:
    if radius <= 0:
        raise ProblemError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=float).reshape(p.dim)
    per = tuple(f.lipschitz_on_ball(c, radius) for f in p.locals)
    l_hat = max(per)
    if p.average_curvature is not None:
        l_global = min(l_hat, _clamp(p.average_curvature(c, radius)))
    else:
        l_global = l_hat
    return LipschitzEstimate(per, l_hat, l_global)


# ------------------------------------------------------------------ factories


def _scalar_poly_grad(coefs_by_agent, power, shift=0.0):
    """Vectorized gradient for agents of the form ``a_i (x - shift)^power`` with K = 1."""
    a = np.asarray(coefs_by_agent, dtype=float)[:, None] * power

    def grad(x):
        return a * (x - shift) ** (power - 1)

    return grad


def make_cubic_pair() -> ProblemInstance:
    locs = [CubicLocal(1.0), CubicLocal(-1.0)]
    return ProblemInstance(
        locs,
        "cubic_pair",
        lower_bound=None,
        average_curvature=lambda c, r: 0.0,
        stacked_grad=_scalar_poly_grad([1 / 3, -1 / 3], 3),
        elementwise=True,
    )


def make_quartic_pair(shift: float = 20.0) -> ProblemInstance:
    locs = [QuarticLocal(0.5, shift), QuarticLocal(0.5, shift)]
    return ProblemInstance(
        locs,
        "quartic_pair",
        lower_bound=0.0,
        average_curvature=lambda c, r: 6.0 * (abs(float(c[0]) - shift) + r) ** 2,
        stacked_grad=_scalar_poly_grad([0.5, 0.5], 4, shift),
        elementwise=True,
    )


def make_polynomial_family(coeffs, n_agents: int, dim: int, order: int, name: str = "polynomial") -> ProblemInstance:
    """Per-agent polynomials from ``(agent, multi_index, sigma)`` triples.

    Agents with no listed term get the zero polynomial.
    """
    if order < 2:
        raise ProblemError(f"order must be at least 2, got {order}")
    if n_agents < 1 or dim < 1:
        raise ProblemError("n_agents and dim must be positive")
    exps = [[] for _ in range(n_agents)]
    vals = [[] for _ in range(n_agents)]
    for agent, w, sigma in coeffs:
        w = tuple(int(e) for e in w)
        if not 0 <= agent < n_agents:
            raise ProblemError(f"agent index {agent} out of range")
        if len(w) != dim:
            raise ProblemError(f"multi-index {w} does not have {dim} entries")
        if any(e < 0 for e in w) or sum(w) > order:
            raise ProblemError(f"multi-index {w} exceeds order {order} or is negative")
        exps[agent].append(w)
        vals[agent].append(float(sigma))
    locs = [PolynomialLocal(dim, np.array(e, dtype=np.int64).reshape(-1, dim), v) for e, v in zip(exps, vals)]
    # merge equal monomials so terms that cancel across agents drop out of the average
    merged: dict = {}
    for e, v in zip(exps, vals):
        for w, sigma in zip(e, v):
            merged[w] = merged.get(w, 0.0) + sigma / n_agents
    kept = [(w, s) for w, s in merged.items() if s != 0.0] or [((0,) * dim, 0.0)]
    avg = PolynomialLocal(
        dim,
        np.array([w for w, _ in kept], dtype=np.int64).reshape(-1, dim),
        np.array([s for _, s in kept]),
    )
    return ProblemInstance(locs, name, average_curvature=avg.curvature_bound)


def make_cancelling_powers(q: int = 3) -> ProblemInstance:
    """``f1 = u^2, f2 = u^q, f3 = -u^q``: the average ``u^2/3`` is globally smooth
    while the local constants of ``f2, f3`` grow without bound."""
    return make_polynomial_family([(0, (2,), 1.0), (1, (q,), 1.0), (2, (q,), -1.0)], 3, 1, max(2, q), "cancelling_powers")


def make_matrix_factorization(targets, rank: int) -> ProblemInstance:
    """``f_i(U, w_i) = ||U w_i - v_i||^2`` as an order-4 polynomial.

    The stacked variable is ``(U.ravel(), w_1, ..., w_N)`` with ``U`` of shape
    ``m x rank``; agent ``i`` only touches ``U`` and its own ``w_i``.
    """
    v = np.asarray(targets, dtype=float)
    if v.ndim != 2:
        raise ProblemError("targets must be an N x m array")
    n, m = v.shape
    dim = m * rank + n * rank

    def u_idx(a, j):
        return a * rank + j

    def w_idx(i, j):
        return m * rank + i * rank + j

    terms = []
    for i in range(n):
        for a in range(m):
            for j in range(rank):
                for l in range(rank):
                    e = [0] * dim
                    e[u_idx(a, j)] += 1
                    e[w_idx(i, j)] += 1
                    e[u_idx(a, l)] += 1
                    e[w_idx(i, l)] += 1
                    terms.append((i, tuple(e), 1.0))
                e = [0] * dim
                e[u_idx(a, j)] += 1
                e[w_idx(i, j)] += 1
                terms.append((i, tuple(e), -2.0 * v[i, a]))
            terms.append((i, (0,) * dim, v[i, a] ** 2))
    return make_polynomial_family(terms, n, dim, 4, "matrix_factorization")


def make_logistic_regression(features, lam: float, rho: float) -> ProblemInstance:
    """``features[i]`` is agent ``i``'s list of ``(a, b)`` with ``b`` in {-1, +1}."""
    locs = []
    for data in features:
        if len(data) == 0:
            raise ProblemError("every agent needs at least one data point")
        a = np.array([np.asarray(pt[0], dtype=float) for pt in data])
        b = np.array([float(pt[1]) for pt in data])
        locs.append(LogisticLocal(a, b, lam, rho))
    bound = float(np.mean([loc._bound for loc in locs]))
    stacked = None
    mean_eval = None
    if len({loc.a.shape[0] for loc in locs}) == 1:
        a3 = np.stack([loc.a for loc in locs])
        a3t = np.ascontiguousarray(a3.transpose(0, 2, 1))
        b2 = np.stack([loc.b for loc in locs])
        a_all = a3.reshape(-1, a3.shape[2])
        b_all = b2.reshape(-1)
        m = a3.shape[1]
        lam_, rho_ = float(lam), float(rho)

        def stacked(x):
            margins = b2 * np.matmul(a3, x[:, :, None])[:, :, 0]
            w = -b2 * _sigmoid(-margins)
            reg = 2.0 * rho_ * x / (1.0 + rho_ * x * x) ** 2
            return np.matmul(a3t, w[:, :, None])[:, :, 0] / m + lam_ * reg

        def mean_eval(u):
            rt2 = rho_ * u * u
            return float(np.mean(np.logaddexp(0.0, -b_all * (a_all @ u))) + lam_ * np.sum(rt2 / (1.0 + rt2)))

    return ProblemInstance(
        locs,
        "logistic",
        lower_bound=0.0,
        average_curvature=lambda c, r: bound,
        stacked_grad=stacked,
        mean_eval=mean_eval,
    )


def make_softplus_network(data, hidden: int = 5, activation: str = "softplus", seed: int = 0) -> ProblemInstance:
    """``data[i]`` is agent ``i``'s list of ``(z, v)`` pairs."""
    locs = []
    for i, pts in enumerate(data):
        z = np.array([np.asarray(p[0], dtype=float) for p in pts])
        v = np.array([float(p[1]) for p in pts])
        locs.append(NetworkLocal(z, v, hidden, activation, seed=seed + i))
    return ProblemInstance(locs, f"network_{activation}", lower_bound=0.0)


# ------------------------------------------------------------- synthetic data


def logistic_dataset(n_agents: int, n_points: int, dim: int, seed: int, flip: float = 0.1):
    """Standard-normal features; labels ``sign(a^T theta*)`` with each label
    flipped with probability ``flip``. Points are split evenly (the first
    ``n_points % n_agents`` agents get one extra)."""
    rng = np.random.default_rng(seed % 2**64)
    theta = rng.standard_normal(dim)
    a = rng.standard_normal((n_points, dim))
    b = np.where(a @ theta >= 0, 1.0, -1.0)
    b = np.where(rng.random(n_points) < flip, -b, b)
    return [list(zip(chunk_a, chunk_b)) for chunk_a, chunk_b in zip(np.array_split(a, n_agents), np.array_split(b, n_agents))]


def network_dataset(n_agents: int, points_per_agent: int, in_dim: int, seed: int):
    rng = np.random.default_rng(seed % 2**64)
    z = rng.standard_normal((n_agents, points_per_agent, in_dim))
    v = rng.standard_normal((n_agents, points_per_agent))
    return [list(zip(z[i], v[i])) for i in range(n_agents)]


def dump_dataset_csv(data, path) -> None:
    """One row per point: ``agent, x_0..x_{K-1}, label``."""
    rows = []
    width = None
    for i, pts in enumerate(data):
        for feat, label in pts:
            feat = np.asarray(feat, dtype=float).reshape(-1)
            width = feat.size
            rows.append(",".join([str(i)] + ["%.17g" % v for v in feat] + ["%.17g" % float(label)]))
    header = ",".join(["agent"] + [f"x{k}" for k in range(width or 0)] + ["label"])
    try:
        Path(path).write_text("\n".join([header] + rows) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def stack_init(p: ProblemInstance, x0) -> np.ndarray:
    return as_stacked(x0, p.n_agents)
