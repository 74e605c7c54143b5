"""Communication graphs, incidence/Laplacian matrices and mixing matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RGG_RETRY_CAP = 100
STOCHASTIC_TOL = 1e-12


class GraphError(ValueError):
    """Invalid graph construction (size, range, connectivity)."""


class MixingError(ValueError):
    """A constructed mixing matrix violates one of its invariants."""


@dataclass(frozen=True)
class Graph:
    """Undirected, connected communication graph on ``n_agents`` nodes.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``.
    """

    n_agents: int
    edges: frozenset
    positions: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_agents < 1:
            raise GraphError(f"n_agents must be positive, got {self.n_agents}")
        raw = list(self.edges)
        norm = set()
        for u, v in raw:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < self.n_agents and 0 <= v < self.n_agents):
                raise GraphError(f"edge ({u}, {v}) out of range for {self.n_agents} nodes")
            norm.add((min(u, v), max(u, v)))
        if len(norm) != len(raw):
            raise GraphError("duplicate edge")
        object.__setattr__(self, "edges", frozenset(norm))
        if not _is_connected(self.n_agents, self.edges):
            raise GraphError("graph is not connected")

    @property
    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_agents, self.n_agents))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        return sorted({v for u, v in self.edges if u == i} | {u for u, v in self.edges if v == i})

    def laplacian(self) -> np.ndarray:
        adj = self.adjacency()
        return np.diag(adj.sum(axis=1)) - adj


def _is_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    nbrs = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n


def diameter(g: Graph) -> int:
    """Longest shortest-path length (in hops) over all node pairs."""
    nbrs = [g.neighbors(i) for i in range(g.n_agents)]
    best = 0
    for src in range(g.n_agents):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        best = max(best, max(dist.values()))
    return best


def build_path_graph(n: int) -> Graph:
    if n < 2:
        raise GraphError(f"path graph needs n >= 2, got {n}")
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def build_complete_graph(n: int) -> Graph:
    if n < 2:
        raise GraphError(f"complete graph needs n >= 2, got {n}")
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def build_random_geometric_graph(n: int, radius: float, seed: int) -> Graph:
    """Random geometric graph in the unit square, resampled until connected.

    Attempt ``a`` draws positions from ``SeedSequence([seed, a])``; after
    ``RGG_RETRY_CAP`` disconnected draws a :class:`GraphError` is raised.
    """
    if n < 2:
        raise GraphError(f"random geometric graph needs n >= 2, got {n}")
    if not 0.0 < radius < 1.0:
        raise GraphError(f"radius must lie in (0, 1), got {radius}")
    for attempt in range(RGG_RETRY_CAP):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, attempt]))
        pos = rng.random((n, 2))
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        edges = frozenset((i, j) for i in range(n) for j in range(i + 1, n) if dist[i, j] < radius)
        if _is_connected(n, edges):
            return Graph(n, edges, positions=tuple(map(tuple, pos)))
    raise GraphError(f"no connected graph after {RGG_RETRY_CAP} draws (n={n}, radius={radius})")


def incidence_matrix(g: Graph) -> np.ndarray:
    """|E| x N incidence matrix: +1 at the lower endpoint, -1 at the higher."""
    a = np.zeros((len(g.edges), g.n_agents))
    for e, (i, j) in enumerate(g.sorted_edges):
        a[e, i] = 1.0
        a[e, j] = -1.0
    return a


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weights with spectral certificates.

    ``eta`` is the second largest eigenvalue of W; ``deviation_norm`` is
    ``||W - 11^T/N||_2``, the factor that actually contracts the
    disagreement subspace (it also covers negative eigenvalues).
    """

    entries: np.ndarray
    eta: float
    deviation_norm: float
    graph: Graph

    @property
    def n_agents(self) -> int:
        return self.entries.shape[0]

    @property
    def contraction(self) -> float:
        return self.deviation_norm


def _spectral(w: np.ndarray) -> tuple[float, float, np.ndarray]:
    n = w.shape[0]
    eig = np.sort(np.linalg.eigvalsh(w))[::-1]
    eta = float(eig[1]) if n > 1 else 0.0
    dev = float(np.max(np.abs(np.linalg.eigvalsh(w - np.full((n, n), 1.0 / n))))) if n > 1 else 0.0
    return eta, dev, eig


def check_mixing(w: np.ndarray, g: Graph) -> None:
    n = g.n_agents
    if w.shape != (n, n):
        raise MixingError(f"shape {w.shape} does not match {n} agents")
    if np.max(np.abs(w - w.T)) > STOCHASTIC_TOL:
        raise MixingError("W is not symmetric")
    ones = np.ones(n)
    if np.max(np.abs(w @ ones - ones)) > STOCHASTIC_TOL or np.max(np.abs(ones @ w - ones)) > STOCHASTIC_TOL:
        raise MixingError("W is not doubly stochastic")
    pattern = g.adjacency() + np.eye(n)
    if np.any((pattern > 0) & ~(w > 0)) or np.any((pattern == 0) & (w != 0)):
        raise MixingError("sparsity pattern of W does not match the graph")
    eta, dev, eig = _spectral(w)
    if eig[0] > 1 + 1e-10 or eig[-1] < -1 - 1e-10:
        raise MixingError("eigenvalues of W leave [-1, 1]")
    if n > 1 and not (eta < 1 and dev < 1):
        raise MixingError(f"W does not contract the disagreement subspace (eta={eta}, dev={dev})")


def build_mixing_matrix(g: Graph, rule: str = "metropolis_hastings", delta: float | None = None) -> MixingMatrix:
    """Mixing matrix for ``g``.

    Parameters
    ----------
    rule : {"metropolis_hastings", "laplacian_shift"}
        ``laplacian_shift`` uses ``W = I - L/(lambda_max(L) + delta)`` with
        ``delta = 0.1 * lambda_max`` unless overridden (``delta=0`` on the
        single-edge graph gives ``W = 11^T/2``).
    """
    n = g.n_agents
    if rule == "metropolis_hastings":
        deg = g.degrees()
        w = np.zeros((n, n))
        for i, j in g.edges:
            w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
        w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    elif rule == "laplacian_shift":
        lap = g.laplacian()
        lam_max = float(np.max(np.linalg.eigvalsh(lap)))
        shift = 0.1 * lam_max if delta is None else float(delta)
        if lam_max + shift <= 0:
            raise MixingError("laplacian_shift needs lambda_max + delta > 0")
        w = np.eye(n) - lap / (lam_max + shift)
        w = 0.5 * (w + w.T)
    else:
        raise MixingError(f"unknown mixing rule {rule!r}")
    check_mixing(w, g)
    eta, dev, _ = _spectral(w)
    w.setflags(write=False)
    return MixingMatrix(w, eta, dev, g)


def max_consensus(values, g: Graph, rounds: int | None = None) -> np.ndarray:
    """Synchronous max-consensus: each round every agent takes the max over
    its closed neighbourhood. ``diameter(g)`` rounds reach the global max."""
    vals = np.asarray(values, dtype=float).copy()
    if vals.shape != (g.n_agents,):
        raise ValueError(f"expected {g.n_agents} values, got shape {vals.shape}")
    nbrs = [g.neighbors(i) + [i] for i in range(g.n_agents)]
    for _ in range(diameter(g) if rounds is None else rounds):
        vals = np.array([vals[nb].max() for nb in nbrs])
    return vals


def write_edge_list(g: Graph, path) -> None:
    lines = [f"n {g.n_agents}"] + [f"{i} {j}" for i, j in g.sorted_edges]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or rows[0][0] != "n" or len(rows[0]) != 2:
        raise GraphError(f"{path}: first line must be 'n <N>'")
    n = int(rows[0][1])
    edges = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise GraphError(f"{path}:{k}: expected 'u v'")
        edges.append((int(row[0]), int(row[1])))
    return Graph(n, edges)
