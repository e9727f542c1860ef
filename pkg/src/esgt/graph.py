"""
Communication graphs with doubly stochastic (Metropolis) mixing weights.

Nodes are labelled ``0..n_agents-1``. Edges are stored as ordered pairs
``(i, j)`` with ``i < j``; self-loops are implicit in the diagonal weights.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import ConnectivityTimeout, InvalidProbability
from .rng import make_rng

Edge = tuple[int, int]


def _normalize_edges(edges: Iterable[Iterable[int]], n_agents: int) -> frozenset[Edge]:
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise ValueError(f"self-loop ({i}, {j}) not allowed in edge set")
        if not (0 <= i < n_agents and 0 <= j < n_agents):
            raise ValueError(f"edge ({i}, {j}) outside 0..{n_agents - 1}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def _adjacency_lists(edges: Iterable[Edge], n_agents: int) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n_agents)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    for nbrs in adj:
        nbrs.sort()
    return adj


def is_connected(edges: Iterable[Edge], n_agents: int) -> bool:
    """Breadth-first connectivity check."""
    if n_agents <= 1:
        return True
    adj = _adjacency_lists(edges, n_agents)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n_agents


def metropolis_weights(edges: Iterable[Iterable[int]], n_agents: int) -> np.ndarray:
    """
    Metropolis-Hastings weights: ``a_ij = 1 / (1 + max(deg_i, deg_j))`` on
    edges, ``a_ii = 1 - sum_{j != i} a_ij``.

    The result is symmetric and doubly stochastic for any undirected edge set.
    """
    edges = _normalize_edges(edges, n_agents)
    deg = np.zeros(n_agents, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((n_agents, n_agents))
    for i, j in edges:
        W[i, j] = W[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    for i in range(n_agents):
        W[i, i] = 1.0 - (W[i].sum() - W[i, i])
    return W


def validate_doubly_stochastic(matrix, tol: float = 1e-12) -> bool:
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if np.any(M < -tol):
        return False
    ones = np.ones(M.shape[0])
    return bool(
        np.all(np.abs(M.sum(axis=1) - ones) <= tol)
        and np.all(np.abs(M.sum(axis=0) - ones) <= tol)
    )


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected connected graph plus its mixing matrix."""

    n_agents: int
    edges: frozenset[Edge]
    weights: np.ndarray

    @classmethod
    def from_edges(cls, edges: Iterable[Iterable[int]], n_agents: int) -> "WeightedGraph":
        if n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        e = _normalize_edges(edges, n_agents)
        if not is_connected(e, n_agents):
            raise ValueError("edge set is not connected")
        W = metropolis_weights(e, n_agents)
        W.setflags(write=False)
        return cls(n_agents, e, W)

    @cached_property
    def _adjacency(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(nb) for nb in _adjacency_lists(self.edges, self.n_agents))

    def neighbors(self, i: int) -> list[int]:
        """Neighbors of ``i`` (excluding ``i``), ascending."""
        return list(self._adjacency[i])

    def in_neighborhood(self, i: int) -> list[int]:
        """``N_i`` together with ``i`` itself, ascending: the agents whose messages ``i`` mixes."""
        return sorted(self._adjacency[i] + (i,))

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self._adjacency])

    def is_connected(self) -> bool:
        return is_connected(self.edges, self.n_agents)

    def second_singular_value(self) -> float:
        if self.n_agents == 1:
            return 0.0
        return float(np.linalg.svd(self.weights, compute_uv=False)[1])

    def permuted(self, perm) -> "WeightedGraph":
        """Relabel agents: new agent ``k`` is old agent ``perm[k]``."""
        perm = list(perm)
        inv = {old: new for new, old in enumerate(perm)}
        return WeightedGraph.from_edges(((inv[i], inv[j]) for i, j in self.edges), self.n_agents)

    def to_text(self) -> str:
        lines = [f"n_agents {self.n_agents}"]
        lines += [f"{i} {j}" for i, j in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WeightedGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines:
            raise ValueError("empty graph file")
        head = lines[0].split()
        if len(head) != 2 or head[0] != "n_agents":
            raise ValueError(f"bad header line: {lines[0]!r}")
        n = int(head[1])
        edges = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise ValueError(f"bad edge line: {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return cls.from_edges(edges, n)


def erdos_renyi_connected(
    n_agents: int, edge_prob: float, seed: int, max_attempts: int = 1000
) -> WeightedGraph:
    """
    Sample G(n, p) until connected and attach Metropolis weights.

    Attempt ``k`` draws from the stream seeded with ``seed + k``, so the result
    is a deterministic function of ``(n_agents, edge_prob, seed)``.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    if not (0.0 < edge_prob <= 1.0):
        raise InvalidProbability(f"edge_prob must lie in (0, 1], got {edge_prob}")
    pairs = [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)]
    for attempt in range(max_attempts):
        rng = make_rng(seed + attempt)
        draws = rng.random(len(pairs))
        edges = [pq for pq, u in zip(pairs, draws) if u < edge_prob]
        if is_connected(edges, n_agents):
            return WeightedGraph.from_edges(edges, n_agents)
    raise ConnectivityTimeout(
        f"no connected G({n_agents}, {edge_prob}) found in {max_attempts} attempts from seed {seed}"
    )
