"""
Local cost oracles and built-in problem families.

Algorithms only ever call ``LocalCost.__call__`` (a zeroth-order measurement).
Analytic gradients are carried along for the gradient-tracking baseline, the
centralized reference solver and the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, MaxIterations, NoAnalyticGradient
from .rng import box_muller, make_rng, uniform

Vector = np.ndarray


@dataclass(frozen=True)
class LocalCost:
    dim: int
    fn: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector] | None = None

    def __call__(self, w) -> float:
        return float(self.fn(np.asarray(w, dtype=float)))

    def grad(self, w) -> Vector:
        if self.gradient is None:
            raise NoAnalyticGradient("cost has no analytic gradient")
        return np.asarray(self.gradient(np.asarray(w, dtype=float)), dtype=float)

    @property
    def has_gradient(self) -> bool:
        return self.gradient is not None


@dataclass(frozen=True)
class Problem:
    """N local costs over a common ``dim``-dimensional variable.

    ``kind`` and ``params`` describe how to rebuild the instance; ``kind ==
    "custom"`` instances are not serializable.
    """

    costs: tuple[LocalCost, ...]
    kind: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if not self.costs:
            raise ValueError("a problem needs at least one local cost")
        dims = {c.dim for c in self.costs}
        if len(dims) != 1:
            raise DimensionMismatch(f"local costs disagree on dimension: {sorted(dims)}")

    @property
    def n_agents(self) -> int:
        return len(self.costs)

    @property
    def dim(self) -> int:
        return self.costs[0].dim

    @property
    def has_gradients(self) -> bool:
        return all(c.has_gradient for c in self.costs)

    def total(self, w) -> float:
        """Global cost ``sum_i f_i(w)``."""
        return float(sum(c(w) for c in self.costs))

    def total_grad(self, w) -> Vector:
        return np.sum([c.grad(w) for c in self.costs], axis=0)

    def values(self, W) -> Vector:
        """``f_i(W[i])`` for every agent."""
        return np.array([c(w) for c, w in zip(self.costs, W)])

    def grads(self, W) -> np.ndarray:
        return np.array([c.grad(w) for c, w in zip(self.costs, W)])

    def permuted(self, perm: Sequence[int]) -> "Problem":
        return Problem(tuple(self.costs[p] for p in perm))

    def to_text(self) -> str:
        if self.kind == "custom":
            raise ValueError("custom problems cannot be serialized; build them from a named family")
        lines = [f"kind={self.kind}"]
        for k, v in self.params.items():
            if k.startswith("_"):
                continue
            if isinstance(v, (list, tuple, np.ndarray)):
                v = ",".join(repr(float(x)) for x in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Problem":
        kv = dict(
            line.split("=", 1) for line in (ln.strip() for ln in text.splitlines()) if line and not line.startswith("#")
        )
        kind = kv.pop("kind", None)
        if kind == "personalized":
            return personalized_instance(int(kv["n_agents"]), int(kv["dim"]), int(kv["seed"]))
        if kind == "quadratic":
            return quadratic_instance(int(kv["n_agents"]), int(kv["dim"]), int(kv["seed"]))
        if kind == "source_seeking":
            target = [float(x) for x in kv["target"].split(",")]
            return source_seeking_instance(int(kv["n_agents"]), target, float(kv["sigma"]), int(kv["seed"]))
        raise ValueError(f"unknown problem kind {kind!r}")


def quadratic_cost(Q, r=None, c: float = 0.0) -> LocalCost:
    """``f(w) = w'Qw + r'w + c`` with gradient ``(Q + Q')w + r``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    r = np.zeros(n) if r is None else np.asarray(r, dtype=float).reshape(n)
    Qs = Q + Q.T
    return LocalCost(n, lambda w: w @ Q @ w + r @ w + c, lambda w: Qs @ w + r)


def _logsumexp_weighted(a, b, w):
    # log sum_l a_l exp(b_l w_l), shifted for stability
    z = b * w + np.log(a)
    m = z.max()
    e = np.exp(z - m)
    return m + np.log(e.sum()), e / e.sum()


def personalized_cost(Q, r, a, b) -> LocalCost:
    """``w'Qw + r'w + log(sum_l a_l exp(b_l w_l))`` with its gradient."""
    Q, r, a, b = (np.asarray(v, dtype=float) for v in (Q, r, a, b))
    if np.any(a <= 0):
        raise ValueError("logsumexp weights a must be strictly positive")
    Qs = Q + Q.T

    def f(w):
        lse, _ = _logsumexp_weighted(a, b, w)
        return w @ Q @ w + r @ w + lse

    def g(w):
        _, soft = _logsumexp_weighted(a, b, w)
        return Qs @ w + r + soft * b

    return LocalCost(len(r), f, g)


def personalized_instance(n_agents: int, dim: int, seed: int) -> Problem:
    """
    Random personalized-optimization instance.

    Per agent, in draw order: ``M`` (dim x dim) ~ U[-1, 1], ``r`` ~ U[-1, 1],
    ``a`` ~ U[0.1, 1.1], ``b`` ~ U[-1, 1]; then ``Q = M'M + I``.
    """
    if n_agents < 1 or dim < 1:
        raise ValueError("n_agents and dim must be >= 1")
    rng = make_rng(seed)
    costs = []
    for _ in range(n_agents):
        M = uniform(rng, -1.0, 1.0, (dim, dim))
        r = uniform(rng, -1.0, 1.0, dim)
        a = uniform(rng, 0.1, 1.1, dim)
        b = uniform(rng, -1.0, 1.0, dim)
        costs.append(personalized_cost(M.T @ M + np.eye(dim), r, a, b))
    return Problem(tuple(costs), "personalized", {"n_agents": n_agents, "dim": dim, "seed": seed})


def quadratic_instance(n_agents: int, dim: int, seed: int) -> Problem:
    """Personalized instance without the logsumexp term: ``w'Q_i w + r_i'w``, same draws for ``M`` and ``r``."""
    if n_agents < 1 or dim < 1:
        raise ValueError("n_agents and dim must be >= 1")
    rng = make_rng(seed)
    costs = []
    for _ in range(n_agents):
        M = uniform(rng, -1.0, 1.0, (dim, dim))
        r = uniform(rng, -1.0, 1.0, dim)
        costs.append(quadratic_cost(M.T @ M + np.eye(dim), r))
    return Problem(tuple(costs), "quadratic", {"n_agents": n_agents, "dim": dim, "seed": seed})


def distance_cost(center) -> LocalCost:
    c = np.asarray(center, dtype=float)
    return LocalCost(len(c), lambda w: float((w - c) @ (w - c)), lambda w: 2.0 * (w - c))


def source_seeking_instance(n_agents: int, target, sigma: float, seed: int) -> Problem:
    """Squared-distance costs around biased copies ``w_i* ~ N(target, sigma I)`` of the source position."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    target = np.asarray(target, dtype=float)
    rng = make_rng(seed)
    z = box_muller(rng, n_agents * target.size).reshape(n_agents, target.size)
    centers = target + np.sqrt(sigma) * z
    costs = tuple(distance_cost(c) for c in centers)
    params = {"n_agents": n_agents, "target": target.tolist(), "sigma": sigma, "seed": seed}
    return Problem(costs, "source_seeking", params | {"_centers": centers})


def source_centers(problem: Problem) -> np.ndarray:
    """The biased source positions of a source-seeking instance."""
    return problem.params["_centers"]


def _fd_hessian(problem: Problem, w: Vector, h: float = 1e-5) -> np.ndarray:
    n = len(w)
    H = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        H[:, k] = (problem.total_grad(w + e) - problem.total_grad(w - e)) / (2 * h)
    return 0.5 * (H + H.T)


def solve_centralized(problem: Problem, tol: float = 1e-10, max_iter: int = 10**4, w0=None) -> Vector:
    """
    Minimize ``sum_i f_i`` by damped Newton with Armijo backtracking.

    The Hessian is a central difference of the analytic gradient; when it is
    not positive definite the step falls back to steepest descent.
    Stops when ``||sum_i grad f_i(w)|| <= tol``.
    """
    if not problem.has_gradients:
        raise NoAnalyticGradient("solve_centralized needs analytic gradients on every local cost")
    w = np.zeros(problem.dim) if w0 is None else np.array(w0, dtype=float)
    fw, g = problem.total(w), problem.total_grad(w)
    for _ in range(max_iter):
        gn2 = float(g @ g)
        if np.sqrt(gn2) <= tol:
            return w
        try:
            direction = np.linalg.solve(_fd_hessian(problem, w), g)
            if not direction @ g > 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            direction = g
        slope = float(direction @ g)
        step = 1.0
        while True:
            cand = w - step * direction
            fc = problem.total(cand)
            if fc <= fw - 1e-4 * step * slope:
                gc = problem.total_grad(cand)
                break
            # near the optimum f differences drown in rounding; fall back to gradient decrease
            if abs(fc - fw) <= 1e-13 * (1.0 + abs(fw)):
                gc = problem.total_grad(cand)
                if gc @ gc < gn2:
                    break
            step *= 0.5
            if step < 1e-20:
                raise MaxIterations("line search stalled; the problem may not be smooth/convex")
        w, fw, g = cand, fc, gc
    raise MaxIterations(f"Newton iteration did not reach tol={tol} in {max_iter} iterations")
