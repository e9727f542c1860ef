"""
Mean / disagreement coordinates and per-round metrics.

Stacked vectors are agent-major: ``stacked[i*n:(i+1)*n]`` is agent ``i``'s
block. ``ConsensusBasis`` holds the orthonormal complement ``R`` of the
agreement direction, so ``T = [1'/N; R']`` and ``T^-1 = [1, R]``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch

CSV_COLUMNS = ("round", "cost_rel_err", "var_rel_err", "consensus_err", "zbar_norm", "tracker_err")
# below this |f(w*)| (or ||w*||) the relative metrics switch to absolute ones
REL_FLOOR = 1e-12


def fmt(v: float) -> str:
    return f"{v:.12g}"


@dataclass(frozen=True, eq=False)
class ConsensusBasis:
    n_agents: int
    dim: int
    agent_basis: np.ndarray  # N x (N-1), orthonormal columns orthogonal to 1

    @cached_property
    def R(self) -> np.ndarray:
        """The lifted ``Nn x (N-1)n`` matrix ``agent_basis kron I_n``."""
        return np.kron(self.agent_basis, np.eye(self.dim))

    @property
    def T(self) -> np.ndarray:
        ones = np.kron(np.ones((self.n_agents, 1)), np.eye(self.dim))
        return np.vstack([ones.T / self.n_agents, self.R.T])

    @property
    def T_inv(self) -> np.ndarray:
        ones = np.kron(np.ones((self.n_agents, 1)), np.eye(self.dim))
        return np.hstack([ones, self.R])


def build_basis(n_agents: int, dim: int = 1) -> ConsensusBasis:
    """
    Orthonormal complement of ``span(1)`` from the Householder reflector
    mapping ``e_1`` to ``1/sqrt(N)``; its last ``N-1`` columns are the basis.
    """
    if n_agents < 1 or dim < 1:
        raise ValueError("n_agents and dim must be >= 1")
    N = n_agents
    if N == 1:
        return ConsensusBasis(1, dim, np.zeros((1, 0)))
    v = np.full(N, 1.0 / np.sqrt(N))
    u = v.copy()
    u[0] -= 1.0
    H = np.eye(N) - 2.0 * np.outer(u, u) / (u @ u)
    B = H[:, 1:].copy()
    B.setflags(write=False)
    return ConsensusBasis(N, dim, B)


def _as_agent_rows(stacked, basis: ConsensusBasis) -> np.ndarray:
    X = np.asarray(stacked, dtype=float)
    N, n = basis.n_agents, basis.dim
    if X.shape == (N * n,):
        return X.reshape(N, n)
    if X.shape == (N, n):
        return X
    raise DimensionMismatch(f"expected shape ({N * n},) or ({N}, {n}), got {X.shape}")


def split(stacked, basis: ConsensusBasis) -> tuple[np.ndarray, np.ndarray]:
    """``(mean, orthogonal) = (1'x/N, R'x)``."""
    X = _as_agent_rows(stacked, basis)
    mean = X.mean(axis=0)
    orth = (basis.agent_basis.T @ X).reshape(-1)
    return mean, orth


def reconstruct(mean, orthogonal, basis: ConsensusBasis) -> np.ndarray:
    """Inverse of :func:`split`, returned in stacked (``Nn``) form."""
    mean = np.asarray(mean, dtype=float)
    orth = np.asarray(orthogonal, dtype=float).reshape(basis.n_agents - 1, basis.dim)
    return (np.tile(mean, (basis.n_agents, 1)) + basis.agent_basis @ orth).reshape(-1)


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    cost_rel_err: float
    var_rel_err: float
    consensus_err: float
    zbar_norm: float
    tracker_err: float
    mean_point: np.ndarray = field(repr=False)
    # ||w - 1w*||, ||x - 1w*|| and ||Delta d|| for the bound chain w -> x
    w_err: float = 0.0
    x_err: float = 0.0
    dither_norm: float = 0.0
    relative: bool = True

    def row(self) -> list[str]:
        return [str(self.round)] + [fmt(getattr(self, c)) for c in CSV_COLUMNS[1:]]


def measure(states, problem, w_star, f_star, params, dithers, basis, t, kind="esgt") -> RoundMetrics:
    """
    Metrics for one round.

    For ESGT the dither-free points ``x_i = w_i - delta_i d_i(t)`` are used
    and ``zbar`` is the mean of ``s_i - (2 gamma/delta_i) f_i(w_i) d_i(t)``;
    for GT ``x = w`` and ``zbar`` is the mean of ``s_i - grad f_i(w_i)``.
    Relative errors fall back to absolute ones (``relative=False``) when
    ``|f(w*)|`` or ``||w*||`` is below ``REL_FLOOR``.
    """
    N, n = problem.n_agents, problem.dim
    if len(states) != N or basis.n_agents != N or basis.dim != n:
        raise DimensionMismatch("states, problem and basis disagree on N or n")
    W = np.array([st.w for st in states])
    S = np.array([st.s for st in states])
    w_star = np.asarray(w_star, dtype=float)
    if W.shape != (N, n) or S.shape != (N, n) or w_star.shape != (n,):
        raise DimensionMismatch(f"state shape {W.shape}/{S.shape}, w* shape {w_star.shape}, expected n={n}")

    if kind == "esgt":
        D = np.array([dithers[i].at(t) for i in range(N)])
        deltas = np.asarray(params.deltas, dtype=float)[:, None]
        X = W - deltas * D
        fvals = problem.values(W)
        Z = S - (2.0 * params.gamma / deltas) * fvals[:, None] * D
    elif kind == "gt":
        X = W
        Z = S - problem.grads(W)
    else:
        raise ValueError(f"unknown algorithm kind {kind!r}")

    xbar, x_perp = split(X, basis)
    zbar = Z.mean(axis=0)
    cost_gap = abs(problem.total(xbar) - f_star)
    var_gap = float(np.linalg.norm(xbar - w_star))
    relative = abs(f_star) >= REL_FLOOR and np.linalg.norm(w_star) >= REL_FLOOR
    if relative:
        cost_gap /= abs(f_star)
        var_gap /= float(np.linalg.norm(w_star))
    return RoundMetrics(
        round=int(t),
        cost_rel_err=float(cost_gap),
        var_rel_err=var_gap,
        consensus_err=float(np.linalg.norm(x_perp)),
        zbar_norm=float(np.linalg.norm(zbar)),
        tracker_err=float(np.linalg.norm(S.mean(axis=0))),
        mean_point=xbar,
        w_err=float(np.linalg.norm(W - w_star)),
        x_err=float(np.linalg.norm(X - w_star)),
        dither_norm=float(np.linalg.norm(W - X)),
        relative=bool(relative),
    )


@dataclass
class RunRecord:
    config: dict
    metrics: list[RoundMetrics]
    final_states: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        rounds = [m.round for m in self.metrics]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError("metric rounds must be strictly increasing")

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.metrics])

    @property
    def rounds(self) -> np.ndarray:
        return self.series("round")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for m in self.metrics:
            writer.writerow(m.row())
        return buf.getvalue()

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())


def read_csv(path) -> dict[str, np.ndarray]:
    """Load a metrics CSV back into column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
