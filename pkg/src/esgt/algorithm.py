"""
Extremum Seeking Tracking (ESGT) and the gradient-tracking (GT) baseline.

Both schemes run as synchronous rounds of per-agent state machines:

1. every agent emits an :class:`OutboundMessage` built from its round-``t``
   state only;
2. every agent updates from the frozen snapshot of its in-neighbors'
   messages (itself included).

ESGT agents transmit ``w_j - delta_j d_j(t)``, never the raw ``w_j``. Dither
clocks are global: agent ``i`` uses ``d_i(t)`` with the shared round counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .diagnostics import RunRecord, build_basis, measure
from .dither import DitherConfig
from .errors import DimensionMismatch, ESGTError, NoAnalyticGradient, NonFinite, RoundError
from .graph import WeightedGraph
from .problem import Problem, solve_centralized


class Kind(str, Enum):
    ESGT = "esgt"
    GT = "gt"


@dataclass(frozen=True)
class AlgorithmParams:
    gamma: float
    deltas: tuple[float, ...]
    rounds: int

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if any(not d > 0 for d in self.deltas):
            raise ValueError(f"every delta must be positive, got {self.deltas}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")

    @classmethod
    def for_dithers(cls, gamma: float, dithers: Sequence[DitherConfig], rounds: int) -> "AlgorithmParams":
        return cls(gamma, tuple(d.delta for d in dithers), rounds)

    @property
    def delta_max(self) -> float:
        return max(self.deltas)


@dataclass(frozen=True)
class AgentState:
    """Round-``t`` state of one agent.

    ``memory`` is the agent's last local measurement, reused in the next
    tracker update: ``f_i(w_i^t)`` for ESGT, ``grad f_i(w_i^t)`` for GT.
    """

    w: np.ndarray
    s: np.ndarray
    t: int = 0
    memory: float | np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class OutboundMessage:
    sender: int
    shifted_decision: np.ndarray
    tracker: np.ndarray


def _check_finite(i: int, st: AgentState) -> AgentState:
    if not (np.isfinite(st.w).all() and np.isfinite(st.s).all()):
        raise NonFinite(f"agent {i} state became non-finite at round {st.t}; step size too large?", st.t)
    return st


def _check_sync(states: Sequence[AgentState], n_agents: int, dim: int) -> int:
    if len(states) != n_agents:
        raise DimensionMismatch(f"{len(states)} states for {n_agents} agents")
    rounds = {st.t for st in states}
    if len(rounds) != 1:
        raise ValueError(f"agents out of sync: rounds {sorted(rounds)}")
    for st in states:
        if st.w.shape != (dim,) or st.s.shape != (dim,):
            raise DimensionMismatch(f"state shapes {st.w.shape}/{st.s.shape}, expected ({dim},)")
    return rounds.pop()


def _mix(weights_row: np.ndarray, inbox: Sequence[OutboundMessage], attr: str) -> np.ndarray:
    # inbox arrives in ascending sender order (see _deliver); a fixed order keeps
    # serial and threaded schedules bitwise identical
    first, *rest = inbox
    acc = weights_row[first.sender] * getattr(first, attr)
    for msg in rest:
        acc += weights_row[msg.sender] * getattr(msg, attr)
    return acc


def _deliver(graph: WeightedGraph, messages: Sequence[OutboundMessage]) -> list[list[OutboundMessage]]:
    return [[messages[j] for j in graph.in_neighborhood(i)] for i in range(graph.n_agents)]


def _map(fn: Callable[[int], AgentState], n: int, executor) -> list[AgentState]:
    if executor is None:
        return [fn(i) for i in range(n)]
    return list(executor.map(fn, range(n)))


def _stack_w0(w0, n_agents: int, dim: int) -> np.ndarray:
    W0 = np.array(w0, dtype=float)
    if W0.shape == (dim,):
        W0 = np.tile(W0, (n_agents, 1))
    if W0.shape != (n_agents, dim):
        raise DimensionMismatch(f"w0 shape {W0.shape}, expected ({n_agents}, {dim})")
    return W0


# ---------------------------------------------------------------- ESGT


def _check_dithers(problem: Problem, params: AlgorithmParams, dithers: Sequence[DitherConfig]) -> None:
    if len(dithers) != problem.n_agents or len(params.deltas) != problem.n_agents:
        raise DimensionMismatch("need one dither and one delta per agent")
    for i, (d, delta) in enumerate(zip(dithers, params.deltas)):
        if d.dim != problem.dim:
            raise DimensionMismatch(f"agent {i}: dither dim {d.dim} != problem dim {problem.dim}")
        if d.delta != delta:
            raise ValueError(f"agent {i}: dither amplitude {d.delta} != params delta {delta}")


def esgt_init(problem: Problem, params: AlgorithmParams, w0, dithers: Sequence[DitherConfig]) -> list[AgentState]:
    """Local initialization ``s_i = (2 gamma / delta_i) f_i(w_i) d_i(0)``."""
    _check_dithers(problem, params, dithers)
    W0 = _stack_w0(w0, problem.n_agents, problem.dim)
    states = []
    for i, (cost, d, delta) in enumerate(zip(problem.costs, dithers, params.deltas)):
        f0 = cost(W0[i])
        s0 = (2.0 * params.gamma / delta) * f0 * d.at(0)
        states.append(AgentState(W0[i].copy(), s0, 0, f0))
    return states


def esgt_emit(i: int, state: AgentState, dither: DitherConfig) -> OutboundMessage:
    return OutboundMessage(i, state.w - dither.delta * dither.at(state.t), state.s.copy())


def esgt_agent_update(
    i: int,
    state: AgentState,
    inbox: Sequence[OutboundMessage],
    weights_row: np.ndarray,
    cost,
    dither: DitherConfig,
    gamma: float,
) -> AgentState:
    t, delta = state.t, dither.delta
    d_now, d_next = dither.at(t), dither.at(t + 1)
    f_now = state.memory if state.memory is not None else cost(state.w)
    w_next = _mix(weights_row, inbox, "shifted_decision") - gamma * state.s + delta * d_next
    f_next = cost(w_next)
    s_next = _mix(weights_row, inbox, "tracker") + (2.0 * gamma / delta) * (f_next * d_next - f_now * d_now)
    return _check_finite(i, AgentState(w_next, s_next, t + 1, f_next))


def esgt_round(
    states: Sequence[AgentState],
    graph: WeightedGraph,
    dithers: Sequence[DitherConfig],
    params: AlgorithmParams,
    problem: Problem,
    executor=None,
) -> list[AgentState]:
    """One synchronous ESGT round. ``executor`` (e.g. a thread pool) runs the agent updates."""
    _check_sync(states, problem.n_agents, problem.dim)
    messages = [esgt_emit(j, st, dithers[j]) for j, st in enumerate(states)]
    inboxes = _deliver(graph, messages)
    A = graph.weights

    def update(i: int) -> AgentState:
        return esgt_agent_update(i, states[i], inboxes[i], A[i], problem.costs[i], dithers[i], params.gamma)

    return _map(update, problem.n_agents, executor)


# ---------------------------------------------------------------- GT


def gt_init(problem: Problem, w0) -> list[AgentState]:
    """Baseline initialization ``s_i = grad f_i(w_i)``."""
    if not problem.has_gradients:
        raise NoAnalyticGradient("gradient tracking needs analytic gradients")
    W0 = _stack_w0(w0, problem.n_agents, problem.dim)
    states = []
    for i, cost in enumerate(problem.costs):
        g0 = cost.grad(W0[i])
        states.append(AgentState(W0[i].copy(), g0.copy(), 0, g0))
    return states


def gt_agent_update(i, state, inbox, weights_row, cost, gamma) -> AgentState:
    g_now = state.memory if state.memory is not None else cost.grad(state.w)
    w_next = _mix(weights_row, inbox, "shifted_decision") - gamma * state.s
    g_next = cost.grad(w_next)
    s_next = _mix(weights_row, inbox, "tracker") + g_next - g_now
    return _check_finite(i, AgentState(w_next, s_next, state.t + 1, g_next))


def gt_round(
    states: Sequence[AgentState], graph: WeightedGraph, problem: Problem, gamma: float, executor=None
) -> list[AgentState]:
    """One synchronous gradient-tracking round (messages carry the raw ``w_j``)."""
    if not problem.has_gradients:
        raise NoAnalyticGradient("gradient tracking needs analytic gradients")
    _check_sync(states, problem.n_agents, problem.dim)
    messages = [OutboundMessage(j, st.w.copy(), st.s.copy()) for j, st in enumerate(states)]
    inboxes = _deliver(graph, messages)
    A = graph.weights

    def update(i: int) -> AgentState:
        return gt_agent_update(i, states[i], inboxes[i], A[i], problem.costs[i], gamma)

    return _map(update, problem.n_agents, executor)


# ---------------------------------------------------------------- driver


def run(
    kind: Kind | str,
    problem: Problem,
    graph: WeightedGraph,
    params: AlgorithmParams,
    dithers: Sequence[DitherConfig] | None,
    w0,
    probe_every: int = 1,
    w_star=None,
    on_round: Callable[[list[AgentState]], None] | None = None,
    executor=None,
) -> RunRecord:
    """
    Run ``params.rounds`` rounds, measuring at round 0, every ``probe_every``
    rounds and at the last round. ``on_round`` sees every state list,
    including the initial one.

    Errors raised inside a round come out as :class:`NonFinite` (carrying
    ``.round``) or wrapped in :class:`RoundError`.
    """
    kind = Kind(kind)
    if probe_every < 1:
        raise ValueError("probe_every must be >= 1")
    if graph.n_agents != problem.n_agents:
        raise DimensionMismatch(f"graph has {graph.n_agents} agents, problem has {problem.n_agents}")
    if w_star is None:
        w_star = solve_centralized(problem)
    w_star = np.asarray(w_star, dtype=float)
    f_star = problem.total(w_star)
    basis = build_basis(problem.n_agents, problem.dim)

    if kind is Kind.ESGT:
        if dithers is None:
            raise ValueError("ESGT needs dither configs")
        states = esgt_init(problem, params, w0, dithers)

        def step(sts):
            return esgt_round(sts, graph, dithers, params, problem, executor)
    else:
        states = gt_init(problem, w0)

        def step(sts):
            return gt_round(sts, graph, problem, params.gamma, executor)

    def probe(sts, t):
        return measure(sts, problem, w_star, f_star, params, dithers, basis, t, kind.value)

    metrics = [probe(states, 0)]
    if on_round is not None:
        on_round(states)
    for t in range(params.rounds):
        try:
            states = step(states)
        except NonFinite:
            raise
        except ESGTError as exc:
            raise RoundError(t + 1, exc) from exc
        if on_round is not None:
            on_round(states)
        if (t + 1) % probe_every == 0 or t + 1 == params.rounds:
            metrics.append(probe(states, t + 1))

    config = {
        "kind": kind.value,
        "n_agents": problem.n_agents,
        "dim": problem.dim,
        "gamma": params.gamma,
        "deltas": list(params.deltas),
        "rounds": params.rounds,
        "probe_every": probe_every,
        "w_star": w_star.tolist(),
        "f_star": f_star,
    }
    return RunRecord(config, metrics, states)
