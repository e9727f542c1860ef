"""
Scenario configuration and experiment drivers behind the CLI.

Every random ingredient of instance ``k`` of a scenario (graph, costs, initial
points, source target) is drawn from its own stream keyed by
``(base_seed, k, stream)``, so serial and parallel Monte Carlo schedules give
identical results.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .algorithm import AlgorithmParams, Kind, run
from .diagnostics import RunRecord, fmt
from .dither import DitherConfig, common_period, design_dither, paper_recipe_periods
from .errors import ESGTError
from .graph import WeightedGraph, erdos_renyi_connected
from .problem import Problem, personalized_instance, solve_centralized, source_seeking_instance
from .rng import box_muller, derive_seed, make_rng, uniform

log = logging.getLogger(__name__)

GRAPH_STREAM, PROBLEM_STREAM, INIT_STREAM, TARGET_STREAM = range(4)
SCENARIOS = ("personalized", "source_seeking")


@dataclass
class ScenarioConfig:
    scenario: str = "personalized"
    n_agents: int = 5
    dim: int = 2
    edge_prob: float = 0.2
    gamma: float = 0.01
    delta: float = 0.2
    tau0: int = 3
    tau0i: int = 2
    phi0: float = 0.0
    rounds: int = 20000
    probe_every: int = 0  # 0: once per common dither period
    n_instances: int = 1
    base_seed: int = 0
    output: str = "esgt_run.csv"
    init_radius: float = 5.0
    sigma: float = 0.5
    algorithm: str = "esgt"
    workers: int = 1
    per_instance: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.scenario == "source_seeking" and self.dim != 2:
            raise ValueError("source_seeking is planar: dim must be 2")
        for name in ("n_agents", "dim", "n_instances", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (0 < self.edge_prob <= 1):
            raise ValueError("edge_prob must lie in (0, 1]")
        if not self.gamma > 0 or not self.delta > 0 or not self.sigma > 0:
            raise ValueError("gamma, delta and sigma must be positive")
        if self.tau0 < 3 or self.tau0i < 2:
            raise ValueError("need tau0 >= 3 and tau0i >= 2")
        if self.rounds < 0 or self.probe_every < 0 or self.init_radius < 0:
            raise ValueError("rounds, probe_every and init_radius must be nonnegative")
        Kind(self.algorithm)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))

    @classmethod
    def from_mapping(cls, values: dict) -> "ScenarioConfig":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            name = key.strip().replace("-", "_")
            if name not in types:
                raise ValueError(f"unknown config key {key!r}")
            kw[name] = _coerce(raw, getattr(cls, name) if hasattr(cls, name) else None, types[name])
        return cls(**kw)


def _coerce(raw, default, typ):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    kind = typ if isinstance(typ, str) else getattr(typ, "__name__", "str")
    if kind == "bool":
        return raw.lower() in ("1", "true", "yes", "on")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path) -> dict[str, str]:
    """Parse a ``key=value`` file (``#`` comments, blank lines ignored)."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass
class Instance:
    index: int
    graph: WeightedGraph
    problem: Problem
    dithers: list[DitherConfig]
    w0: np.ndarray
    w_star: np.ndarray
    period: int
    seeds: dict = field(default_factory=dict)


def ball_points(rng: np.random.Generator, count: int, dim: int, radius: float, center=None) -> np.ndarray:
    """Uniform samples from the ``dim``-ball of the given radius."""
    z = box_muller(rng, count * dim).reshape(count, dim)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    rad = radius * rng.random(count) ** (1.0 / dim)
    pts = z * rad[:, None]
    return pts if center is None else pts + np.asarray(center, dtype=float)


def make_dithers(config: ScenarioConfig, delta: float | None = None) -> list[DitherConfig]:
    periods = paper_recipe_periods(config.dim, config.tau0, config.tau0i)
    d = design_dither(config.dim, periods, config.phi0, config.delta if delta is None else delta)
    return [d] * config.n_agents


def build_instance(config: ScenarioConfig, index: int = 0) -> Instance:
    seeds = {
        name: derive_seed(config.base_seed, index, stream)
        for name, stream in (("graph", GRAPH_STREAM), ("problem", PROBLEM_STREAM), ("init", INIT_STREAM), ("target", TARGET_STREAM))
    }
    graph = erdos_renyi_connected(config.n_agents, config.edge_prob, seeds["graph"])
    if config.scenario == "personalized":
        problem = personalized_instance(config.n_agents, config.dim, seeds["problem"])
    else:
        target = uniform(make_rng(seeds["target"]), -config.init_radius, config.init_radius, config.dim)
        problem = source_seeking_instance(config.n_agents, target, config.sigma, seeds["problem"])
    dithers = make_dithers(config)
    w0 = ball_points(make_rng(seeds["init"]), config.n_agents, config.dim, config.init_radius)
    w_star = solve_centralized(problem)
    return Instance(index, graph, problem, dithers, w0, w_star, common_period(dithers), seeds)


def probe_interval(config: ScenarioConfig, period: int) -> int:
    return config.probe_every or period


def run_instance(config: ScenarioConfig, index: int = 0, on_round=None) -> tuple[Instance, RunRecord]:
    inst = build_instance(config, index)
    params = AlgorithmParams.for_dithers(config.gamma, inst.dithers, config.rounds)
    rec = run(
        config.algorithm,
        inst.problem,
        inst.graph,
        params,
        inst.dithers,
        inst.w0,
        probe_every=probe_interval(config, inst.period),
        w_star=inst.w_star,
        on_round=on_round,
    )
    rec.config.update(instance=index, period=inst.period, seeds=inst.seeds)
    return inst, rec


def _manifest_path(output) -> Path:
    return Path(str(output) + ".manifest.txt")


def write_manifest(config: ScenarioConfig, extra: dict, output=None) -> Path:
    path = _manifest_path(output or config.output)
    lines = [config.to_text()]
    for k, v in extra.items():
        lines.append(f"{k}={v}\n")
    path.write_text("".join(lines))
    return path


def run_scenario(config: ScenarioConfig) -> RunRecord:
    """Single ESGT (or GT) run on instance ``base_seed``; writes CSV and manifest."""
    inst, rec = run_instance(config, 0)
    rec.to_csv(config.output)
    write_manifest(
        config,
        {
            "periods": list(inst.dithers[0].odd_periods),
            "common_period": inst.period,
            "w_star": ",".join(fmt(v) for v in inst.w_star),
            "f_star": fmt(rec.config["f_star"]),
            "relative_metrics": all(m.relative for m in rec.metrics),
            **{f"seed_{k}": v for k, v in inst.seeds.items()},
        },
    )
    return rec


def _mc_worker(args):
    config, index = args
    try:
        _, rec = run_instance(config, index)
        return index, rec, None
    except ESGTError as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def run_montecarlo(config: ScenarioConfig) -> dict[str, np.ndarray]:
    """
    Run ``n_instances`` instances and write the per-round means of
    ``cost_rel_err`` and ``var_rel_err`` to ``config.output``.
    """
    jobs = [(config, i) for i in range(config.n_instances)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_mc_worker, jobs))
    else:
        results = [_mc_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    ok = [(i, rec) for i, rec, err in results if rec is not None]
    failed = [(i, err) for i, rec, err in results if rec is None]
    for i, err in failed:
        log.warning("instance %d failed: %s", i, err)
    if not ok:
        raise ESGTError(f"all {config.n_instances} Monte Carlo instances failed")

    rounds = ok[0][1].rounds
    cost = np.array([[m.cost_rel_err for m in rec.metrics] for _, rec in ok])
    var = np.array([[m.var_rel_err for m in rec.metrics] for _, rec in ok])
    agg = {"round": rounds, "cost_rel_err": cost.mean(axis=0), "var_rel_err": var.mean(axis=0)}

    out = Path(config.output)
    lines = ["round,cost_rel_err,var_rel_err\n"]
    lines += [f"{int(r)},{fmt(c)},{fmt(v)}\n" for r, c, v in zip(rounds, agg["cost_rel_err"], agg["var_rel_err"])]
    out.write_text("".join(lines))
    if config.per_instance:
        for i, rec in ok:
            rec.to_csv(out.with_name(f"{out.stem}.instance{i:03d}{out.suffix}"))
    write_manifest(
        config,
        {
            "instances_ok": ",".join(str(i) for i, _ in ok),
            "instances_failed": ";".join(f"{i}:{e}" for i, e in failed),
        },
    )
    agg["n_ok"] = len(ok)
    return agg


@dataclass
class FloorTracker:
    """Max of ``||w^t - 1 w*||`` over rounds ``t >= start``."""

    w_star: np.ndarray
    start: int
    floor: float = 0.0
    initial: float = math.nan

    def __call__(self, states) -> None:
        t = states[0].t
        if t == 0:
            self.initial = float(np.linalg.norm(np.array([s.w for s in states]) - self.w_star))
        if t >= self.start:
            err = float(np.linalg.norm(np.array([s.w for s in states]) - self.w_star))
            self.floor = max(self.floor, err)


def floor_window(period: int) -> int:
    return 5 * period


def sweep(config: ScenarioConfig, gammas, deltas) -> list[dict]:
    """
    Asymptotic floor of ``||w^t - 1 w*||`` (max over the last ``5 tau``
    rounds) for every ``(gamma, delta)`` pair on instance ``base_seed``.
    Writes a ``gamma,delta,floor`` CSV to ``config.output``.
    """
    gammas, deltas = list(gammas), list(deltas)
    if not gammas or not deltas:
        raise ValueError("need at least one gamma and one delta")
    rows = []
    for gamma, delta in itertools.product(gammas, deltas):
        cfg = config.replace(gamma=float(gamma), delta=float(delta))
        inst = build_instance(cfg, 0)
        if cfg.rounds < floor_window(inst.period):
            raise ValueError(f"rounds={cfg.rounds} shorter than the floor window {floor_window(inst.period)}")
        tracker = FloorTracker(inst.w_star, cfg.rounds - floor_window(inst.period) + 1)
        run_instance(cfg, 0, on_round=tracker)
        d_max = float(delta)
        rows.append(
            {
                "gamma": float(gamma),
                "delta": d_max,
                "floor": tracker.floor,
                "initial": tracker.initial,
                "dither_bound": d_max * math.sqrt(cfg.n_agents * math.ceil(cfg.dim / 2)),
            }
        )
    lines = ["gamma,delta,floor\n"] + [f"{fmt(r['gamma'])},{fmt(r['delta'])},{fmt(r['floor'])}\n" for r in rows]
    Path(config.output).write_text("".join(lines))
    write_manifest(config, {"gammas": gammas, "deltas": deltas})
    return rows


def dither_report(dither: DitherConfig) -> dict:
    """Period sums behind the estimator identities, for ``validate-dither``."""
    T = dither.period
    tab = np.array([dither.at(k) for k in range(1, T + 1)])
    return {
        "config": dither.to_text(),
        "period": T,
        "sum": tab.sum(axis=0),
        "sum_sq": (tab**2).sum(axis=0),
        "sum_cube": (tab**3).sum(axis=0),
    }
