"""Extremum-seeking gradient estimate from cost measurements over one dither period."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dither import DitherConfig
from .errors import DimensionMismatch, NoAnalyticGradient
from .problem import LocalCost


@dataclass(frozen=True)
class GradientEstimate:
    value: np.ndarray
    delta_used: float
    period_used: int


def es_gradient(cost: LocalCost, x, dither: DitherConfig, t0: int = 0, period: int | None = None) -> GradientEstimate:
    """
    Demodulated gradient estimate

        (2 / (delta * T)) * sum_{k=t0+1}^{t0+T} f(x + delta d(k)) d(k)

    with ``T`` the dither period (or ``period``, which must be a multiple of
    it). Each component is accumulated with ``math.fsum``.
    """
    x = np.asarray(x, dtype=float)
    if cost.dim != dither.dim or x.shape != (dither.dim,):
        raise DimensionMismatch(f"cost dim {cost.dim}, dither dim {dither.dim}, point shape {x.shape}")
    T = dither.period if period is None else int(period)
    if T % dither.period:
        raise ValueError(f"period {T} is not a multiple of the dither period {dither.period}")
    delta = dither.delta
    terms = []
    for k in range(t0 + 1, t0 + T + 1):
        d = dither.at(k)
        terms.append(cost(x + delta * d) * d)
    terms = np.array(terms)
    total = np.array([math.fsum(terms[:, p]) for p in range(dither.dim)])
    return GradientEstimate(2.0 / (delta * T) * total, delta, T)


def estimate_error_curve(cost: LocalCost, x, dither_template: DitherConfig, deltas) -> list[tuple[float, float]]:
    """``(delta, ||estimate - true gradient||)`` for each amplitude in ``deltas``."""
    if not cost.has_gradient:
        raise NoAnalyticGradient("error curve needs an analytic gradient")
    true = cost.grad(x)
    out = []
    for delta in deltas:
        est = es_gradient(cost, x, dither_template.with_delta(delta))
        out.append((float(delta), float(np.linalg.norm(est.value - true))))
    return out
