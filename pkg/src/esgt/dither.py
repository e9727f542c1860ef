"""
Sinusoidal dither signals with integer periods.

Components come in sine/cosine pairs: odd component ``p`` (1-based) runs at
period ``tau_p`` with phase ``phi0``; the following even component shares the
period and is shifted by ``pi/2``. Frequencies are kept as integer periods so
every admissibility check runs in exact rational arithmetic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from itertools import combinations_with_replacement

import numpy as np

from .errors import DuplicateFrequency, EmptyDimension, PeriodOverflow, PeriodTooShort, SumCollision

MIN_PERIOD = 3
MAX_COMMON_PERIOD = 2**63 - 1


def _sum_collision(periods) -> tuple[int, int, int] | None:
    """
    Return an offending ``(tau_p, tau_h, tau_l)`` triple or None.

    With cycle frequencies ``f = 1/tau`` a triple collides when
    ``f_p + f_h == f_l`` or ``f_p + f_h + f_l == 0`` modulo 1 (``p == h``
    allowed). Either makes a cubic product of dither components have nonzero
    period mean, which breaks the third-order cancellation in the estimator.
    """
    freqs = sorted({Fraction(1, t) for t in periods}, reverse=True)
    for fp, fh in combinations_with_replacement(freqs, 2):
        for fl in freqs:
            if (fp + fh - fl) % 1 == 0 or (fp + fh + fl) % 1 == 0:
                return fp.denominator, fh.denominator, fl.denominator
    return None


def check_odd_periods(odd_periods) -> None:
    for t in odd_periods:
        if int(t) != t:
            raise ValueError(f"period {t} is not an integer")
        if t < MIN_PERIOD:
            raise PeriodTooShort(f"period {t} must be >= {MIN_PERIOD}")
    if len(set(odd_periods)) != len(odd_periods):
        raise DuplicateFrequency(f"odd-component periods must be distinct: {list(odd_periods)}")
    hit = _sum_collision(odd_periods)
    if hit is not None:
        p, h, l = hit
        raise SumCollision(f"frequency collision 1/{p} + 1/{h} vs 1/{l} (mod 1)")


@dataclass(frozen=True)
class DitherConfig:
    dim: int
    periods: tuple[int, ...]  # per component, length dim
    phases: tuple[float, ...]  # per component, radians
    delta: float
    phi0: float = 0.0

    @property
    def odd_periods(self) -> tuple[int, ...]:
        return self.periods[::2]

    @property
    def frequencies(self) -> np.ndarray:
        return 2 * np.pi / np.asarray(self.periods, dtype=float)

    @cached_property
    def period(self) -> int:
        """Agent period: lcm of the component periods."""
        return math.lcm(*self.periods)

    def sample(self, t: int) -> np.ndarray:
        """Unit-amplitude dither vector at integer time ``t``."""
        out = np.empty(self.dim)
        for p, (tau, phi) in enumerate(zip(self.periods, self.phases)):
            # integer reduction first so large t loses no precision
            out[p] = math.sin(2 * math.pi * (int(t) % tau) / tau + phi)
        return out

    @cached_property
    def table(self) -> np.ndarray:
        """``sample(k)`` for ``k = 0..period-1``; read-only."""
        tab = np.array([self.sample(k) for k in range(self.period)])
        tab.setflags(write=False)
        return tab

    def at(self, t: int) -> np.ndarray:
        """Same values as :meth:`sample`, served from the one-period table."""
        return self.table[int(t) % self.period]

    def with_delta(self, delta: float) -> "DitherConfig":
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta}")
        return replace(self, delta=float(delta))

    def to_text(self) -> str:
        odd = ",".join(str(t) for t in self.odd_periods)
        return f"{self.dim}, {self.delta!r}, {self.phi0!r}, periods=[{odd}]"

    @classmethod
    def from_text(cls, text: str) -> "DitherConfig":
        m = re.fullmatch(r"\s*(\d+)\s*,\s*([^,]+?)\s*,\s*([^,]+?)\s*,\s*periods=\[([\d,\s]*)\]\s*", text)
        if m is None:
            raise ValueError(f"cannot parse dither config: {text!r}")
        periods = [int(v) for v in m.group(4).split(",") if v.strip()]
        return design_dither(int(m.group(1)), periods, float(m.group(3)), float(m.group(2)))


def design_dither(dim: int, odd_periods, phi0: float = 0.0, delta: float = 0.1) -> DitherConfig:
    """
    Build a paired sine/cosine dither from one period per odd component.

    ``odd_periods`` needs ``ceil(dim/2)`` distinct integers, each at least 3.
    """
    if dim < 1:
        raise EmptyDimension("dither dimension must be >= 1")
    odd_periods = [int(t) if float(t).is_integer() else t for t in odd_periods]
    need = (dim + 1) // 2
    if len(odd_periods) != need:
        raise ValueError(f"dim={dim} needs {need} odd-component periods, got {len(odd_periods)}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    check_odd_periods(odd_periods)
    periods, phases = [], []
    for p in range(dim):
        tau = odd_periods[p // 2]
        periods.append(int(tau))
        phases.append(float(phi0) if p % 2 == 0 else float(phi0) + math.pi / 2)
    return DitherConfig(dim, tuple(periods), tuple(phases), float(delta), float(phi0))


def paper_recipe_periods(dim: int, tau0: int = 3, tau0i: int = 2) -> list[int]:
    """
    Integer odd-component periods from the geometric recipe
    ``tau0 * tau0i ** (j / k)``, ``j = 1..k``, ``k = ceil(dim/2)``.

    Each raw period is rounded to the nearest integer (at least 3), then bumped
    by +1 until it is distinct from and collision-free with the earlier ones.
    """
    if tau0 < 3 or tau0i < 2:
        raise ValueError("need tau0 >= 3 and tau0i >= 2")
    if dim < 1:
        raise EmptyDimension("dither dimension must be >= 1")
    k = (dim + 1) // 2
    chosen: list[int] = []
    for j in range(1, k + 1):
        cand = max(MIN_PERIOD, round(tau0 * tau0i ** (j / k)))
        while cand in chosen or _sum_collision(chosen + [cand]) is not None:
            cand += 1
        chosen.append(cand)
    return chosen


def common_period(configs, limit: int = MAX_COMMON_PERIOD) -> int:
    """lcm of the agents' periods; raises PeriodOverflow past ``limit`` (int64 by default)."""
    configs = list(configs)
    if not configs:
        raise ValueError("need at least one dither config")
    tau = 1
    for c in configs:
        tau = math.lcm(tau, c.period)
        if tau > limit:
            raise PeriodOverflow(f"common period exceeds {limit}; choose periods with more shared factors")
    return tau
