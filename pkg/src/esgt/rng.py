"""Seeded random streams.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's Philox-4x64 counter-based bit generator. Given the same seed, draws are
bit-reproducible across runs and platforms (numpy guarantees stream stability
for ``Generator.random``). Gaussian variates are produced by Box-Muller on top
of the uniform stream rather than ``Generator.normal`` (ziggurat) so the
mapping from uniforms to normals is explicit.
"""

from __future__ import annotations

import numpy as np

SeedLike = int | np.random.SeedSequence


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(*key: int) -> int:
    """Collapse an integer key tuple, e.g. ``(base_seed, instance, stream)``, into one 64-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def uniform(rng: np.random.Generator, low: float, high: float, size=None):
    return low + (high - low) * rng.random(size)


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normal samples from pairs of uniforms."""
    m = (size + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)])
    return z[:size]
