"""
Innovation laws and reproducible random streams.

A stream is keyed by (master_seed, stream_id). The generator behind it is a
PCG64 seeded from ``SeedSequence(master_seed, spawn_key=(stream_id,))``, so the
variates are a pure function of the key and distinct ids give independent
streams. Each replication owns its stream; nothing here is shared.
"""

import math
from typing import Dict, Optional

import numpy as np

from .models import NoiseFamily, NoiseSpec

UINT64_MASK = (1 << 64) - 1

STANDARD_GAUSSIAN = NoiseSpec(NoiseFamily.GAUSSIAN, 1.0)


class RngStream:
    """A deterministic random stream identified by (master_seed, stream_id)."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        """
        Initialize the stream.

        Args:
            master_seed: Experiment-wide seed (reduced to 64 bits)
            stream_id: Replication index (reduced to 64 bits)
        """
        self.master_seed = int(master_seed) & UINT64_MASK
        self.stream_id = int(stream_id) & UINT64_MASK
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        self._generator = np.random.Generator(np.random.PCG64(seq))

    @property
    def key(self) -> tuple:
        return (self.master_seed, self.stream_id)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


def draw_many(stream: RngStream, spec: NoiseSpec, size: int) -> np.ndarray:
    """
    Draw ``size`` innovations from the law described by ``spec``.

    Args:
        stream: Stream to advance
        spec: Innovation law
        size: Number of variates

    Returns:
        Array of shape (size,) with mean 0 and variance spec.sigma**2
    """
    if size < 0:
        raise ValueError(f"size must be non-negative, got {size}")
    gen = stream.generator
    sigma = spec.sigma
    if spec.family is NoiseFamily.DEGENERATE:
        return np.zeros(size)
    if spec.family is NoiseFamily.GAUSSIAN:
        return sigma * gen.standard_normal(size)
    if spec.family is NoiseFamily.LAPLACE:
        # Var(Laplace(b)) = 2 b^2
        return gen.laplace(0.0, sigma / math.sqrt(2.0), size)
    if spec.family is NoiseFamily.UNIFORM:
        # Var(U(-a, a)) = a^2 / 3
        half_width = sigma * math.sqrt(3.0)
        return gen.uniform(-half_width, half_width, size)
    raise ValueError(f"Unknown noise family: {spec.family}")


def draw(stream: RngStream, spec: NoiseSpec) -> float:
    """Draw a single innovation."""
    return float(draw_many(stream, spec, 1)[0])


def noise_spec_from_config(data: Optional[Dict]) -> NoiseSpec:
    """Build a NoiseSpec from the {family, sigma} config form; defaults to N(0, 1)."""
    if not data:
        return STANDARD_GAUSSIAN
    return NoiseSpec.from_dict(data)
