"""Deterministic, counter-based Brownian increment generation.

Every path is keyed by ``(seed, path_index)`` through a Philox counter
generator, so replicate ``i`` of a Monte Carlo run is the same bit
pattern no matter how many workers produced it or in which order.
Gaussians come from the inverse normal CDF applied to one uniform per
draw; rejection samplers would consume a variable number of counters and
break replay.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
from scipy.special import ndtri

__all__ = ["BrownianPath", "generate", "coarsen", "partial_sums", "dump_path", "load_path"]

_HEADER = struct.Struct("<QQQQd")  # seed, path_index, n_fine, m, horizon

# 52-bit mantissa grid shifted half a cell off the endpoints: uniforms are
# exact dyadic rationals strictly inside (0, 1), so ndtri never sees 0 or 1.
_GRID = 2.0**-52
_HALF = 2.0**-53


@dataclass(frozen=True)
class BrownianPath:
    """Increments of an m-dimensional Wiener process on a uniform grid.

    ``increments[j, k]`` is the k-th increment of component j, each
    distributed N(0, horizon / n_fine).  ``coarsen_factor`` records how far
    the path has been block-summed away from the grid it was generated on:
    regenerating with ``(seed, path_index, n_fine * coarsen_factor, ...)``
    and coarsening again reproduces it bit for bit.
    """

    horizon: float
    n_fine: int
    dim_noise: int
    increments: np.ndarray
    seed: int
    path_index: int
    coarsen_factor: int = 1

    def __post_init__(self) -> None:
        if self.increments.shape != (self.dim_noise, self.n_fine):
            raise ValueError(
                f"increments shape {self.increments.shape} inconsistent with "
                f"(m={self.dim_noise}, n_fine={self.n_fine})"
            )

    @property
    def dt(self) -> float:
        return self.horizon / self.n_fine


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def generate(seed: int, path_index: int, n_fine: int, m: int, horizon: float = 1.0) -> BrownianPath:
    """Generate replicate ``path_index`` of the fine-grid increment array.

    ``n_fine`` must be a power of two so that every coarser dyadic grid is
    reachable by exact nested block sums.
    """
    if not _is_power_of_two(n_fine):
        raise ValueError(f"n_fine must be a power of two, got {n_fine}")
    if m < 1:
        raise ValueError(f"dim_noise must be >= 1, got {m}")
    if not (0 <= seed < 2**64 and 0 <= path_index < 2**64):
        raise ValueError("seed and path_index must fit in an unsigned 64-bit integer")
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    key = np.array([seed, path_index], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    raw = gen.integers(0, 2**64, size=(m, n_fine), dtype=np.uint64)
    u = (raw >> np.uint64(12)).astype(np.float64) * _GRID + _HALF
    z = ndtri(u) * np.sqrt(horizon / n_fine)
    return BrownianPath(
        horizon=horizon,
        n_fine=n_fine,
        dim_noise=m,
        increments=z,
        seed=seed,
        path_index=path_index,
    )


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Block-sum consecutive groups of ``factor`` increments.

    Power-of-two factors are reduced by repeated pairwise halving, which
    makes coarsening chains exact in floating point:
    ``coarsen(coarsen(p, 2), 2)`` is bitwise ``coarsen(p, 4)``.  Any odd
    residual factor is summed left to right.
    """
    if factor < 1 or path.n_fine % factor != 0:
        raise ValueError(f"factor {factor} does not divide n_fine={path.n_fine}")
    if factor == 1:
        return path
    x = path.increments
    f = factor
    while f % 2 == 0:
        x = x[:, 0::2] + x[:, 1::2]
        f //= 2
    if f > 1:
        blocks = x.reshape(path.dim_noise, -1, f)
        acc = blocks[:, :, 0].copy()
        for j in range(1, f):
            acc += blocks[:, :, j]
        x = acc
    return replace(
        path,
        n_fine=path.n_fine // factor,
        increments=x,
        coarsen_factor=path.coarsen_factor * factor,
    )


def partial_sums(path: BrownianPath) -> np.ndarray:
    """Cumulative values ``W(t_k)`` at the grid nodes, shape (m, n_fine + 1)."""
    out = np.zeros((path.dim_noise, path.n_fine + 1))
    np.cumsum(path.increments, axis=1, out=out[:, 1:])
    return out


def dump_path(path: BrownianPath, file: Union[str, Path, BinaryIO]) -> None:
    """Write a path as little-endian 64-bit fields.

    Header: seed, path_index, n_fine, m as u64 and horizon as f64; body:
    increments row-major as f64.  Intended for cross-implementation
    comparison of the exact bit patterns.
    """
    header = _HEADER.pack(path.seed, path.path_index, path.n_fine, path.dim_noise, path.horizon)
    body = np.ascontiguousarray(path.increments, dtype="<f8").tobytes()
    if hasattr(file, "write"):
        file.write(header)
        file.write(body)
    else:
        with open(file, "wb") as fh:
            fh.write(header)
            fh.write(body)


def load_path(file: Union[str, Path, BinaryIO]) -> BrownianPath:
    """Read a path written by :func:`dump_path`."""
    if hasattr(file, "read"):
        data = file.read()
    else:
        data = Path(file).read_bytes()
    seed, path_index, n_fine, m, horizon = _HEADER.unpack_from(data, 0)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != m * n_fine:
        raise ValueError(f"body holds {body.size} floats, expected {m * n_fine}")
    increments = body.reshape(m, n_fine).astype(np.float64)
    return BrownianPath(
        horizon=horizon,
        n_fine=int(n_fine),
        dim_noise=int(m),
        increments=increments,
        seed=int(seed),
        path_index=int(path_index),
    )
