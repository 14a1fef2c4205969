"""Power-law singular kernels with exact closed-form integration.

The kernel family is ``k(t, s) = scale * (t - s)**(-exponent)`` for
``s < t``.  Every consumer integrates the kernel against piecewise-constant
data, so this module exposes exact sub-interval integrals rather than
pointwise values: the antiderivative form stays finite even when the
integration window touches the singular endpoint ``s -> t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularKernel",
    "segment_integral",
    "weight_vector",
    "weight_matrix",
    "difference_integral",
]

# Exponents within this distance of 0 use the exact constant-kernel branch,
# avoiding 0**0-style cancellation in the antiderivative.
FLAT_EXPONENT_TOL = 1e-12


@dataclass(frozen=True)
class SingularKernel:
    """Power-law kernel ``scale * (t - s)**(-exponent)``.

    ``exponent`` must lie in [0, 1) so the kernel is integrable up to the
    singular endpoint.  A kernel bound to a diffusion role additionally
    needs ``exponent < 1/2``; that check lives with the consumer because
    the kernel itself is role-agnostic.
    """

    exponent: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.exponent < 1.0):
            raise ValueError(
                f"kernel exponent must lie in [0, 1), got {self.exponent}"
            )
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"kernel scale must be positive and finite, got {self.scale}")

    @property
    def is_flat(self) -> bool:
        """True when the exponent is numerically zero (constant kernel)."""
        return self.exponent < FLAT_EXPONENT_TOL

    @property
    def effective_exponent(self) -> float:
        """Exponent with the near-zero band snapped to an exact 0.0."""
        return 0.0 if self.is_flat else self.exponent


def segment_integral(kernel: SingularKernel, t_eval: float, s_lo: float, s_hi: float) -> float:
    """Exact ``int_{s_lo}^{s_hi} scale * (t_eval - s)**(-exponent) ds``.

    Requires ``s_lo <= s_hi <= t_eval``.  The value is finite even when
    ``s_hi == t_eval`` because ``1 - exponent > 0``.
    """
    if s_lo > s_hi:
        raise ValueError(f"segment bounds out of order: s_lo={s_lo} > s_hi={s_hi}")
    if s_hi > t_eval:
        raise ValueError(f"segment must end at or before t_eval: s_hi={s_hi} > t_eval={t_eval}")
    g = kernel.effective_exponent
    if g == 0.0:
        return kernel.scale * (s_hi - s_lo)
    q = 1.0 - g
    return kernel.scale * ((t_eval - s_lo) ** q - (t_eval - s_hi) ** q) / q


def weight_vector(kernel: SingularKernel, h: float, n_steps: int) -> np.ndarray:
    """Drift weights stored by lag.

    ``weight_vector(k, h, N)[n - i]`` equals
    ``segment_integral(k, t_{n+1}, t_i, t_{i+1})`` on the uniform grid
    ``t_j = j*h``: the weight depends on ``n - i`` only, so a length-N
    vector replaces the dense O(N^2) table.
    """
    if h <= 0.0:
        raise ValueError(f"stepsize must be positive, got {h}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    lags = np.arange(n_steps, dtype=np.float64)
    g = kernel.effective_exponent
    if g == 0.0:
        return np.full(n_steps, kernel.scale * h)
    q = 1.0 - g
    return kernel.scale * (h**q) * ((lags + 1.0) ** q - lags**q) / q


def weight_matrix(kernel: SingularKernel, h: float, n_steps: int) -> np.ndarray:
    """Dense weight table ``c[n, i] = segment_integral(k, t_{n+1}, t_i, t_{i+1})``.

    Entries with ``i > n`` are zero.  This materializes the stationary
    vector from :func:`weight_vector`; prefer the vector form anywhere
    memory matters.
    """
    w = weight_vector(kernel, h, n_steps)
    c = np.zeros((n_steps, n_steps))
    for n in range(n_steps):
        c[n, : n + 1] = w[: n + 1][::-1]
    return c


def difference_integral(
    kernel: SingularKernel, s: float, t_anchor: float, r_lo: float, r_hi: float
) -> float:
    """Exact ``int_{r_lo}^{r_hi} [k(s, r) - k(t_anchor, r)] dr``.

    Requires ``r_lo <= r_hi <= t_anchor <= s``.  Non-positive for positive
    exponents (the nearer anchor dominates) and identically zero both for
    flat kernels and for ``s == t_anchor``.
    """
    if t_anchor > s:
        raise ValueError(f"anchor must not exceed evaluation time: {t_anchor} > {s}")
    if r_hi > t_anchor:
        raise ValueError(f"window must end at or before the anchor: r_hi={r_hi} > {t_anchor}")
    if kernel.is_flat or s == t_anchor:
        if r_lo > r_hi:
            raise ValueError(f"window bounds out of order: r_lo={r_lo} > r_hi={r_hi}")
        return 0.0
    return segment_integral(kernel, s, r_lo, r_hi) - segment_integral(
        kernel, t_anchor, r_lo, r_hi
    )
