"""Problem instances: coefficients, kernels, presets, and validation.

A problem couples autonomous drift and diffusion coefficients with one
singular kernel per integral term.  Coefficients are plain callables on
``(d,)`` arrays: drift maps to ``(d,)``, diffusion to ``(d, m)``, and the
diffusion Jacobian (needed only by the Milstein scheme) to ``(d, m, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .brownian import BrownianPath, partial_sums
from .errors import NumericalError
from .kernels import SingularKernel, weight_vector
from .special import gamma_fn

__all__ = [
    "SvieProblem",
    "ValidationReport",
    "PicardResult",
    "preset",
    "preset_names",
    "validate",
    "picard_reference_solution",
]

Coefficient = Callable[[np.ndarray], np.ndarray]

# Offsets the Philox key of the initial-condition stream away from the
# Brownian increment stream of the same (seed, path_index).
_INITIAL_STREAM_SALT = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class SvieProblem:
    """State-dependent Volterra problem over [0, horizon].

    The state at time t accumulates ``drift_kernel``-weighted drift and
    ``diffusion_kernel``-weighted noise over the whole past.  ``diffusion``
    may be None for purely deterministic problems.  ``extra_drift_terms``
    carries additional (kernel, coefficient) drift pairs; schemes iterate
    the full list, which is how mixed regular/singular drift formulations
    are expressed.
    """

    drift: Coefficient
    diffusion: Optional[Coefficient]
    drift_kernel: SingularKernel
    diffusion_kernel: SingularKernel
    initial: Union[np.ndarray, Callable[[np.random.Generator], np.ndarray]]
    dim_state: int = 1
    dim_noise: int = 1
    diffusion_jacobian: Optional[Coefficient] = None
    horizon: float = 1.0
    lipschitz_hint: Optional[float] = None
    extra_drift_terms: Tuple[Tuple[SingularKernel, Coefficient], ...] = ()
    analytic_terminal: Optional[Callable[[BrownianPath], np.ndarray]] = None
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ValueError("dim_state and dim_noise must be >= 1")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.diffusion_kernel.exponent >= 0.5:
            raise ValueError(
                "diffusion kernel exponent must satisfy beta < 1/2 for the noise "
                f"integral to be square-integrable, got {self.diffusion_kernel.exponent}"
            )
        if self.lipschitz_hint is not None and self.lipschitz_hint <= 0.0:
            raise ValueError("lipschitz_hint must be positive when given")
        if not callable(self.initial):
            arr = np.atleast_1d(np.asarray(self.initial, dtype=np.float64))
            if arr.shape != (self.dim_state,):
                raise ValueError(
                    f"initial condition shape {arr.shape} != (dim_state,)=({self.dim_state},)"
                )
            object.__setattr__(self, "initial", arr)

    @property
    def drift_terms(self) -> Tuple[Tuple[SingularKernel, Coefficient], ...]:
        return ((self.drift_kernel, self.drift),) + self.extra_drift_terms

    def realize_initial(self, seed: int, path_index: int) -> np.ndarray:
        """Initial state for one replicate, deterministic in (seed, path_index)."""
        if callable(self.initial):
            key = np.array([seed ^ _INITIAL_STREAM_SALT, path_index], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            x0 = np.atleast_1d(np.asarray(self.initial(rng), dtype=np.float64))
            if x0.shape != (self.dim_state,):
                raise ValueError(f"initial sampler returned shape {x0.shape}")
            return x0
        return self.initial.copy()


# --- preset coefficient functions (module level so problems pickle) ---


def _sin_drift(x):
    return np.sin(x)


def _cos_drift(x):
    return np.cos(x)


def _shifted_cos_diffusion(x):
    return (0.5 * (np.cos(x) + 2.0)).reshape(1, 1)


def _shifted_cos_diffusion_jac(x):
    return (-0.5 * np.sin(x)).reshape(1, 1, 1)


def _linear_drift(mu, x):
    return mu * x


def _linear_diffusion(sigma, x):
    return (sigma * x).reshape(1, 1)


def _linear_diffusion_jac(sigma, x):
    return np.full((1, 1, 1), sigma)


def _gbm_terminal(mu, sigma, x0, path):
    w_t = partial_sums(path)[0, -1]
    t = path.horizon
    return np.array([x0 * math.exp((mu - 0.5 * sigma**2) * t + sigma * w_t)])


def _build_paper_example(alpha: float = 0.3, beta: float = 0.1, x0: float = 1.0) -> SvieProblem:
    return SvieProblem(
        drift=_sin_drift,
        diffusion=_shifted_cos_diffusion,
        diffusion_jacobian=_shifted_cos_diffusion_jac,
        drift_kernel=SingularKernel(alpha),
        diffusion_kernel=SingularKernel(beta),
        initial=np.array([x0]),
        lipschitz_hint=1.0,
        name="paper_example",
    )


def _build_gbm(mu: float = 0.0, sigma: float = 1.0, x0: float = 1.0) -> SvieProblem:
    return SvieProblem(
        drift=partial(_linear_drift, mu),
        diffusion=partial(_linear_diffusion, sigma),
        diffusion_jacobian=partial(_linear_diffusion_jac, sigma),
        drift_kernel=SingularKernel(0.0),
        diffusion_kernel=SingularKernel(0.0),
        initial=np.array([x0]),
        lipschitz_hint=max(abs(mu), abs(sigma), 1e-12),
        analytic_terminal=partial(_gbm_terminal, mu, sigma, x0),
        name="gbm",
    )


def _build_caputo(alpha_c: float = 0.8, x0: float = 1.0) -> SvieProblem:
    """Fractional-derivative problem of order ``alpha_c`` rewritten in
    integral form: both kernels get exponent ``1 - alpha_c`` and scale
    ``1 / Gamma(alpha_c)``.  Coefficients are the bounded sin/cos pair."""
    if not (0.5 < alpha_c <= 1.0):
        raise ValueError(
            "caputo order must satisfy 1/2 < alpha_c <= 1: the diffusion kernel "
            f"exponent 1 - alpha_c must stay below 1/2, got alpha_c={alpha_c}"
        )
    scale = 1.0 / gamma_fn(alpha_c)
    exponent = 1.0 - alpha_c
    return SvieProblem(
        drift=_sin_drift,
        diffusion=_shifted_cos_diffusion,
        diffusion_jacobian=_shifted_cos_diffusion_jac,
        drift_kernel=SingularKernel(exponent, scale),
        diffusion_kernel=SingularKernel(exponent, scale),
        initial=np.array([x0]),
        lipschitz_hint=scale,
        name="caputo",
    )


def _build_itodoob(alpha: float = 0.5, x0: float = 1.0) -> SvieProblem:
    """Regular drift + regular noise plus an extra singular drift term
    ``alpha * (t - s)**(alpha - 1)`` applied to a second coefficient."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"itodoob order must lie in (0, 1), got {alpha}")
    singular = SingularKernel(1.0 - alpha, scale=alpha)
    return SvieProblem(
        drift=_sin_drift,
        diffusion=_shifted_cos_diffusion,
        diffusion_jacobian=_shifted_cos_diffusion_jac,
        drift_kernel=SingularKernel(0.0),
        diffusion_kernel=SingularKernel(0.0),
        initial=np.array([x0]),
        lipschitz_hint=1.0,
        extra_drift_terms=((singular, _cos_drift),),
        name="itodoob",
    )


_PRESETS = {
    "paper_example": _build_paper_example,
    "gbm": _build_gbm,
    "caputo": _build_caputo,
    "itodoob": _build_itodoob,
}


def preset_names() -> Tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset(name: str, **params) -> SvieProblem:
    """Build a named problem; unknown names or parameters raise ValueError."""
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(preset_names())}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for preset {name!r}: {exc}") from None


@dataclass(frozen=True)
class ValidationReport:
    """Empirical Lipschitz and linear-growth probe results."""

    drift_lipschitz: float
    diffusion_lipschitz: float
    drift_growth: float
    diffusion_growth: float
    lipschitz_hint: Optional[float]
    hint_violated: bool
    n_probes: int
    seed: int


def validate(
    problem: SvieProblem,
    sample_box: Tuple,
    n_probes: int,
    seed: int,
) -> ValidationReport:
    """Probe the coefficients over random point pairs in a box.

    ``sample_box`` is ``(lo, hi)`` with scalars or length-d vectors.
    Reports the largest observed difference quotients and growth ratios;
    this is diagnostic only, schemes never require it.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    lo = np.broadcast_to(np.asarray(sample_box[0], dtype=np.float64), (problem.dim_state,))
    hi = np.broadcast_to(np.asarray(sample_box[1], dtype=np.float64), (problem.dim_state,))
    if np.any(hi <= lo):
        raise ValueError("sample box must have positive extent in every coordinate")
    rng = np.random.default_rng(seed)
    xs = lo + (hi - lo) * rng.random((n_probes, problem.dim_state))
    ys = lo + (hi - lo) * rng.random((n_probes, problem.dim_state))

    lip_a = lip_b = growth_a = growth_b = 0.0
    for x, y in zip(xs, ys):
        dist = float(np.linalg.norm(x - y))
        ax, ay = problem.drift(x), problem.drift(y)
        growth_a = max(
            growth_a,
            float(np.linalg.norm(ax)) / (1.0 + float(np.linalg.norm(x))),
            float(np.linalg.norm(ay)) / (1.0 + float(np.linalg.norm(y))),
        )
        if dist > 0.0:
            lip_a = max(lip_a, float(np.linalg.norm(ax - ay)) / dist)
        if problem.diffusion is not None:
            bx, by = problem.diffusion(x), problem.diffusion(y)
            growth_b = max(
                growth_b,
                float(np.linalg.norm(bx)) / (1.0 + float(np.linalg.norm(x))),
                float(np.linalg.norm(by)) / (1.0 + float(np.linalg.norm(y))),
            )
            if dist > 0.0:
                lip_b = max(lip_b, float(np.linalg.norm(bx - by)) / dist)

    hint = problem.lipschitz_hint
    violated = hint is not None and max(lip_a, lip_b) > hint * (1.0 + 1e-9)
    return ValidationReport(
        drift_lipschitz=lip_a,
        diffusion_lipschitz=lip_b,
        drift_growth=growth_a,
        diffusion_growth=growth_b,
        lipschitz_hint=hint,
        hint_violated=violated,
        n_probes=n_probes,
        seed=seed,
    )


@dataclass(frozen=True)
class PicardResult:
    """Fixed-point solve output: the grid trajectory and iterations used."""

    nodes: np.ndarray
    values: np.ndarray
    iterations: int

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]


def picard_reference_solution(
    problem: SvieProblem,
    n_steps: int,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> PicardResult:
    """Deterministic fixed-point solution of the drift-only problem.

    Iterates the integral map with exact kernel weights against a
    piecewise-constant (left-point) iterate until successive iterates
    differ by at most ``tol`` in the sup norm.  Serves as an oracle that
    shares no time-stepping code with the stochastic schemes.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if callable(problem.initial):
        raise ValueError("the deterministic oracle needs a constant initial condition")
    x0 = problem.initial
    if problem.diffusion is not None:
        probe = np.asarray(problem.diffusion(x0), dtype=np.float64)
        if np.any(probe != 0.0):
            raise ValueError("picard_reference_solution requires identically zero diffusion")

    h = problem.horizon / n_steps
    d = problem.dim_state
    weights = [weight_vector(k, h, n_steps) for k, _ in problem.drift_terms]
    lam = np.tile(x0, (n_steps + 1, 1))
    for iteration in range(1, max_iter + 1):
        new = np.tile(x0, (n_steps + 1, 1))
        for (kernel, fn), w in zip(problem.drift_terms, weights):
            avals = np.empty((n_steps, d))
            for i in range(n_steps):
                avals[i] = fn(lam[i])
            for j in range(d):
                # new[n] += sum_{i < n} w[n-1-i] * a(lam[i]): a causal convolution
                new[1:, j] += np.convolve(avals[:, j], w)[:n_steps]
        diff = float(np.max(np.abs(new - lam)))
        lam = new
        if diff <= tol:
            nodes = np.linspace(0.0, problem.horizon, n_steps + 1)
            return PicardResult(nodes=nodes, values=lam, iterations=iteration)
    raise NumericalError(
        f"Picard iteration did not reach tol={tol} within {max_iter} iterations; "
        "the grid may be too coarse or the drift not Lipschitz on the iterate range"
    )
