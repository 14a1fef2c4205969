"""Time-stepping schemes for singular-kernel Volterra problems.

Both schemes carry the full history at every step: the drift is a
product-integration sum with exact kernel weights, so one step costs
O(n) and a trajectory O(N^2).  History sums are evaluated as contiguous
dot products against lag-indexed weight vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np
from scipy.optimize import brentq

from .brownian import BrownianPath
from .errors import NumericalError
from .kernels import weight_vector
from .problems import SvieProblem

__all__ = ["SchemeConfig", "Trajectory", "run_theta_em", "run_milstein", "run_reference"]

SCHEME_NAMES = ("theta_em", "milstein")

# Predicted fixed-point contraction factors above this go straight to the
# bracketed scalar solve: reaching 1e-12 from factor 0.75 already needs
# ~100 iterations.
_FP_FACTOR_CUTOFF = 0.75


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selection and step parameters.

    ``theta`` blends explicit (0) and implicit (1) drift in the one-step
    map and is ignored by the Milstein scheme; ``substeps`` is the
    Milstein inner sub-grid resolution per step and is ignored by the
    theta scheme.
    """

    scheme: str
    n_steps: int
    theta: float = 0.0
    substeps: int = 16
    fp_tol: float = 1e-12
    fp_max_iter: int = 100

    def __post_init__(self) -> None:
        if self.scheme not in SCHEME_NAMES:
            raise ValueError(f"scheme must be one of {SCHEME_NAMES}, got {self.scheme!r}")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.fp_tol <= 0.0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.fp_max_iter < 1:
            raise ValueError(f"fp_max_iter must be >= 1, got {self.fp_max_iter}")


@dataclass(frozen=True)
class Trajectory:
    """Numerical solution at the grid nodes: values[k] approximates X(nodes[k])."""

    nodes: np.ndarray
    values: np.ndarray

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def to_csv(self, file: Union[str, Path, IO[str]]) -> None:
        """Write ``t,x1..xd`` rows with 17 significant digits."""
        d = self.values.shape[1]
        lines = ["t," + ",".join(f"x{j + 1}" for j in range(d))]
        for t, row in zip(self.nodes, self.values):
            lines.append(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row))
        text = "\n".join(lines) + "\n"
        if hasattr(file, "write"):
            file.write(text)
        else:
            Path(file).write_text(text)


def _check_path(problem: SvieProblem, path: BrownianPath, resolution: int) -> None:
    if path.n_fine != resolution:
        raise ValueError(f"path resolution {path.n_fine} != required {resolution}")
    if path.dim_noise != problem.dim_noise:
        raise ValueError(f"path dim_noise {path.dim_noise} != problem dim_noise {problem.dim_noise}")
    if path.horizon != problem.horizon:
        raise ValueError(f"path horizon {path.horizon} != problem horizon {problem.horizon}")


def _check_finite(values: np.ndarray, scheme: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{scheme} trajectory exploded: non-finite values produced")


def _solve_implicit_step(terms, w0s, theta, g_vec, y_prev, avals_prev, config, dim):
    """Solve y = g + theta * sum_t w0_t * a_t(y) for the new node value.

    Fixed-point iteration from the explicit predictor; if the iteration
    diverges or its projected iteration count exceeds the cap, scalar
    problems fall back to a bracketed root solve and multi-dimensional
    ones report non-contraction.
    """
    coeffs = [theta * w0 for w0 in w0s]

    def apply_map(y):
        acc = g_vec.copy()
        for (kernel, fn), c in zip(terms, coeffs):
            acc += c * np.asarray(fn(y), dtype=np.float64)
        return acc

    y = g_vec + sum(c * av for c, av in zip(coeffs, avals_prev))  # explicit predictor
    prev_delta = math.inf
    for it in range(config.fp_max_iter):
        y_new = apply_map(y)
        if not np.all(np.isfinite(y_new)):
            break
        delta = float(np.max(np.abs(y_new - y)))
        y = y_new
        if delta <= config.fp_tol:
            return y
        if delta >= prev_delta and it >= 2:
            break  # not contracting
        if it == 10 and 0.0 < delta < prev_delta:
            ratio = delta / prev_delta
            if ratio > 0.0:
                remaining = math.log(config.fp_tol / delta) / math.log(ratio)
                if remaining > config.fp_max_iter - it:
                    break  # contracting too slowly to finish in budget
        prev_delta = delta

    if dim == 1:
        return _bracketed_scalar_solve(terms, coeffs, float(g_vec[0]), float(y_prev[0]), config)
    raise NumericalError(
        "implicit drift solve did not contract; theta * L * h**(1-alpha) / (1-alpha) "
        "is too large -- reduce the stepsize h or theta"
    )


def _bracketed_scalar_solve(terms, coeffs, g0, y_start, config):
    """Root of F(y) = y - g0 - theta * sum_t w0_t * a_t(y) nearest the predictor.

    F tends to +/-inf for Lipschitz drift, so an expanding bracket around
    the predictor always terminates; the solve is derivative-free.
    """

    def residual(y):
        yv = np.array([y])
        acc = y - g0
        for (kernel, fn), c in zip(terms, coeffs):
            acc -= c * float(np.asarray(fn(yv))[0])
        return acc

    f_start = residual(y_start)
    if f_start == 0.0:
        return np.array([y_start])
    delta = max(1.0, abs(y_start))
    for _ in range(64):
        lo, hi = y_start - delta, y_start + delta
        f_lo, f_hi = residual(lo), residual(hi)
        if np.isfinite(f_lo) and np.isfinite(f_hi) and f_lo * f_hi <= 0.0:
            root = brentq(residual, lo, hi, xtol=1e-14, maxiter=200)
            return np.array([root])
        delta *= 2.0
    raise NumericalError(
        "implicit drift solve failed: no sign change found for the residual; "
        "reduce the stepsize h or theta"
    )


def run_theta_em(problem: SvieProblem, config: SchemeConfig, path: BrownianPath) -> Trajectory:
    """One-parameter explicit/implicit scheme on the coarse grid.

    The update accumulates exact kernel weights against drift values at
    the nodes (``theta`` weighting the right endpoint of each cell) and
    left-point kernel values against the noise increments:

        Y_{n+1} = Y_0 + sum_i [theta * c_{n,i} a(Y_{i+1}) + (1-theta) * c_{n,i} a(Y_i)]
                + sum_i (t_{n+1} - t_i)**(-beta) b(Y_i) dW_i.

    For theta > 0 the i = n drift cell couples Y_{n+1} implicitly and is
    solved per step.
    """
    N = config.n_steps
    _check_path(problem, path, N)
    d, m = problem.dim_state, problem.dim_noise
    h = problem.horizon / N
    theta = config.theta
    terms = problem.drift_terms

    # reversed lag weights: wr[N-1-n : N] aligns lag n-i with node index i
    wrs = [np.ascontiguousarray(weight_vector(k, h, N)[::-1]) for k, _ in terms]
    w0s = [float(wr[-1]) for wr in wrs]

    has_noise = problem.diffusion is not None
    if has_noise:
        kb = problem.diffusion_kernel
        lags = np.arange(N, dtype=np.float64)
        dvec = kb.scale * np.power(h * (lags + 1.0), -kb.effective_exponent)
        dvr = np.ascontiguousarray(dvec[::-1])
        dWT = np.ascontiguousarray(path.increments.T)
        bw = np.empty((N, d))

    hint_factor = None
    if theta > 0.0 and problem.lipschitz_hint is not None:
        hint_factor = theta * problem.lipschitz_hint * sum(w0s)

    y0 = problem.realize_initial(path.seed, path.path_index)
    values = np.empty((N + 1, d))
    values[0] = y0
    avals = [np.empty((N, d)) for _ in terms]

    for n in range(N):
        yn = values[n]
        for av, (kernel, fn) in zip(avals, terms):
            av[n] = fn(yn)
        if has_noise:
            bw[n] = np.asarray(problem.diffusion(yn), dtype=np.float64) @ dWT[n]

        g_vec = y0.astype(np.float64, copy=True)
        for av, wr in zip(avals, wrs):
            if theta != 1.0:
                g_vec += (1.0 - theta) * (wr[N - 1 - n :] @ av[: n + 1])
            if theta != 0.0 and n >= 1:
                g_vec += theta * (wr[N - 1 - n : N - 1] @ av[1 : n + 1])
        if has_noise:
            g_vec += dvr[N - 1 - n :] @ bw[: n + 1]

        if theta == 0.0:
            values[n + 1] = g_vec
        elif hint_factor is not None and hint_factor >= _FP_FACTOR_CUTOFF and d == 1:
            coeffs = [theta * w0 for w0 in w0s]
            values[n + 1] = _bracketed_scalar_solve(terms, coeffs, float(g_vec[0]), float(yn[0]), config)
        else:
            values[n + 1] = _solve_implicit_step(
                terms, w0s, theta, g_vec, yn, [av[n] for av in avals], config, d
            )

    _check_finite(values, "theta_em")
    nodes = np.linspace(0.0, problem.horizon, N + 1)
    return Trajectory(nodes=nodes, values=values)


def run_milstein(problem: SvieProblem, config: SchemeConfig, path: BrownianPath) -> Trajectory:
    """First-order scheme with iterated-integral corrections (scalar state).

    Per step the update adds, on top of the explicit product-integration
    drift, three noise contributions assembled on a K-fold sub-grid of
    each step, all weighted by the exact sub-cell average of
    ``(t_{n+1} - s)**(-beta)``:

      * the main term ``b(Z_i) dW`` over each sub-cell;
      * a history term ``b'(Z_i) * V_i(s_j) dW`` where ``V_i`` integrates
        the kernel-difference ``(s - r)**(-beta) - (t_i - r)**(-beta)``
        against the past noise, frozen coefficients per cell;
      * a local term ``b'(Z_i) b(Z_i) * [P_{i,j} dW + kbar * (dW^2 - h_sub)/2]``
        where ``P`` is the sub-grid kernel integral from the step start and
        the second piece is the within-cell quadratic-variation part with
        the kernel averaged exactly over the triangle ``r < s`` in the cell.

    With a flat diffusion kernel the history term vanishes identically and
    the local term reduces, for every K, to the classical correction
    ``b'(Z) b(Z) (dW^2 - h)/2``.

    Requires ``dim_state == dim_noise == 1``, a diffusion Jacobian, and a
    path at resolution ``n_steps * substeps``.
    """
    N, K = config.n_steps, config.substeps
    _check_path(problem, path, N * K)
    if problem.dim_state != 1 or problem.dim_noise != 1:
        raise ValueError("the Milstein scheme supports scalar state and noise only")
    if problem.diffusion is None or problem.diffusion_jacobian is None:
        raise ValueError("the Milstein scheme requires diffusion and diffusion_jacobian")

    NK = N * K
    h = problem.horizon / N
    h_sub = problem.horizon / NK
    terms = problem.drift_terms
    wrs = [np.ascontiguousarray(weight_vector(k, h, N)[::-1]) for k, _ in terms]

    kb = problem.diffusion_kernel
    beta = kb.effective_exponent
    # g[lag]: exact mean of the kernel over a sub-cell `lag` sub-cells
    # before the evaluation point; finite even at lag 0.
    g = weight_vector(kb, h_sub, NK) / h_sub
    gr = np.ascontiguousarray(g[::-1])
    glocal = np.zeros((K, K))
    for j in range(1, K):
        glocal[j, :j] = g[j - 1 :: -1]
    # triangle-averaged kernel for the within-cell quadratic-variation term
    ktri = 2.0 * kb.scale * h_sub ** (-beta) / ((1.0 - beta) * (2.0 - beta))

    dW = np.ascontiguousarray(path.increments[0])
    x0 = problem.realize_initial(path.seed, path.path_index)
    values = np.empty(N + 1)
    values[0] = x0[0]
    avals = [np.empty(N) for _ in terms]
    bf = np.zeros(NK)  # b(Z_i) * dW on the fine grid
    bfr = np.zeros(NK)  # bf reversed, filled back to front
    cf = np.zeros(NK)  # bf plus correction loads

    state = np.empty(1)
    for i in range(N):
        state[0] = values[i]
        for av, (kernel, fn) in zip(avals, terms):
            av[i] = float(np.asarray(fn(state))[0])
        b_i = float(np.asarray(problem.diffusion(state))[0, 0])
        bp_i = float(np.asarray(problem.diffusion_jacobian(state))[0, 0, 0])

        lo, hi = i * K, (i + 1) * K
        dwi = dW[lo:hi]
        if i > 0:
            # V[j] = sum over past sub-cells of the averaged kernel
            # difference times b*dW; correlate slides the offset j.
            s = np.correlate(g[: lo + K - 1], bfr[NK - lo :], mode="valid")
            v = s - s[0]
        else:
            v = np.zeros(K)
        p = glocal @ dwi
        corr = bp_i * ((v + b_i * p) * dwi + (0.5 * b_i * ktri) * (dwi * dwi - h_sub))
        main = b_i * dwi
        bf[lo:hi] = main
        bfr[NK - hi : NK - lo] = main[::-1]
        cf[lo:hi] = main + corr

        z_next = values[0]
        for av, wr in zip(avals, wrs):
            z_next += wr[N - 1 - i :] @ av[: i + 1]
        z_next += gr[NK - hi :] @ cf[:hi]
        values[i + 1] = z_next

    _check_finite(values, "milstein")
    nodes = np.linspace(0.0, problem.horizon, N + 1)
    return Trajectory(nodes=nodes, values=values.reshape(-1, 1))


def run_reference(problem: SvieProblem, n_fine: int, path: BrownianPath) -> Trajectory:
    """Fine-grid explicit run used as the 'exact' solution in studies."""
    config = SchemeConfig(scheme="theta_em", theta=0.0, n_steps=n_fine)
    return run_theta_em(problem, config, path)
