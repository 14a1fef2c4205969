"""Monte Carlo convergence studies, rate fitting, and reports.

A study runs one scheme across a list of stepsizes on shared Brownian
paths (coarse grids are exact block sums of the fine grid), measures the
strong terminal-time L^p error against a reference, and fits the
convergence rate by log-log least squares.  Replicates are independent,
keyed by path index, and reduced in index order, so results are
byte-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .brownian import coarsen, generate
from .errors import NumericalError
from .problems import SvieProblem, picard_reference_solution, preset
from .schemes import SchemeConfig, run_milstein, run_reference, run_theta_em

__all__ = [
    "ExperimentConfig",
    "ErrorReport",
    "HolderReport",
    "MomentReport",
    "TheoreticalRate",
    "strong_error",
    "strong_error_with_stderr",
    "fit_loglog",
    "theoretical_rate",
    "run_convergence_study",
    "holder_exponent_estimate",
    "moment_bound_check",
]

ORACLES = ("fine_reference", "analytic_gbm", "picard")

# Rate pass tolerances: Monte Carlo noise at desk-scale path counts.
RATE_TOLERANCE = {"theta_em": 0.15, "milstein": 0.2}


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a convergence study; JSON-serializable."""

    preset: str
    params: Dict[str, float] = field(default_factory=dict)
    scheme: str = "theta_em"
    theta: float = 0.0
    substeps: int = 16
    fp_tol: float = 1e-12
    fp_max_iter: int = 100
    stepsizes: Tuple[int, ...] = (128, 256, 512, 1024)
    n_fine: int = 4096
    n_paths: int = 500
    p_norm: float = 2.0
    seed: int = 0
    oracle: str = "fine_reference"
    out: Optional[str] = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "stepsizes", tuple(int(n) for n in self.stepsizes))
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        if self.p_norm < 1.0:
            raise ValueError("p_norm must be >= 1")
        if self.oracle not in ORACLES:
            raise ValueError(f"oracle must be one of {ORACLES}, got {self.oracle!r}")
        if len(self.stepsizes) < 2:
            raise ValueError("need at least two stepsizes to fit a rate")
        for n in self.stepsizes:
            if n < 1 or self.n_fine % n != 0:
                raise ValueError(f"every stepsize must divide n_fine={self.n_fine}, got {n}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["stepsizes"] = list(self.stepsizes)
        return d

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        data = dict(data)
        if "stepsizes" in data:
            data["stepsizes"] = tuple(data["stepsizes"])
        return cls(**data)


class TheoreticalRate(NamedTuple):
    """Fitted-rate target; ``log_correction`` marks the boundary case where
    the proven bound carries an extra sqrt(log(1/h)) factor."""

    rate: float
    log_correction: bool


def theoretical_rate(scheme: str, alpha: float, beta: float) -> TheoreticalRate:
    """Proven strong convergence rate for given kernel exponents.

    theta_em: min(1 - alpha, 1/2 - beta).  milstein: min(1 - alpha, 1 - 2*beta);
    at alpha == 1/2 the bound gains a sqrt(log(1/h)) factor on its
    h**(1-beta) branch, flagged via ``log_correction`` (the dominant power
    is unchanged because 1 - beta > min(1/2, 1 - 2*beta) for beta > 0).
    """
    if scheme == "theta_em":
        return TheoreticalRate(min(1.0 - alpha, 0.5 - beta), False)
    if scheme == "milstein":
        return TheoreticalRate(min(1.0 - alpha, 1.0 - 2.0 * beta), alpha == 0.5)
    raise ValueError(f"unknown scheme {scheme!r}")


def strong_error(exact: np.ndarray, approx: np.ndarray, p: float = 2.0) -> float:
    """Strong L^p distance ``(mean |exact_i - approx_i|^p)**(1/p)``.

    Inputs are per-replicate terminal values, shape (M,) or (M, d); the
    per-replicate distance is Euclidean.
    """
    exact = np.atleast_1d(np.asarray(exact, dtype=np.float64))
    approx = np.atleast_1d(np.asarray(approx, dtype=np.float64))
    if exact.shape != approx.shape:
        raise ValueError(f"shape mismatch: {exact.shape} vs {approx.shape}")
    if p < 1.0:
        raise ValueError("p must be >= 1")
    diff = exact - approx
    if diff.ndim == 1:
        dist = np.abs(diff)
    else:
        dist = np.linalg.norm(diff, axis=1)
    return float(np.mean(dist**p) ** (1.0 / p))


def strong_error_with_stderr(distances: np.ndarray, p: float) -> Tuple[float, float]:
    """Error and its delta-method standard error from per-path distances."""
    z = np.asarray(distances, dtype=np.float64) ** p
    m = float(z.mean())
    e = m ** (1.0 / p)
    if z.size < 2 or m == 0.0:
        return e, 0.0
    se_mean = float(z.std(ddof=1)) / math.sqrt(z.size)
    return e, se_mean * m ** (1.0 / p - 1.0) / p


def fit_loglog(h_values: Sequence[float], errors: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares slope, intercept, and R^2 of log(error) vs log(h)."""
    h = np.asarray(h_values, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if h.shape != e.shape or h.size < 2:
        raise ValueError("need matching arrays with at least two points")
    if np.any(e <= 0.0) or np.any(h <= 0.0):
        raise ValueError("log-log fit needs strictly positive h and errors")
    x, y = np.log(h), np.log(e)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - ybar)).sum()) / sxx
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    sst = float(((y - ybar) ** 2).sum())
    r2 = 1.0 if sst == 0.0 else 1.0 - float((resid**2).sum()) / sst
    return slope, intercept, r2


@dataclass(frozen=True)
class ErrorReport:
    """Per-stepsize errors plus the fitted and theoretical rates."""

    scheme: str
    theta: float
    stepsizes: Tuple[int, ...]
    h_values: Tuple[float, ...]
    errors: Tuple[float, ...]
    stderrs: Tuple[float, ...]
    rate: float
    intercept: float
    r_squared: float
    theory_rate: float
    log_correction: bool
    tolerance: float
    passed: bool
    seed: int
    n_paths: int
    p_norm: float

    def csv_text(self) -> str:
        lines = ["h,error,stderr"]
        for h, e, se in zip(self.h_values, self.errors, self.stderrs):
            lines.append(f"{h!r},{e!r},{se!r}")
        lines.append(
            f"# rate={self.rate!r} r2={self.r_squared!r} theory={self.theory_rate!r} "
            f"pass={self.passed} seed={self.seed}"
        )
        return "\n".join(lines) + "\n"

    def to_csv(self, file: Union[str, Path, IO[str]]) -> None:
        text = self.csv_text()
        if hasattr(file, "write"):
            file.write(text)
        else:
            Path(file).write_text(text)


def _scheme_resolution(cfg: ExperimentConfig, n_steps: int) -> int:
    return n_steps * cfg.substeps if cfg.scheme == "milstein" else n_steps


def _base_resolution(cfg: ExperimentConfig) -> int:
    needed = [_scheme_resolution(cfg, n) for n in cfg.stepsizes]
    if cfg.oracle == "fine_reference":
        needed.append(_scheme_resolution(cfg, cfg.n_fine))
    return math.lcm(*needed)


def _fine_reference(problem: SvieProblem, cfg: ExperimentConfig, path) -> np.ndarray:
    """Same-scheme solution at the reference resolution.

    The reference must out-converge the coarse runs it is compared
    against, so a Milstein study references a fine Milstein run (with the
    same sub-grid depth) while theta runs reference the explicit scheme.
    """
    if cfg.scheme == "milstein":
        sub = coarsen(path, path.n_fine // (cfg.n_fine * cfg.substeps))
        ref_cfg = SchemeConfig(
            scheme="milstein",
            n_steps=cfg.n_fine,
            substeps=cfg.substeps,
            fp_tol=cfg.fp_tol,
            fp_max_iter=cfg.fp_max_iter,
        )
        return run_milstein(problem, ref_cfg, sub).terminal
    fine = coarsen(path, path.n_fine // cfg.n_fine)
    return run_reference(problem, cfg.n_fine, fine).terminal


def _run_one(problem: SvieProblem, cfg: ExperimentConfig, n_steps: int, path):
    sub = coarsen(path, path.n_fine // _scheme_resolution(cfg, n_steps))
    scheme_cfg = SchemeConfig(
        scheme=cfg.scheme,
        n_steps=n_steps,
        theta=cfg.theta,
        substeps=cfg.substeps,
        fp_tol=cfg.fp_tol,
        fp_max_iter=cfg.fp_max_iter,
    )
    if cfg.scheme == "milstein":
        return run_milstein(problem, scheme_cfg, sub).terminal
    return run_theta_em(problem, scheme_cfg, sub).terminal


def _study_chunk(cfg: ExperimentConfig, lo: int, hi: int, picard_terminal) -> np.ndarray:
    """Per-path terminal distances for path indices [lo, hi); runs in workers."""
    problem = preset(cfg.preset, **cfg.params)
    base = _base_resolution(cfg)
    rows = np.empty((hi - lo, len(cfg.stepsizes)))
    for k, idx in enumerate(range(lo, hi)):
        path = generate(cfg.seed, idx, base, problem.dim_noise, problem.horizon)
        if cfg.oracle == "analytic_gbm":
            ref = np.asarray(problem.analytic_terminal(path), dtype=np.float64)
        elif cfg.oracle == "picard":
            ref = picard_terminal
        else:
            ref = _fine_reference(problem, cfg, path)
        for j, n_steps in enumerate(cfg.stepsizes):
            approx = _run_one(problem, cfg, n_steps, path)
            rows[k, j] = float(np.linalg.norm(ref - approx))
    return rows


def run_convergence_study(cfg: ExperimentConfig) -> ErrorReport:
    """Measure strong errors across stepsizes and fit the convergence rate.

    Deterministic given the config (seed included): replicate i always
    consumes Brownian path (seed, i) and coarse inputs are exact block
    sums of the shared fine path, so the measured error isolates the
    discretization, not the noise.
    """
    problem = preset(cfg.preset, **cfg.params)
    if cfg.oracle == "analytic_gbm" and problem.analytic_terminal is None:
        raise ValueError(f"preset {cfg.preset!r} has no analytic terminal value")
    picard_terminal = None
    if cfg.oracle == "picard":
        picard_terminal = picard_reference_solution(problem, cfg.n_fine).terminal

    chunks = _split_indices(cfg.n_paths, cfg.workers)
    if cfg.workers == 1:
        parts = [_study_chunk(cfg, lo, hi, picard_terminal) for lo, hi in chunks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_study_chunk, cfg, lo, hi, picard_terminal) for lo, hi in chunks]
            parts = [f.result() for f in futures]
    distances = np.vstack(parts)

    h_values, errors, stderrs = [], [], []
    for j, n_steps in enumerate(cfg.stepsizes):
        e, se = strong_error_with_stderr(distances[:, j], cfg.p_norm)
        h_values.append(problem.horizon / n_steps)
        errors.append(e)
        stderrs.append(se)
    rate, intercept, r2 = fit_loglog(h_values, errors)

    alpha = max(k.effective_exponent for k, _ in problem.drift_terms)
    beta = problem.diffusion_kernel.effective_exponent
    theory = theoretical_rate(cfg.scheme, alpha, beta)
    tol = RATE_TOLERANCE[cfg.scheme]
    report = ErrorReport(
        scheme=cfg.scheme,
        theta=cfg.theta,
        stepsizes=cfg.stepsizes,
        h_values=tuple(h_values),
        errors=tuple(errors),
        stderrs=tuple(stderrs),
        rate=rate,
        intercept=intercept,
        r_squared=r2,
        theory_rate=theory.rate,
        log_correction=theory.log_correction,
        tolerance=tol,
        passed=abs(rate - theory.rate) <= tol,
        seed=cfg.seed,
        n_paths=cfg.n_paths,
        p_norm=cfg.p_norm,
    )
    if cfg.out is not None:
        report.to_csv(cfg.out)
    return report


def _split_indices(n: int, workers: int) -> List[Tuple[int, int]]:
    workers = min(workers, n)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


@dataclass(frozen=True)
class HolderReport:
    """Dyadic-lag mean-square increment regression of the fine reference."""

    exponent: float
    stderr: float
    lag_times: Tuple[float, ...]
    mean_square_increments: Tuple[float, ...]
    deterministic: bool
    n_fine: int
    n_paths: int
    seed: int


def holder_exponent_estimate(
    problem: SvieProblem,
    n_fine: int,
    n_paths: int,
    pair_count: int = 256,
    seed: int = 0,
) -> HolderReport:
    """Estimate the exponent g in ``E|X(t) - X(r)|^2 ~ |t - r|**(2g)``.

    Runs the fine-grid reference per path, averages squared increments at
    dyadic lags (up to ``pair_count`` start positions per lag), and
    regresses on the log-log scale.  Drift-only problems are flagged as
    deterministic: the estimate then reflects drift smoothness, not a
    noise modulus.
    """
    lags = []
    lag = 1
    while lag <= n_fine // 8:
        lags.append(lag)
        lag *= 2
    if len(lags) < 4:
        raise ValueError("n_fine too small: need at least 4 dyadic lags")

    sums = np.zeros(len(lags))
    counts = np.zeros(len(lags), dtype=np.int64)
    for idx in range(n_paths):
        path = generate(seed, idx, n_fine, problem.dim_noise, problem.horizon)
        traj = run_reference(problem, n_fine, path)
        x = traj.values
        for j, ell in enumerate(lags):
            max_start = n_fine - ell
            starts = np.unique(
                np.linspace(0, max_start, min(pair_count, max_start + 1)).astype(int)
            )
            diffs = x[starts + ell] - x[starts]
            sums[j] += float((diffs**2).sum())
            counts[j] += diffs.size
        if problem.diffusion is None:
            break  # deterministic: one trajectory carries all information

    msd = sums / counts
    if np.any(msd <= 0.0):
        raise NumericalError("degenerate trajectory: zero mean-square increment")
    h = problem.horizon / n_fine
    lag_times = np.array(lags, dtype=np.float64) * h
    x_log, y_log = np.log(lag_times), np.log(msd)
    slope, _, _ = fit_loglog(lag_times, msd)
    # OLS slope standard error
    resid = y_log - (y_log.mean() + slope * (x_log - x_log.mean()))
    dof = max(len(lags) - 2, 1)
    sxx = float(((x_log - x_log.mean()) ** 2).sum())
    slope_se = math.sqrt(float((resid**2).sum()) / dof / sxx)
    return HolderReport(
        exponent=slope / 2.0,
        stderr=slope_se / 2.0,
        lag_times=tuple(lag_times),
        mean_square_increments=tuple(msd),
        deterministic=problem.diffusion is None,
        n_fine=n_fine,
        n_paths=n_paths,
        seed=seed,
    )


@dataclass(frozen=True)
class MomentReport:
    """Sup-over-nodes Monte Carlo p-th moments across grid resolutions."""

    stepsizes: Tuple[int, ...]
    moments: Tuple[float, ...]
    ratio: float
    bounded: bool
    p: float
    n_paths: int
    seed: int


def moment_bound_check(
    problem: SvieProblem,
    configs: Sequence[SchemeConfig],
    n_paths: int,
    p: float = 2.0,
    seed: int = 0,
) -> MomentReport:
    """Monte Carlo ``max_n E|Y_n|^p`` for each scheme config.

    Flags growth: the largest moment across the configs must stay within
    a factor 2 of the smallest, else ``bounded`` is False.
    """
    moments = []
    for config in configs:
        resolution = (
            config.n_steps * config.substeps if config.scheme == "milstein" else config.n_steps
        )
        acc = np.zeros(config.n_steps + 1)
        for idx in range(n_paths):
            path = generate(seed, idx, resolution, problem.dim_noise, problem.horizon)
            if config.scheme == "milstein":
                traj = run_milstein(problem, config, path)
            else:
                traj = run_theta_em(problem, config, path)
            acc += np.linalg.norm(traj.values, axis=1) ** p
        moments.append(float((acc / n_paths).max()))
    ratio = max(moments) / min(moments)
    bounded = bool(np.isfinite(ratio) and ratio < 2.0)
    return MomentReport(
        stepsizes=tuple(c.n_steps for c in configs),
        moments=tuple(moments),
        ratio=ratio,
        bounded=bounded,
        p=p,
        n_paths=n_paths,
        seed=seed,
    )
