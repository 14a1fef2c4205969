"""Command-line entry point.

Subcommands: ``study`` (convergence study -> CSV), ``holder`` (regularity
exponent estimate), ``moments`` (moment-boundedness check), ``validate``
(coefficient probing).  A JSON config file may supply any study field;
explicit flags override it.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 threshold
failure under ``--assert``.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .errors import NumericalError
from .harness import (
    ExperimentConfig,
    holder_exponent_estimate,
    moment_bound_check,
    run_convergence_study,
)
from .problems import preset, preset_names, validate
from .schemes import SchemeConfig

_PARAM_FLAGS = ("alpha", "beta", "mu", "sigma", "x0", "alpha_c")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_preset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"problem preset ({', '.join(preset_names())})")
    p.add_argument("--alpha", type=float, help="drift kernel exponent (preset parameter)")
    p.add_argument("--beta", type=float, help="diffusion kernel exponent (preset parameter)")
    p.add_argument("--mu", type=float, help="linear drift coefficient (gbm)")
    p.add_argument("--sigma", type=float, help="linear diffusion coefficient (gbm)")
    p.add_argument("--x0", type=float, help="initial value")
    p.add_argument("--alpha-c", dest="alpha_c", type=float, help="fractional order (caputo)")


def _collect_params(args) -> dict:
    return {k: getattr(args, k) for k in _PARAM_FLAGS if getattr(args, k, None) is not None}


def _steps_list(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad stepsize list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svolterra", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    study = sub.add_parser("study", help="run a strong-convergence study")
    _add_preset_flags(study)
    study.add_argument("--scheme", choices=("theta_em", "milstein"))
    study.add_argument("--theta", type=float)
    study.add_argument("--substeps", type=int)
    study.add_argument("--nfine", type=int)
    study.add_argument("--steps", type=_steps_list, help="comma-separated step counts")
    study.add_argument("--paths", type=int)
    study.add_argument("--p", type=float)
    study.add_argument("--seed", type=int)
    study.add_argument("--oracle", choices=("fine_reference", "analytic_gbm", "picard"))
    study.add_argument("--out", help="CSV output path (default: stdout)")
    study.add_argument("--workers", type=int)
    study.add_argument("--config", help="JSON file with ExperimentConfig fields")
    study.add_argument(
        "--assert", dest="assert_pass", action="store_true",
        help="exit 3 when the fitted rate misses the theoretical rate",
    )

    holder = sub.add_parser("holder", help="estimate the increment regularity exponent")
    _add_preset_flags(holder)
    holder.add_argument("--nfine", type=int, default=4096)
    holder.add_argument("--paths", type=int, default=500)
    holder.add_argument("--pairs", type=int, default=256)
    holder.add_argument("--seed", type=int, default=0)
    holder.add_argument("--out", help="CSV output path (default: stdout)")

    moments = sub.add_parser("moments", help="check moment boundedness across resolutions")
    _add_preset_flags(moments)
    moments.add_argument("--scheme", choices=("theta_em", "milstein"), default="theta_em")
    moments.add_argument("--theta", type=float, default=0.0)
    moments.add_argument("--substeps", type=int, default=16)
    moments.add_argument("--steps", type=_steps_list, default=[16, 32, 64, 128, 256, 512])
    moments.add_argument("--paths", type=int, default=500)
    moments.add_argument("--p", type=float, default=2.0)
    moments.add_argument("--seed", type=int, default=0)
    moments.add_argument("--out", help="CSV output path (default: stdout)")
    moments.add_argument("--assert", dest="assert_pass", action="store_true")

    val = sub.add_parser("validate", help="probe Lipschitz/growth constants")
    _add_preset_flags(val)
    val.add_argument("--box", default="-10,10", help="sample box 'lo,hi'")
    val.add_argument("--probes", type=int, default=4096)
    val.add_argument("--seed", type=int, default=0)

    return parser


def _write_text(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _cmd_study(args) -> int:
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    params = _collect_params(args)
    if params:
        fields.setdefault("params", {})
        fields["params"] = {**fields["params"], **params}
    if args.preset is not None:
        fields["preset"] = args.preset
    for flag, key in (
        ("scheme", "scheme"), ("theta", "theta"), ("substeps", "substeps"),
        ("nfine", "n_fine"), ("steps", "stepsizes"), ("paths", "n_paths"),
        ("p", "p_norm"), ("seed", "seed"), ("oracle", "oracle"),
        ("out", "out"), ("workers", "workers"),
    ):
        value = getattr(args, flag)
        if value is not None:
            fields[key] = value
    if "preset" not in fields:
        raise ValueError("a preset is required (--preset or config file)")
    cfg = ExperimentConfig.from_dict(fields)
    report = run_convergence_study(cfg)
    if cfg.out is None:
        sys.stdout.write(report.csv_text())
    sys.stderr.write(
        f"rate={report.rate:.4f} theory={report.theory_rate:.4f} "
        f"r2={report.r_squared:.4f} pass={report.passed}\n"
    )
    if args.assert_pass and not report.passed:
        return 3
    return 0


def _cmd_holder(args) -> int:
    problem = preset(args.preset, **_collect_params(args))
    report = holder_exponent_estimate(
        problem, n_fine=args.nfine, n_paths=args.paths, pair_count=args.pairs, seed=args.seed
    )
    lines = ["lag_time,mean_square_increment"]
    for t, v in zip(report.lag_times, report.mean_square_increments):
        lines.append(f"{t!r},{v!r}")
    lines.append(
        f"# exponent={report.exponent!r} stderr={report.stderr!r} "
        f"deterministic={report.deterministic} seed={report.seed}"
    )
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_moments(args) -> int:
    problem = preset(args.preset, **_collect_params(args))
    configs = [
        SchemeConfig(scheme=args.scheme, n_steps=n, theta=args.theta, substeps=args.substeps)
        for n in args.steps
    ]
    report = moment_bound_check(problem, configs, n_paths=args.paths, p=args.p, seed=args.seed)
    lines = ["n_steps,moment"]
    for n, mo in zip(report.stepsizes, report.moments):
        lines.append(f"{n},{mo!r}")
    lines.append(f"# ratio={report.ratio!r} pass={report.bounded} p={report.p} seed={report.seed}")
    _write_text("\n".join(lines) + "\n", args.out)
    if args.assert_pass and not report.bounded:
        return 3
    return 0


def _cmd_validate(args) -> int:
    problem = preset(args.preset, **_collect_params(args))
    lo, hi = (float(s) for s in args.box.split(","))
    report = validate(problem, (lo, hi), n_probes=args.probes, seed=args.seed)
    print(f"drift lipschitz estimate:     {report.drift_lipschitz:.6g}")
    print(f"diffusion lipschitz estimate: {report.diffusion_lipschitz:.6g}")
    print(f"drift growth estimate:        {report.drift_growth:.6g}")
    print(f"diffusion growth estimate:    {report.diffusion_growth:.6g}")
    hint = report.lipschitz_hint
    print(f"declared hint:                {hint if hint is not None else 'none'}")
    print(f"hint violated:                {report.hint_violated}")
    return 0


_COMMANDS = {
    "study": _cmd_study,
    "holder": _cmd_holder,
    "moments": _cmd_moments,
    "validate": _cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (NumericalError, OverflowError, FloatingPointError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
