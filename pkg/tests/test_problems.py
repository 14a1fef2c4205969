import math

import numpy as np
import pytest

from svolterra.errors import NumericalError
from svolterra.kernels import SingularKernel
from svolterra.problems import (
    SvieProblem,
    picard_reference_solution,
    preset,
    preset_names,
    validate,
)
from svolterra.special import gamma_fn


def _drift_only(fn, alpha, x0=0.0, horizon=1.0):
    return SvieProblem(
        drift=fn,
        diffusion=None,
        drift_kernel=SingularKernel(alpha),
        diffusion_kernel=SingularKernel(0.0),
        initial=np.array([x0]),
        horizon=horizon,
    )


def test_preset_names_are_unique_and_known():
    names = preset_names()
    assert len(names) == len(set(names))
    assert {"paper_example", "gbm", "caputo", "itodoob"} <= set(names)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="unknown preset"):
        preset("nope")
    with pytest.raises(ValueError, match="bad parameters"):
        preset("gbm", bogus=3.0)


def test_gbm_preset():
    p = preset("gbm", mu=0.0, sigma=1.0, x0=1.0)
    assert p.dim_state == p.dim_noise == 1
    assert p.drift_kernel.exponent == 0.0 and p.diffusion_kernel.exponent == 0.0
    x = np.array([2.0])
    assert p.drift(x)[0] == 0.0
    assert p.diffusion(x)[0, 0] == 2.0
    assert p.diffusion_jacobian(x)[0, 0, 0] == 1.0


def test_paper_example_preset():
    p = preset("paper_example", alpha=0.3, beta=0.1)
    assert p.drift_kernel.exponent == 0.3
    assert p.diffusion_kernel.exponent == 0.1
    x = np.array([0.7])
    assert p.drift(x)[0] == pytest.approx(math.sin(0.7), rel=1e-15)
    assert p.diffusion(x)[0, 0] == pytest.approx(0.5 * (math.cos(0.7) + 2.0), rel=1e-15)


def test_caputo_preset_round_trip():
    p = preset("caputo", alpha_c=0.8)
    assert p.drift_kernel.exponent == pytest.approx(0.2, abs=1e-15)
    assert p.diffusion_kernel.exponent == pytest.approx(0.2, abs=1e-15)
    for k in (p.drift_kernel, p.diffusion_kernel):
        assert k.scale * gamma_fn(0.8) == pytest.approx(1.0, rel=1e-14)


def test_caputo_rejects_low_order():
    with pytest.raises(ValueError, match="below 1/2"):
        preset("caputo", alpha_c=0.5)


def test_itodoob_preset_structure():
    p = preset("itodoob", alpha=0.6)
    assert p.drift_kernel.exponent == 0.0
    assert len(p.extra_drift_terms) == 1
    kernel, fn = p.extra_drift_terms[0]
    assert kernel.exponent == pytest.approx(0.4, abs=1e-15)
    assert kernel.scale == pytest.approx(0.6, abs=1e-15)
    assert len(p.drift_terms) == 2


def test_problem_rejects_diffusion_exponent_at_half():
    with pytest.raises(ValueError, match="beta < 1/2"):
        SvieProblem(
            drift=np.sin,
            diffusion=None,
            drift_kernel=SingularKernel(0.3),
            diffusion_kernel=SingularKernel(0.5),
            initial=np.array([1.0]),
        )


def test_initial_sampler_is_deterministic():
    p = SvieProblem(
        drift=np.sin,
        diffusion=None,
        drift_kernel=SingularKernel(0.0),
        diffusion_kernel=SingularKernel(0.0),
        initial=lambda rng: rng.normal(size=1),
    )
    a = p.realize_initial(3, 5)
    b = p.realize_initial(3, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, p.realize_initial(3, 6))


def test_validate_sine_drift_lipschitz():
    p = preset("paper_example", alpha=0.3, beta=0.1)
    report = validate(p, (-10.0, 10.0), n_probes=4096, seed=1)
    assert report.drift_lipschitz <= 1.0 + 1e-9
    assert report.diffusion_lipschitz <= 0.5 + 1e-9
    assert report.diffusion_growth <= 1.5 + 1e-12
    assert not report.hint_violated


def test_validate_flags_hint_violation_with_bruteforce_oracle():
    def square(x):
        return x * x

    p = SvieProblem(
        drift=square,
        diffusion=None,
        drift_kernel=SingularKernel(0.0),
        diffusion_kernel=SingularKernel(0.0),
        initial=np.array([0.0]),
        lipschitz_hint=1.0,
    )
    report = validate(p, (-10.0, 10.0), n_probes=4096, seed=7)
    # brute-force the same probe pairs independently
    rng = np.random.default_rng(7)
    xs = -10.0 + 20.0 * rng.random((4096, 1))
    ys = -10.0 + 20.0 * rng.random((4096, 1))
    best = 0.0
    for x, y in zip(xs, ys):
        d = abs(float(x[0] - y[0]))
        if d > 0:
            best = max(best, abs(float(x[0] ** 2 - y[0] ** 2)) / d)
    assert report.drift_lipschitz == pytest.approx(best, rel=1e-12)
    assert report.drift_lipschitz > 18.0
    assert report.hint_violated


def test_validate_deterministic_given_seed():
    p = preset("paper_example", alpha=0.3, beta=0.1)
    a = validate(p, (-5.0, 5.0), n_probes=512, seed=11)
    b = validate(p, (-5.0, 5.0), n_probes=512, seed=11)
    assert a == b


def test_picard_zero_drift_converges_immediately():
    def zero(x):
        return np.zeros_like(x)

    res = picard_reference_solution(_drift_only(zero, 0.5, x0=2.5), n_steps=32)
    assert res.iterations <= 2
    np.testing.assert_allclose(res.values, 2.5, rtol=0, atol=0)


def test_picard_constant_drift_square_root_solution():
    def one(x):
        return np.ones_like(x)

    res = picard_reference_solution(_drift_only(one, 0.5, x0=0.0), n_steps=64)
    t = res.nodes[1:]
    np.testing.assert_allclose(res.values[1:, 0], 2.0 * np.sqrt(t), rtol=1e-12)


def test_picard_linear_drift_matches_discrete_compound_growth():
    def identity(x):
        return x

    n = 256
    res = picard_reference_solution(_drift_only(identity, 0.0, x0=1.0), n_steps=n, tol=1e-13)
    h = 1.0 / n
    expected = (1.0 + h) ** np.arange(n + 1)  # closed form of the fixed point
    np.testing.assert_allclose(res.values[:, 0], expected, rtol=1e-10)
    assert np.all(np.diff(res.values[:, 0]) >= 0.0)
    # refinement halves the gap to e**t (first-order product integration)
    err_n = abs(res.values[-1, 0] - math.e)
    res2 = picard_reference_solution(_drift_only(identity, 0.0, x0=1.0), n_steps=2 * n, tol=1e-13)
    err_2n = abs(res2.values[-1, 0] - math.e)
    assert err_n / err_2n == pytest.approx(2.0, rel=0.15)


def test_picard_requires_zero_diffusion():
    p = preset("gbm", mu=0.0, sigma=1.0, x0=1.0)
    with pytest.raises(ValueError, match="zero diffusion"):
        picard_reference_solution(p, n_steps=16)


def test_picard_nonconvergence_raises():
    def steep(x):
        return 50.0 * x

    with pytest.raises(NumericalError):
        picard_reference_solution(_drift_only(steep, 0.0, x0=1.0), n_steps=8, max_iter=5)
