import numpy as np
import pytest
from scipy.integrate import quad

from svolterra.kernels import (
    SingularKernel,
    difference_integral,
    segment_integral,
    weight_matrix,
    weight_vector,
)


def quad_segment(kernel, t_eval, s_lo, s_hi):
    """Adaptive-quadrature oracle for the segment integral."""
    val, _ = quad(
        lambda s: kernel.scale * (t_eval - s) ** (-kernel.exponent),
        s_lo,
        s_hi,
        limit=200,
    )
    return val


def test_constructor_validation():
    with pytest.raises(ValueError):
        SingularKernel(1.0)
    with pytest.raises(ValueError):
        SingularKernel(-0.1)
    with pytest.raises(ValueError):
        SingularKernel(0.5, scale=0.0)
    with pytest.raises(ValueError):
        SingularKernel(0.5, scale=float("inf"))


def test_segment_integral_flat_kernel():
    k = SingularKernel(0.0)
    assert segment_integral(k, 1.0, 0.0, 0.25) == 0.25


def test_segment_integral_closed_form_values():
    k = SingularKernel(0.5)
    # 0.25**0.5 * (2**0.5 - 1) / 0.5, frozen from the antiderivative
    assert segment_integral(k, 0.5, 0.0, 0.25) == pytest.approx(0.4142135623730951, abs=1e-15)
    # window touching the singular endpoint stays finite
    assert segment_integral(k, 0.25, 0.0, 0.25) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("window", [(0.0, 0.25), (0.1, 0.3), (0.3, 0.5)])
def test_segment_integral_matches_quadrature_away_from_singularity(gamma, window):
    k = SingularKernel(gamma, scale=1.3)
    t_eval = 0.75
    exact = segment_integral(k, t_eval, *window)
    oracle = quad_segment(k, t_eval, *window)
    assert exact == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("gamma", [0.1, 0.45, 0.9])
def test_segment_integral_matches_quadrature_at_singular_endpoint(gamma):
    k = SingularKernel(gamma)
    exact = segment_integral(k, 0.5, 0.25, 0.5)
    oracle = quad_segment(k, 0.5, 0.25, 0.5)
    assert exact == pytest.approx(oracle, abs=1e-8)


def test_segment_integral_domain_errors():
    k = SingularKernel(0.5)
    with pytest.raises(ValueError):
        segment_integral(k, 1.0, 0.5, 0.25)
    with pytest.raises(ValueError):
        segment_integral(k, 0.4, 0.0, 0.5)


def test_weight_vector_flat():
    k = SingularKernel(0.0)
    assert np.all(weight_vector(k, 0.5, 2) == 0.5)


def test_weight_vector_matches_segment_integral():
    k = SingularKernel(0.5)
    h, n = 0.25, 4
    w = weight_vector(k, h, n)
    assert w[0] == pytest.approx(1.0, rel=1e-14)  # h**0.5 / 0.5 at lag 0
    for n_idx in range(n):
        for i in range(n_idx + 1):
            direct = segment_integral(k, (n_idx + 1) * h, i * h, (i + 1) * h)
            assert w[n_idx - i] == pytest.approx(direct, rel=1e-13)


def test_weight_identity_by_lag():
    """c_{n,i} * (1-g) / h**(1-g) == (n+1-i)**(1-g) - (n-i)**(1-g) at machine precision."""
    h = 1.0 / 64
    for gamma in (0.1, 0.25, 0.5, 0.75, 0.9):
        k = SingularKernel(gamma)
        w = weight_vector(k, h, 64)
        lags = np.arange(64, dtype=np.float64)
        lhs = w * (1.0 - gamma) / h ** (1.0 - gamma)
        rhs = (lags + 1.0) ** (1.0 - gamma) - lags ** (1.0 - gamma)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


def test_weight_matrix_row_sums_telescope():
    k = SingularKernel(0.3, scale=2.0)
    h, n = 0.125, 8
    c = weight_matrix(k, h, n)
    for n_idx in range(n):
        total = segment_integral(k, (n_idx + 1) * h, 0.0, (n_idx + 1) * h)
        assert c[n_idx, : n_idx + 1].sum() == pytest.approx(total, rel=1e-12)
    assert np.all(c[np.triu_indices(n, k=1)] == 0.0)


def test_weight_bound_small_lags():
    # (m)**(1-g) - (m-1)**(1-g) <= 2**g * m**(-g) for m = n+1-i
    m = np.arange(1, 10_001, dtype=np.float64)
    for gamma in (0.1, 0.25, 0.5, 0.75, 0.9):
        lhs = m ** (1.0 - gamma) - (m - 1.0) ** (1.0 - gamma)
        rhs = 2.0**gamma * m ** (-gamma)
        assert np.all(lhs <= rhs * (1.0 + 1e-12))


def test_difference_integral_flat_and_coincident():
    assert difference_integral(SingularKernel(0.0), 0.9, 0.5, 0.1, 0.4) == 0.0
    assert difference_integral(SingularKernel(0.5), 0.5, 0.5, 0.0, 0.25) == 0.0


def test_difference_integral_value_and_sign():
    k = SingularKernel(0.5)
    val = difference_integral(k, 0.5, 0.25, 0.0, 0.25)
    oracle, _ = quad(lambda r: (0.5 - r) ** -0.5 - (0.25 - r) ** -0.5, 0.0, 0.25, limit=200)
    assert val == pytest.approx(oracle, abs=1e-8)
    # antiderivative value, frozen: 2*(sqrt(0.5)-0.5) - 1
    assert val == pytest.approx(-0.5857864376269049, abs=1e-14)
    assert val <= 0.0


def test_difference_integral_domain_errors():
    k = SingularKernel(0.5)
    with pytest.raises(ValueError):
        difference_integral(k, 0.4, 0.5, 0.0, 0.25)  # anchor after evaluation point
    with pytest.raises(ValueError):
        difference_integral(k, 0.6, 0.5, 0.0, 0.55)  # window past anchor
    with pytest.raises(ValueError):
        difference_integral(k, 0.6, 0.5, 0.3, 0.2)  # reversed window


@pytest.mark.parametrize("seed", [0, 1])
def test_squared_difference_integral_bound(seed):
    """int_0^r [(t-s)^-b - (r-s)^-b]^2 ds <= 2b/((1-b)(1-2b)) (t-r)^(1-2b)."""
    rng = np.random.default_rng(seed)
    for _ in range(20):
        beta = float(rng.uniform(0.02, 0.48))
        r = float(rng.uniform(0.05, 0.8))
        t = float(rng.uniform(r + 1e-3, 1.0))
        # expand the square: the outer terms have closed forms, the cross
        # term is integrated numerically
        a_term = (t ** (1 - 2 * beta) - (t - r) ** (1 - 2 * beta)) / (1 - 2 * beta)
        b_term = r ** (1 - 2 * beta) / (1 - 2 * beta)
        cross, _ = quad(
            lambda s: (t - s) ** (-beta) * (r - s) ** (-beta), 0.0, r, limit=300
        )
        integral = a_term + b_term - 2.0 * cross
        bound = 2.0 * beta / ((1.0 - beta) * (1.0 - 2.0 * beta)) * (t - r) ** (1.0 - 2.0 * beta)
        assert integral <= bound * (1.0 + 1e-7) + 1e-12
