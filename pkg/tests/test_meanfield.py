import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from topicdiff.engine import SimConfig
from topicdiff.meanfield import MeanFieldParams, p_closed_form, p_numeric, steady_state_c


def mf(**kw):
    base = dict(lambda1=1.0, lambda2=1.0, A=1.0, alpha=0.3, B=0.5, beta=0.7, k=10.0)
    base.update(kw)
    return MeanFieldParams(**base)


def test_steady_state_c_examples():
    assert steady_state_c(mf(A=0.0, k=10, lambda2=1, B=1, beta=2)) == pytest.approx(5.0)
    assert steady_state_c(mf(lambda1=1, A=1, alpha=1, k=0)) == pytest.approx(1.0)
    assert steady_state_c(mf(lambda1=0.5, A=2, alpha=1, k=10, lambda2=1, B=1, beta=2)) == pytest.approx(6.0)


def test_derived_constants():
    p = mf()
    c = 1 / 0.3 + 10 * 0.5 / 0.7
    assert p.c == pytest.approx(c)
    assert p.D1 == pytest.approx(0.7 - 10 * 0.5 / c)
    assert p.D2 == pytest.approx((0.7 - 0.3) / c)
    # D1 equals beta times the global share of c
    assert p.D1 == pytest.approx(0.7 * (1 / 0.3) / c)


def test_from_config():
    cfg = SimConfig(lambda1=2.0, lambda2=0.5, A=1.5, alpha=0.2, B=0.1, beta=0.4, horizon=10.0)
    p = MeanFieldParams.from_config(cfg, 8)
    assert (p.lambda1, p.lambda2, p.A, p.alpha, p.B, p.beta, p.k) == (2.0, 0.5, 1.5, 0.2, 0.1, 0.4, 8.0)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(beta=-1.0), dict(A=-1.0), dict(A=0.0, B=0.0)])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        mf(**kw)


def test_closed_form_at_zero_is_A_over_c():
    p = mf()
    assert p_closed_form(0.0, p) == pytest.approx(p.A / p.c)


def test_equal_decay_rates_give_pure_exponential():
    p = mf(alpha=0.4, beta=0.4)
    t = np.linspace(0, 30, 61)
    np.testing.assert_allclose(p_closed_form(t, p), p.A / p.c * np.exp(-p.D1 * t), rtol=1e-12)


def test_degenerate_limit_is_continuous():
    # choose B so that D1 == alpha exactly: beta*X/c = alpha  =>  Y = X*(beta-alpha)/alpha
    alpha, beta, k = 0.2, 0.5, 10.0
    X = 1.0 / alpha
    B = X * (beta - alpha) / alpha * beta / k
    p = mf(alpha=alpha, beta=beta, B=B, k=k)
    assert abs(p.D1 - alpha) < 1e-12
    near = mf(alpha=alpha, beta=beta, B=B * (1 + 1e-6), k=k)
    t = np.linspace(0, 40, 81)
    np.testing.assert_allclose(p_closed_form(t, p), p_closed_form(t, near), rtol=1e-5, atol=1e-12)
    fine = np.arange(0, 40001) * 0.001
    np.testing.assert_allclose(p_closed_form(fine, p), p_numeric(fine, p), atol=1e-7)


def test_numeric_without_neighbors_is_exponential():
    p = mf(k=0.0)
    t = np.arange(0, 2001) * 0.01
    np.testing.assert_allclose(p_numeric(t, p), p.A / p.c * np.exp(-p.alpha * t), rtol=1e-14)
    p_b0 = mf(B=0.0)
    np.testing.assert_allclose(p_numeric(t, p_b0), p_b0.A / p_b0.c * np.exp(-p_b0.alpha * t), rtol=1e-14)


def test_numeric_convergence_order_two():
    p = mf()
    errs = []
    for h in (0.2, 0.1, 0.05):
        t = np.arange(0, int(round(30 / h)) + 1) * h
        errs.append(np.max(np.abs(p_numeric(t, p) - p_closed_form(t, p))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_numeric_grid_validation():
    p = mf()
    with pytest.raises(ValueError):
        p_numeric([], p)
    with pytest.raises(ValueError):
        p_numeric([0.0, 0.1, 0.3], p)
    with pytest.raises(ValueError):
        p_numeric([1.0, 2.0], p)
    assert p_numeric([0.0], p)[0] == pytest.approx(p.A / p.c)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        p_closed_form(-1.0, mf())


def test_tiny_excursions_are_clamped_with_warning():
    # tail of a valid curve can round below zero only by ~1e-17; force the path directly
    from topicdiff.meanfield import _clamp
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        out = _clamp(np.array([-1e-13, 0.5, 1 + 1e-13]))
    assert list(out) == [0.0, 0.5, 1.0]
    assert rec


def test_integral_of_rate_is_one():
    # every topic's expected instance count per node is lambda2 * int P dt, and the
    # lambda1 topics per unit time share all lambda2 instances: lambda1 * int P = 1
    p = mf(lambda1=2.0, lambda2=1.5)
    t = np.arange(0, 400001) * 0.001
    P = p_numeric(t, p)
    integral = np.sum((P[1:] + P[:-1]) * 0.5 * 0.001)
    assert p.lambda1 * integral == pytest.approx(1.0, rel=1e-4)


params = st.builds(
    MeanFieldParams,
    lambda1=st.floats(0.1, 3), lambda2=st.floats(0.1, 3), A=st.floats(0.1, 2),
    alpha=st.floats(0.05, 2), B=st.floats(0.0, 2), beta=st.floats(0.05, 2),
    k=st.floats(0, 20),
)


def test_probability_bounded_when_topics_are_plentiful():
    # P(0) = A/c <= alpha/lambda1, so at least alpha topics per unit time keep P <= 1
    p = mf(lambda1=5.0, alpha=0.3)
    t = np.linspace(0, 100, 1001)
    assert np.all(p_closed_form(t, p) <= 1)


@given(p=params)
def test_closed_form_is_nonnegative_and_decays(p):
    assume(p.D1 > 0)
    m = min(p.alpha, p.D1)
    t = np.linspace(0, 60 / m, 200)
    P = p_closed_form(t, p)
    assert np.all(P >= 0)
    assert P[-1] <= P.max() * 1e-6


@given(p=params)
def test_closed_form_solves_the_ode(p):
    assume(p.D1 > 0 and not math.isclose(p.D1, p.alpha, rel_tol=1e-6))
    t = np.linspace(0.1, 10, 50)
    h = 1e-5
    dP = (p_closed_form(t + h, p) - p_closed_form(t - h, p)) / (2 * h)
    lhs = dP + p.D1 * p_closed_form(t, p)
    np.testing.assert_allclose(lhs, p.D2 * np.exp(-p.alpha * t), atol=1e-6)
