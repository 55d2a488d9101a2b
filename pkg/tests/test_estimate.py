import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from cbi.estimate import (
    IllConditionedWarning,
    UndefinedEstimator,
    cls,
    cls_BA,
    cls_errors,
    estimate,
    partial_sum_limits_check,
    residuals_and_sums,
    wcls,
)
from cbi.jump_measures import JumpMeasure
from cbi.model import CbiParams, derive
from cbi.rng import make_rng
from cbi.simulate import ObservationPath, simulate

PURE = CbiParams(b=0.2, nu=JumpMeasure.atom(1.0, 1.0), x0=1.0)


def _lstsq_oracle(values, weights=None):
    """Slope and intercept of the (weighted) regression of X_k on X_{k-1}."""
    x, y = np.asarray(values[:-1], float), np.asarray(values[1:], float)
    w = np.ones_like(x) if weights is None else weights(x)
    design = np.column_stack([x, np.ones_like(x)]) * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(design, y * np.sqrt(w), rcond=None)
    return coef


# ---- cls ---------------------------------------------------------------------------------


def test_cls_examples():
    assert cls(np.array([1.0, 2.0, 4.0, 8.0])) == (True, 2.0, 0.0)
    hn, rho, calA = cls(np.array([0.0, 1.0, 1.0, 2.0]))
    assert hn and rho == pytest.approx(0.5, abs=1e-15) and calA == pytest.approx(1.0, abs=1e-15)
    assert cls(np.array([3.0, 3.0, 3.0, 7.0])) == (False, None, None)


def test_cls_accepts_observation_path():
    path = ObservationPath(np.array([0.0, 1.0, 1.0, 2.0]), "euler_thinning")
    assert cls(path)[0]


def test_cls_needs_two_observations():
    with pytest.raises(ValueError):
        cls(np.array([1.0]))


positive = st.floats(0.0, 1e3, allow_nan=False)


@given(st.lists(positive, min_size=3, max_size=40), st.floats(1e-3, 1e3))
def test_cls_scale_equivariance(xs, lam):
    v = np.array(xs)
    assume(not np.all(v[:-1] == v[0]))
    hn, rho, calA = cls(v)
    x = v[:-1]
    assume(np.var(x) > 1e-6 * max(np.mean(x) ** 2, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        _, rho2, calA2 = cls(lam * v)
    assert rho2 == pytest.approx(rho, rel=1e-9, abs=1e-9)
    assert calA2 == pytest.approx(lam * calA, rel=1e-9, abs=1e-9 * lam * max(1.0, np.max(v)))


@given(st.floats(0.05, 5.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.integers(2, 30))
def test_cls_exact_recovery(rho, calA, x0, n):
    v = [x0]
    for _ in range(n):
        v.append(rho * v[-1] + calA)
    v = np.array(v)
    assume(not np.all(v[:-1] == v[0]))
    assume(np.max(v) < 1e12)
    assume(np.var(v[:-1]) > 1e-6 * np.mean(v[:-1]) ** 2)
    hn, r, a = cls(v)
    assert hn
    assert r == pytest.approx(rho, abs=1e-10 * max(1.0, rho))
    assert a == pytest.approx(calA, abs=1e-10 * max(1.0, np.max(v)))


@given(st.lists(positive, min_size=3, max_size=30))
def test_cls_matches_lstsq_oracle(xs):
    v = np.array(xs)
    x = v[:-1]
    assume(np.var(x) > 1e-3 * max(np.mean(x) ** 2, 1.0))
    _, rho, calA = cls(v)
    slope, intercept = _lstsq_oracle(v)
    scale = max(1.0, np.max(v))
    assert rho == pytest.approx(slope, abs=1e-8)
    assert calA == pytest.approx(intercept, abs=1e-8 * scale)


def test_cls_handles_exponential_growth_without_overflow():
    # sums of squares of these values (up to ~1e304) would overflow without rescaling
    v = np.exp(0.5 * np.arange(1400.0)) + 1.0
    hn, rho, calA = cls(v)
    assert hn and rho == pytest.approx(math.exp(0.5), rel=1e-12)


def test_ill_conditioning_warning():
    v = np.array([1e6, 1e6 + 1e-4, 1e6, 1e6 + 1e-4, 1e6])
    with pytest.warns(IllConditionedWarning):
        cls(v)


def test_well_conditioned_data_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error", IllConditionedWarning)
        cls(np.array([0.0, 1.0, 1.0, 2.0]))


# ---- cls_BA ------------------------------------------------------------------------------


def test_cls_BA_examples():
    assert cls_BA(2.0, 0.0) == (pytest.approx(0.693147, abs=1e-6), 0.0)
    assert cls_BA(1.0, 5.0) == (0.0, 5.0)
    B, A = cls_BA(math.e, math.e - 1.0)
    assert B == pytest.approx(1.0, abs=1e-15) and A == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("rho", [0.0, -0.5])
def test_cls_BA_undefined(rho):
    with pytest.raises(UndefinedEstimator):
        cls_BA(rho, 1.0)


def test_undefined_estimator_is_not_a_value_error():
    assert not issubclass(UndefinedEstimator, ValueError)


@given(st.floats(-3.0, 3.0), st.floats(-10.0, 10.0))
def test_h_round_trip(B, A):
    rho = math.exp(B)
    calA = A * (math.expm1(B) / B if B != 0 else 1.0)
    B2, A2 = cls_BA(rho, calA)
    assert B2 == pytest.approx(B, abs=1e-12)
    assert A2 == pytest.approx(A, abs=1e-12 * max(1.0, abs(A)))


def test_cls_BA_near_one_is_smooth():
    a = cls_BA(1.0 + 1e-12, 2.0)[1]
    assert a == pytest.approx(2.0, rel=1e-11)


# ---- wcls --------------------------------------------------------------------------------


def _wcls_oracle(values, nu_mean):
    """Weighted-LS slope (weights 1/(x+1)) mapped through log; intercept by the unweighted moment formula."""
    slope, _ = _lstsq_oracle(values, lambda x: 1.0 / (x + 1.0))
    B = math.log(slope)
    x, y = values[:-1], values[1:]
    A = (y.sum() - slope * x.sum()) / len(x) / (math.expm1(B) / B)
    return B, A - nu_mean, A


def test_wcls_doubling_example():
    B, a, A = wcls(np.array([1.0, 2.0, 4.0, 8.0]), 0.0)
    assert B == pytest.approx(math.log(2.0), abs=1e-15)
    assert a == pytest.approx(0.0, abs=1e-14) and A == pytest.approx(0.0, abs=1e-14)


def test_wcls_small_example_matches_oracle():
    v = np.array([0.0, 1.0, 1.0, 2.0])
    got = wcls(v, 0.0)
    # numerator 4*2 - 3*2.5 = 0.5 and denominator 5*2 - 9 = 1, so the log argument is 1/2
    np.testing.assert_allclose(got, _wcls_oracle(v, 0.0), rtol=1e-13)
    assert got[0] == pytest.approx(math.log(0.5), abs=1e-15)
    assert got[0] == pytest.approx(-0.693147, abs=1e-6)


def test_wcls_uses_derived_immigration_mean():
    v = np.array([0.0, 1.0, 1.0, 2.0])
    d = derive(PURE)
    B, a, A = wcls(v, d)
    assert a == pytest.approx(A - d.nu_mean, abs=1e-15)


@given(st.lists(positive, min_size=3, max_size=30))
def test_wcls_matches_oracle(xs):
    v = np.array(xs)
    x = v[:-1]
    assume(np.var(x) > 1e-3 * max(np.mean(x) ** 2, 1.0))
    slope, _ = _lstsq_oracle(v, lambda x: 1.0 / (x + 1.0))
    assume(slope > 1e-6)
    got = wcls(v, 0.5)
    want = _wcls_oracle(v, 0.5)
    assert got[0] == pytest.approx(want[0], abs=1e-7)
    assert got[2] == pytest.approx(want[2], abs=1e-7 * max(1.0, np.max(v)))


def test_wcls_constant_data_is_undefined():
    with pytest.raises(UndefinedEstimator):
        wcls(np.array([2.0, 2.0, 2.0, 2.0]), 0.0)


def test_wcls_nonpositive_log_argument_is_undefined():
    with pytest.raises(UndefinedEstimator):
        wcls(np.array([0.0, 5.0, 0.0, 5.0, 0.0]), 0.0)


# ---- residuals ---------------------------------------------------------------------------


def test_residual_examples():
    M, U1, U2 = residuals_and_sums(np.array([1.0, 2.0, 4.0, 8.0]), 2.0, 0.0)
    np.testing.assert_array_equal(M, [0.0, 0.0, 0.0])
    assert U1 == 0.0 and U2 == 0.0
    M, U1, U2 = residuals_and_sums(np.array([0.0, 1.0, 1.0, 2.0]), 1.0, 0.0)
    np.testing.assert_array_equal(M, [1.0, 0.0, 1.0])
    assert (U1, U2) == (2.0, 1.0)


@given(st.lists(positive, min_size=3, max_size=40))
def test_fitted_residuals_satisfy_normal_equations(xs):
    v = np.array(xs)
    x = v[:-1]
    assume(np.var(x) > 1e-3 * max(np.mean(x) ** 2, 1.0))
    _, rho, calA = cls(v)
    M, U1, U2 = residuals_and_sums(v, rho, calA)
    scale = max(1.0, np.max(v))
    assert abs(U1) <= 1e-9 * scale * len(v)
    assert abs(U2) <= 1e-9 * scale**2 * len(v)


# ---- cls_errors --------------------------------------------------------------------------


def _mp_errors(values, rho, calA):
    """CLS errors and innovations in 80-digit arithmetic from the exact binary path values."""
    with mpmath.workdps(80):
        v = [mpmath.mpf(float(t)) for t in values]
        x, y = v[:-1], v[1:]
        n = len(x)
        xbar, ybar = sum(x) / n, sum(y) / n
        sxx = sum((t - xbar) ** 2 for t in x)
        sxy = sum((s - xbar) * (t - ybar) for s, t in zip(x, y))
        rho_hat = sxy / sxx
        calA_hat = ybar - rho_hat * xbar
        rho_m, calA_m = mpmath.mpf(rho), mpmath.mpf(calA)

        def g(r):
            return mpmath.log(r) / (r - 1)

        B_err = mpmath.log(rho_hat) - mpmath.log(rho_m)
        A_err = calA_hat * g(rho_hat) - calA_m * g(rho_m)
        innovations = np.array([float(t - rho_m * s - calA_m) for s, t in zip(x, y)])
        errors = [float(t) for t in (rho_hat - rho_m, calA_hat - calA_m, B_err, A_err)]
        return errors, innovations


@pytest.mark.parametrize("n", [20, 60, 150, 400])
def test_cls_errors_match_high_precision(n):
    d = derive(PURE)
    path = simulate(PURE, n, "exact_pure_immigration", make_rng(n))
    want, innovations = _mp_errors(path.values, d.rho, d.calA)
    got = cls_errors(path, d.rho, d.calA, innovations)
    for g_, w_ in zip((got.rho, got.calA, got.B, got.A), want):
        assert g_ == pytest.approx(w_, rel=1e-9)


def test_cls_errors_default_innovations_on_moderate_paths():
    # innovations recomputed from the float path carry an error of order ulp(X_n)
    d = derive(PURE)
    path = simulate(PURE, 40, "exact_pure_immigration", make_rng(40))
    want, _ = _mp_errors(path.values, d.rho, d.calA)
    got = cls_errors(path, d.rho, d.calA)
    for g_, w_ in zip((got.rho, got.calA, got.B, got.A), want):
        assert g_ == pytest.approx(w_, rel=1e-6)


def test_cls_errors_agree_with_subtraction_on_short_paths():
    d = derive(PURE)
    path = simulate(PURE, 15, "exact_pure_immigration", make_rng(3))
    got = cls_errors(path, d.rho, d.calA)
    _, rho_hat, calA_hat = cls(path)
    assert got.rho == pytest.approx(rho_hat - d.rho, rel=1e-6)
    assert got.calA == pytest.approx(calA_hat - d.calA, rel=1e-6)


def test_cls_errors_resolve_what_subtraction_cannot():
    d = derive(PURE)
    path = simulate(PURE, 400, "exact_pure_immigration", make_rng(11))
    err = cls_errors(path, d.rho, d.calA, path.innovations)
    _, rho_hat, _ = cls(path)
    # the error is far below one ulp of rho, so subtraction returns 0 or a multiple of ulp
    assert abs(err.rho) < math.ulp(d.rho)
    assert err.rho != 0.0
    assert np.isfinite(err.A)


def test_cls_errors_undefined_off_hn():
    with pytest.raises(UndefinedEstimator):
        cls_errors(np.array([1.0, 1.0, 1.0, 4.0]), 1.0, 0.0)


def test_cls_errors_reject_wrong_innovation_length():
    with pytest.raises(ValueError):
        cls_errors(np.array([0.0, 1.0, 1.0, 2.0]), 1.0, 0.0, innovations=[1.0, 0.0])


# ---- partial sums ------------------------------------------------------------------------


def test_partial_sums_deterministic_path():
    B, n = 0.2, 200
    values = np.exp(B * np.arange(n + 1))
    ratios = partial_sum_limits_check(values, B)
    for key, value in ratios.items():
        assert value == pytest.approx(1.0, abs=1e-8), key


def test_partial_sums_zero_path_undefined():
    with pytest.raises(UndefinedEstimator):
        partial_sum_limits_check(np.zeros(10), 0.2)


def test_partial_sums_need_positive_B():
    with pytest.raises(ValueError):
        partial_sum_limits_check(np.ones(5), 0.0)


def test_partial_sums_simulated_path():
    path = simulate(PURE, 300, "exact_pure_immigration", make_rng(4))
    ratios = partial_sum_limits_check(path, 0.2)
    assert max(abs(v - 1.0) for v in ratios.values()) <= 0.02


# ---- estimate ----------------------------------------------------------------------------


def test_estimate_full_result():
    v = np.array([1.0, 2.0, 4.0, 8.0])
    res = estimate(v, derive(CbiParams(b=math.log(2.0))))
    assert res.hn_holds and res.rho_hat == 2.0 and res.B_hat == pytest.approx(math.log(2.0))
    assert res.wcls_B == pytest.approx(math.log(2.0))
    assert res.U1 == 0.0 and res.U2 == 0.0
    assert res.w_hat == pytest.approx(1.0, rel=1e-12)
    d = res.to_dict()
    assert d["residuals"] == [0.0, 0.0, 0.0]


def test_estimate_off_hn():
    res = estimate(np.array([3.0, 3.0, 3.0, 7.0]))
    assert not res.hn_holds
    assert res.rho_hat is None and res.B_hat is None and res.wcls_B is None


def test_estimate_negative_rho_hat_has_no_B_hat():
    res = estimate(np.array([0.0, 5.0, 0.0, 5.0, 0.0]))
    assert res.hn_holds and res.rho_hat < 0 and res.B_hat is None and res.A_hat is None


def test_estimate_without_params_skips_weighted_fit():
    res = estimate(np.array([0.0, 1.0, 1.0, 2.0]))
    assert res.wcls_B is None and res.wcls_a is None and res.wcls_A is None
