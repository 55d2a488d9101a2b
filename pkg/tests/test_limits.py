import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbi.affine import char_M1
from cbi.harness import empirical_charfn
from cbi.jump_measures import JumpMeasure
from cbi.limits import (
    LimitKind,
    LimitLawSpec,
    normal_limit_params,
    sample_limit,
    sample_mixed_normal,
    sample_series_C0,
    sample_Z1,
    series_truncation_index,
    sqrtm_spd2,
)
from cbi.model import CbiParams, derive, limit_matrices
from cbi.rng import make_rng

CIR = CbiParams(c=0.5, a=1.0, b=0.3, x0=1.0)
PURE = CbiParams(b=0.2, nu=JumpMeasure.atom(1.0, 1.0), x0=1.0)
PURE_EXP = CbiParams(b=0.5, nu=JumpMeasure.exponential(2.0, 1.5), x0=1.0)
DRAWS = 100_000


def _assert_covariance(draws, cov):
    """Entrywise comparison of the sample covariance with ``cov`` within 3 standard errors."""
    sample = np.cov(draws, rowvar=False)
    n = draws.shape[0]
    for i in range(2):
        for j in range(2):
            se = math.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / n)
            assert abs(sample[i, j] - cov[i, j]) <= 3 * se, (i, j, sample, cov)


# ---- matrix square root ------------------------------------------------------------------


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2))
def test_sqrtm_spd2_squares_back(a, b, c, ridge):
    L = np.array([[a, 0.0], [b, c]])
    m = L @ L.T + ridge * np.eye(2)
    root = sqrtm_spd2(m)
    np.testing.assert_allclose(root, root.T, atol=1e-12)
    np.testing.assert_allclose(root @ root, m, atol=1e-9 * max(1.0, np.abs(m).max()))


def test_sqrtm_spd2_zero_matrix():
    np.testing.assert_array_equal(sqrtm_spd2(np.zeros((2, 2))), np.zeros((2, 2)))


# ---- mixed normals -----------------------------------------------------------------------


def test_mixed_normal_degenerate_without_branching_noise():
    spec = LimitLawSpec("mixed_normal_S", derive(PURE), 1.0)
    draws = sample_mixed_normal(spec, make_rng(0), 100)
    np.testing.assert_array_equal(draws, 0.0)
    np.testing.assert_array_equal(sample_mixed_normal(spec, make_rng(0)), [0.0, 0.0])


@pytest.mark.parametrize(
    "kind, attr, factor",
    [("mixed_normal_S", "S", "C"), ("mixed_normal_Stilde", "S_tilde", "V"), ("mixed_normal_R", "R", "V")],
)
def test_mixed_normal_covariance_at_fixed_w(kind, attr, factor):
    d = derive(CIR)
    w = 1.7
    draws = sample_mixed_normal(LimitLawSpec(kind, d, w), make_rng(1), DRAWS)
    _assert_covariance(draws, getattr(d, factor) * getattr(limit_matrices(d, w), attr))


def test_mixed_normal_R_matches_kappa_factor():
    d = derive(CIR)
    lm = limit_matrices(d, 0.8)
    draws = sample_mixed_normal(LimitLawSpec("mixed_normal_R", d, 0.8), make_rng(2), DRAWS)
    _assert_covariance(draws, d.V * lm.kappa @ lm.kappa.T)
    via_kappa = make_rng(3).standard_normal((DRAWS, 2)) @ (math.sqrt(d.V) * lm.kappa).T
    _assert_covariance(via_kappa, d.V * lm.R)


def test_mixed_normal_plug_in_w_cycles():
    d = derive(CIR)
    draws = sample_mixed_normal(LimitLawSpec("mixed_normal_S", d, np.array([0.5, 3.0])), make_rng(4), DRAWS)
    _assert_covariance(draws[0::2], d.C * limit_matrices(d, 0.5).S)
    _assert_covariance(draws[1::2], d.C * limit_matrices(d, 3.0).S)


@pytest.mark.parametrize("w", [0.0, -1.0, np.array([1.0, 0.0])])
def test_limit_law_rejects_nonpositive_w(w):
    with pytest.raises(ValueError):
        LimitLawSpec("mixed_normal_S", derive(CIR), w)


def test_limit_law_requires_supercritical():
    with pytest.raises(ValueError):
        LimitLawSpec("mixed_normal_S", derive(CIR.replace(b=-0.1)), 1.0)


def test_series_law_needs_zero_branching_noise_and_nu():
    with pytest.raises(ValueError):
        LimitLawSpec("series_C0", derive(CIR), 1.0, nu=CIR.nu)
    with pytest.raises(ValueError):
        LimitLawSpec("series_C0", derive(PURE), 1.0)


# ---- Z1 ----------------------------------------------------------------------------------


@pytest.mark.parametrize("p", [PURE, PURE_EXP], ids=["atom", "exponential"])
def test_Z1_mean_and_variance(p):
    d = derive(p)
    z = sample_Z1(d, p.nu, make_rng(5), DRAWS)
    se = z.std(ddof=1) / math.sqrt(z.size)
    assert abs(z.mean()) <= 3 * se
    target = p.nu.moment(2) * math.expm1(2 * d.B) / (2 * d.B)
    c = z - z.mean()
    se_var = math.sqrt((np.mean(c**4) - np.var(c) ** 2) / z.size)
    assert abs(z.var(ddof=1) - target) <= 3 * se_var


@pytest.mark.parametrize("p", [PURE, PURE_EXP], ids=["atom", "exponential"])
def test_Z1_characteristic_function(p):
    z = sample_Z1(derive(p), p.nu, make_rng(6), DRAWS)
    theta = np.linspace(-5.0, 5.0, 101)
    assert np.max(np.abs(empirical_charfn(z, theta) - char_M1(p, theta))) <= 0.01


def test_Z1_requires_zero_branching_noise():
    with pytest.raises(ValueError):
        sample_Z1(derive(CIR), CIR.nu, make_rng(0), 10)


def test_Z1_scalar_draw():
    assert isinstance(sample_Z1(derive(PURE), PURE.nu, make_rng(0)), float)


# ---- series ------------------------------------------------------------------------------


def test_truncation_index_example():
    J = series_truncation_index(0.2, 1.23, 1e-4)
    assert J == 49
    tail = lambda j: math.sqrt(1.23) * math.exp(-0.2 * (j + 1)) / math.sqrt(-math.expm1(-0.4))
    assert tail(J) <= 1e-4 < tail(J - 1)


@given(st.floats(0.01, 3.0), st.floats(1e-6, 1e3), st.floats(1e-8, 1e-1))
def test_truncation_index_is_minimal(B, var_z1, tol):
    J = series_truncation_index(B, var_z1, tol)
    tail = lambda j: math.sqrt(var_z1) * math.exp(-B * (j + 1)) / math.sqrt(-math.expm1(-2 * B))
    assert tail(J) <= tol * (1 + 1e-9)
    if J > 0:
        assert tail(J - 1) > tol * (1 - 1e-9)


def test_truncation_index_rejects_bad_input():
    with pytest.raises(ValueError):
        series_truncation_index(0.0, 1.0, 1e-4)
    with pytest.raises(ValueError):
        series_truncation_index(0.2, 1.0, 0.0)


def test_series_without_immigration_is_zero():
    p = CbiParams(b=0.2)
    draws = sample_series_C0(derive(p), p.nu, 1.0, 1e-4, make_rng(0), 50)
    np.testing.assert_array_equal(draws, 0.0)


@pytest.mark.parametrize("p", [PURE, PURE_EXP], ids=["atom", "exponential"])
def test_series_variance(p):
    d = derive(p)
    s = sample_series_C0(d, p.nu, 1.0, 1e-4, make_rng(7), DRAWS)
    var_z1 = p.nu.moment(2) * math.expm1(2 * d.B) / (2 * d.B)
    scale = -math.expm1(-2 * d.B)
    target = scale**2 * var_z1 / scale
    c = s - s.mean()
    se_var = math.sqrt((np.mean(c**4) - np.var(c) ** 2) / s.size)
    assert abs(s.var(ddof=1) - target) <= 3 * se_var
    assert abs(s.mean()) <= 3 * s.std() / math.sqrt(s.size)


def test_series_scales_inversely_with_w():
    d = derive(PURE)
    a = sample_series_C0(d, PURE.nu, 1.0, 1e-4, make_rng(8), 100)
    b = sample_series_C0(d, PURE.nu, 4.0, 1e-4, make_rng(8), 100)
    np.testing.assert_allclose(b, a / 4.0, rtol=1e-15)


def test_series_truncation_doubling():
    # doubling J adds terms whose variance is bounded by the tail tolerance
    d, tol, m = derive(PURE), 1e-4, 10_000
    var_z1 = PURE.nu.moment(2) * math.expm1(2 * d.B) / (2 * d.B)
    J = series_truncation_index(d.B, var_z1, tol)
    z = sample_Z1(d, PURE.nu, make_rng(9), m * 2 * (J + 1)).reshape(m, 2 * (J + 1))
    weights = np.exp(-d.B * np.arange(2 * (J + 1)))
    scale = -math.expm1(-2 * d.B)
    head = scale * (z[:, : J + 1] * weights[: J + 1]).sum(axis=1)
    full = scale * (z * weights).sum(axis=1)
    assert np.var(full - head) < 2 * tol**2


def test_series_scalar_draw():
    assert isinstance(sample_series_C0(derive(PURE), PURE.nu, 1.0, 1e-3, make_rng(0)), float)


# ---- normal limits -----------------------------------------------------------------------


def test_normal_limits_without_immigration_vanish():
    d = derive(CbiParams(b=0.3))
    assert normal_limit_params(d, "N1") == 0.0
    assert normal_limit_params(d, "Ntilde1") == 0.0


@pytest.mark.parametrize("p", [PURE, PURE_EXP], ids=["atom", "exponential"])
def test_Ntilde1_variance_is_V0(p):
    d = derive(p)
    assert normal_limit_params(d, "Ntilde1") == pytest.approx(d.V0, rel=1e-14)


@given(st.floats(0.01, 3.0), st.floats(0.1, 5.0))
def test_N1_to_Ntilde1_ratio(B, size):
    d = derive(CbiParams(b=B, nu=JumpMeasure.atom(1.0, size)))
    ratio = normal_limit_params(d, "N1") / normal_limit_params(d, "Ntilde1")
    assert ratio == pytest.approx((B / math.expm1(B)) ** 2, rel=1e-12)


def test_normal_limits_need_zero_branching_noise():
    with pytest.raises(ValueError):
        normal_limit_params(derive(CIR), "N1")
    with pytest.raises(ValueError):
        normal_limit_params(derive(PURE), "N2")


def test_sample_limit_normal_variance():
    d = derive(PURE)
    draws = sample_limit(LimitLawSpec("normal_N1", d), make_rng(10), DRAWS)
    target = normal_limit_params(d, "N1")
    assert draws.var() == pytest.approx(target, rel=0.02)


# ---- determinism -------------------------------------------------------------------------


@pytest.mark.parametrize("kind", [k.value for k in LimitKind])
def test_samplers_are_reproducible(kind):
    p = CIR if kind.startswith("mixed") else PURE
    spec = LimitLawSpec(kind, derive(p), 1.3, nu=p.nu)
    a = sample_limit(spec, make_rng(11), 500)
    b = sample_limit(spec, make_rng(11), 500)
    np.testing.assert_array_equal(a, b)
    assert a.shape == ((500, 2) if kind.startswith("mixed") else (500,))
