"""Conditional least squares estimators and the martingale sums around them.

The CLS fit regresses ``X_k`` on ``X_{k-1}`` with intercept, giving
``(rho_hat, calA_hat)``, which map to ``(B_hat, A_hat)`` through
``B = log rho``, ``A = calA / int_0^1 rho^s ds``.  The weighted fit uses
weights ``1 / (X_{k-1} + 1)``.

Sums run over data rescaled by a common power of two (exact in binary
floating point) with compensated summation, so paths growing like ``e^{Bn}``
neither overflow nor lose the centered second moment.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .jump_measures import exprel
from .model import DerivedParams

__all__ = [
    "ClsErrors",
    "EstimateResult",
    "IllConditionedWarning",
    "UndefinedEstimator",
    "cls",
    "cls_BA",
    "cls_errors",
    "estimate",
    "partial_sum_limits_check",
    "residuals_and_sums",
    "wcls",
]


class UndefinedEstimator(ArithmeticError):
    """The estimator does not exist for this sample (a value, not a numerical failure)."""


class IllConditionedWarning(RuntimeWarning):
    pass


def _values(path) -> np.ndarray:
    values = getattr(path, "values", path)
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need observations X_0..X_n with n >= 1")
    return values


def _pow2_scale(values: np.ndarray) -> int:
    """Exponent ``e`` with ``max|values| * 2**-e`` in [0.5, 1)."""
    top = float(np.max(np.abs(values)))
    return math.frexp(top)[1] if top > 0 else 0


def _centered(values: np.ndarray):
    """Centered regression sums on rescaled data; returns (e, xbar, ybar, sxx, sxy) with x, y scaled by 2**-e."""
    e = _pow2_scale(values)
    scaled = np.ldexp(values, -e)
    return (e,) + tuple(_kernels.centered_cross(scaled[:-1], scaled[1:]))


def _holds_hn(values: np.ndarray) -> bool:
    x = values[:-1]
    return not bool(np.all(x == x[0]))


def _warn_conditioning(xbar: float, sxx: float, n: int):
    if sxx / n < 1e-10 * xbar * xbar:
        warnings.warn(
            f"centered second moment {sxx / n:.3e} is below 1e-10 * mean^2; the CLS fit is ill-conditioned",
            IllConditionedWarning,
            stacklevel=3,
        )


def cls(path):
    """CLS estimates of ``(rho, calA)``.

    Returns ``(hn, rho_hat, calA_hat)``; off the existence event (``X_0 = ... =
    X_{n-1}``) returns ``(False, None, None)``.
    """
    values = _values(path)
    if not _holds_hn(values):
        return False, None, None
    e, xbar, ybar, sxx, sxy = _centered(values)
    n = values.size - 1
    _warn_conditioning(xbar, sxx, n)
    rho_hat = sxy / sxx
    calA_hat = math.ldexp(ybar - rho_hat * xbar, e)
    return True, rho_hat, calA_hat


def _g(r: float) -> float:
    """``log r / (r - 1)``, the reciprocal of ``int_0^1 r^s ds``; equals 1 at r = 1."""
    return 1.0 / float(exprel(math.log(r)))


def cls_BA(rho_hat: float, calA_hat: float):
    """Map ``(rho_hat, calA_hat)`` to ``(B_hat, A_hat)``; raises ``UndefinedEstimator`` if ``rho_hat <= 0``."""
    if not rho_hat > 0:
        raise UndefinedEstimator(f"rho_hat = {rho_hat} is not positive; B_hat is undefined")
    return math.log(rho_hat), calA_hat * _g(rho_hat)


def wcls(path, d: DerivedParams | float):
    """Weighted CLS estimates ``(B_tilde, a_tilde, A_tilde)`` with weights ``1/(X_{k-1}+1)``.

    ``d`` supplies the known immigration mean ``int r nu(dr)`` (a DerivedParams
    or the number itself); ``a_tilde = A_tilde - int r nu(dr)``.
    """
    values = _values(path)
    nu_mean = d.nu_mean if isinstance(d, DerivedParams) else float(d)
    x, y = values[:-1], values[1:]
    n = x.size
    if np.all(x == x[0]):
        raise UndefinedEstimator("weighted CLS denominator vanishes for constant data")
    s = _kernels.neumaier_sum
    w = 1.0 / (x + 1.0)
    sw, sy = s(w), s(y)
    num = sy * sw - n * s(y * w)
    den = s(x + 1.0) * sw - n * n
    if not den > 0:
        raise UndefinedEstimator(f"weighted CLS denominator {den} is not positive")
    ratio = num / den
    if not ratio > 0:
        raise UndefinedEstimator(f"weighted CLS log argument {ratio} is not positive")
    B_t = math.log(ratio)
    A_t = (sy - ratio * s(x)) / n / float(exprel(B_t))
    return B_t, A_t - nu_mean, A_t


def residuals_and_sums(path, rho: float, calA: float):
    """``M_k = X_k - rho X_{k-1} - calA`` with ``U1 = sum M_k`` and ``U2 = sum M_k X_{k-1}``."""
    values = _values(path)
    x, y = values[:-1], values[1:]
    M = y - rho * x - calA
    return M, _kernels.neumaier_sum(M), _kernels.neumaier_sum(M * x)


def partial_sum_limits_check(path, B: float) -> dict:
    """Empirical ratios that tend to 1 for a supercritical path.

    With ``w_hat = e^{-Bn} X_n`` these are ``e^{-lBn} sum X_{k-1}^l (e^{lB}-1) /
    w_hat^l`` for l = 1, 2, 3 and ``e^{-2Bn} sum X_{k-1} X_k (e^{2B}-1) / (e^B
    w_hat^2)``; every ``e^{Bn}`` factor cancels against ``w_hat``, so they are
    computed from ``X_k / X_n``.
    """
    if not B > 0:
        raise ValueError(f"B must be positive, got {B}")
    values = _values(path)
    last = values[-1]
    if not last > 0:
        raise UndefinedEstimator("X_n = 0, so the plug-in limit w_hat vanishes")
    r = values / last
    x, y = r[:-1], r[1:]
    s = _kernels.neumaier_sum
    return {
        "l1": s(x) * math.expm1(B),
        "l2": s(x * x) * math.expm1(2 * B),
        "l3": s(x * x * x) * math.expm1(3 * B),
        "cross": s(x * y) * math.expm1(2 * B) / math.exp(B),
    }


@dataclass(frozen=True)
class ClsErrors:
    """CLS estimation errors ``rho_hat - rho``, ``calA_hat - calA``, ``B_hat - B``, ``A_hat - A``.

    ``B`` and ``A`` are None when ``rho_hat <= 0``.
    """

    rho: float
    calA: float
    B: float | None
    A: float | None


def cls_errors(path, rho: float, calA: float, innovations=None) -> ClsErrors:
    """Estimation errors computed from the innovations rather than by subtraction.

    On a path growing like ``e^{Bn}``, ``rho_hat - rho`` is of order
    ``e^{-Bn}`` (or ``e^{-Bn/2}``) while ``rho_hat`` itself is only known to
    float64 precision; subtracting would return rounding noise.  Since the fit
    is linear in the responses, ``rho_hat - rho = sum (X_{k-1} - xbar) M_k / Sxx``
    and ``calA_hat - calA = mean(M) - (rho_hat - rho) xbar`` hold exactly, and
    they only involve the innovations ``M_k``.  ``innovations`` defaults to
    ``X_k - rho X_{k-1} - calA``, which is exact whenever the path itself is.

    Raises ``UndefinedEstimator`` off the existence event.
    """
    values = _values(path)
    if not _holds_hn(values):
        raise UndefinedEstimator("X_0 = ... = X_{n-1}: CLS estimator does not exist")
    if innovations is None:
        innovations, _, _ = residuals_and_sums(values, rho, calA)
    M = np.asarray(innovations, dtype=float)
    x = values[:-1]
    if M.shape != x.shape:
        raise ValueError("need one innovation per step")
    e = _pow2_scale(x)
    xs = np.ldexp(x, -e)
    xbar, mbar, sxx, sxm = _kernels.centered_cross(xs, M)
    _warn_conditioning(xbar, sxx, x.size)
    # sxm is scaled by 2**-e and sxx by 2**-2e
    d_rho = math.ldexp(sxm / sxx, -e)
    d_calA = mbar - math.ldexp(d_rho * xbar, e)
    rho_hat = rho + d_rho
    if not rho_hat > 0:
        return ClsErrors(d_rho, d_calA, None, None)
    d_B = math.log1p(d_rho / rho)
    g_hat = _g(rho_hat)
    if rho_hat == 1.0 or rho == 1.0:
        d_g = g_hat - _g(rho)
    else:
        # g(rho_hat) - g(rho) without cancellation: log rho_hat = log rho + d_B
        d_g = (d_B * (rho - 1.0) - math.log(rho) * d_rho) / ((rho_hat - 1.0) * (rho - 1.0))
    d_A = d_calA * g_hat + calA * d_g
    return ClsErrors(d_rho, d_calA, d_B, d_A)


@dataclass(frozen=True)
class EstimateResult:
    hn_holds: bool
    rho_hat: float | None
    calA_hat: float | None
    B_hat: float | None
    A_hat: float | None
    wcls_B: float | None
    wcls_a: float | None
    wcls_A: float | None
    residuals: np.ndarray = field(repr=False)
    U1: float | None
    U2: float | None
    w_hat: float | None

    def to_dict(self) -> dict:
        out = {}
        for key in self.__dataclass_fields__:
            value = getattr(self, key)
            if isinstance(value, np.ndarray):
                value = value.tolist()
            out[key] = value
        return out


def estimate(path, d: DerivedParams | None = None) -> EstimateResult:
    """All estimators for one path.

    Without ``d`` the weighted fit is skipped (it needs the immigration mean).
    ``w_hat = e^{-B_hat n} X_n`` uses the estimated growth rate.
    """
    values = _values(path)
    n = values.size - 1
    hn, rho_hat, calA_hat = cls(values)
    B_hat = A_hat = None
    residuals, U1, U2 = np.empty(0), None, None
    if hn:
        residuals, U1, U2 = residuals_and_sums(values, rho_hat, calA_hat)
        try:
            B_hat, A_hat = cls_BA(rho_hat, calA_hat)
        except UndefinedEstimator:
            pass
    wB = wa = wA = None
    if d is not None:
        try:
            wB, wa, wA = wcls(values, d)
        except UndefinedEstimator:
            pass
    w_hat = None
    if B_hat is not None:
        w_hat = 0.0 if values[-1] == 0 else math.exp(math.log(values[-1]) - B_hat * n)
    return EstimateResult(hn, rho_hat, calA_hat, B_hat, A_hat, wB, wa, wA, residuals, U1, U2, w_hat)
