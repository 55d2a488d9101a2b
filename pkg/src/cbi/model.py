"""Admissible CBI parameters and every derived constant built from them.

The process solves

    dX_t = (a + B X_t) dt + sqrt(2 c X_t^+) dW_t + (branching jumps, mu) + (immigration jumps, nu)

and observed at integer times satisfies ``X_k = rho X_{k-1} + calA + M_k`` with
martingale differences ``M_k``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .jump_measures import JumpMeasure, exprel

__all__ = [
    "CbiParams",
    "Criticality",
    "DerivedParams",
    "LimitMatrices",
    "LimitVariances",
    "derive",
    "limit_matrices",
    "limit_variances",
    "supercriticality",
]


def _phi(x: float) -> float:
    """``int_0^1 exp(x u) du``; equals 1 at x = 0."""
    return float(exprel(x))


@dataclass(frozen=True)
class CbiParams:
    """Admissible parameter tuple ``(c, a, b, nu, mu)`` and deterministic ``x0``."""

    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    nu: JumpMeasure = JumpMeasure()
    mu: JumpMeasure = JumpMeasure()
    x0: float = 0.0

    def __post_init__(self):
        for name in ("c", "a", "b", "x0"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.c < 0 or self.a < 0:
            raise ValueError(f"admissibility requires c >= 0 and a >= 0, got c={self.c}, a={self.a}")
        if self.x0 < 0:
            raise ValueError(f"initial value must be nonnegative, got {self.x0}")
        if not isinstance(self.nu, JumpMeasure) or not isinstance(self.mu, JumpMeasure):
            raise TypeError("nu and mu must be JumpMeasure instances")

    @property
    def has_branching_noise(self) -> bool:
        return self.c > 0 or not self.mu.is_zero()

    def replace(self, **changes) -> "CbiParams":
        d = {"c": self.c, "a": self.a, "b": self.b, "nu": self.nu, "mu": self.mu, "x0": self.x0}
        d.update(changes)
        return CbiParams(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "CbiParams":
        unknown = set(d) - {"c", "a", "b", "nu", "mu", "x0"}
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        return cls(
            c=float(d.get("c", 0.0)),
            a=float(d.get("a", 0.0)),
            b=float(d["b"]),
            nu=JumpMeasure.from_dict(d.get("nu")),
            mu=JumpMeasure.from_dict(d.get("mu")),
            x0=float(d.get("x0", 0.0)),
        )

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "a": self.a,
            "b": self.b,
            "nu": self.nu.to_dict(),
            "mu": self.mu.to_dict(),
            "x0": self.x0,
        }


class Criticality(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class DerivedParams:
    """Closed-form constants of a CBI model.

    ``nu_mean`` and ``nu_second_moment`` are the first two moments of the
    immigration measure; they enter the weighted estimator and the C = 0 limits.
    """

    B: float
    A: float
    C: float
    rho: float
    calA: float
    V: float
    V0: float
    tau: float
    nu_mean: float
    nu_second_moment: float

    def to_dict(self) -> dict:
        return asdict(self)


def derive(p: CbiParams) -> DerivedParams:
    B = p.b + p.mu.excess_over_one()
    A = p.a + p.nu.moment(1)
    C = 2.0 * p.c + p.mu.moment(2)
    m2 = p.nu.moment(2)
    e_b = math.exp(B)
    phi1 = _phi(B)
    # int_0^1 e^{B(1+u)} du = e^B (e^B - 1) / B
    V = C * e_b * phi1
    # int_0^1 (int_0^{1-u} e^{Bv} dv) e^{2Bu} du = ((e^B - 1)/B)^2 / 2
    V0 = m2 * _phi(2.0 * B) + A * C * 0.5 * phi1 * phi1
    return DerivedParams(
        B=B,
        A=A,
        C=C,
        rho=e_b,
        calA=A * phi1,
        V=V,
        V0=V0,
        tau=V,
        nu_mean=p.nu.moment(1),
        nu_second_moment=m2,
    )


def supercriticality(d: DerivedParams) -> Criticality:
    if d.B > 0:
        return Criticality.SUPERCRITICAL
    if d.B < 0:
        return Criticality.SUBCRITICAL
    return Criticality.CRITICAL


@dataclass(frozen=True)
class LimitMatrices:
    S: np.ndarray
    S_tilde: np.ndarray
    R: np.ndarray
    kappa: np.ndarray


def _require_supercritical(B: float):
    if not B > 0:
        raise ValueError(f"limit theory needs a supercritical model (B > 0), got B={B}")


def limit_matrices(d: DerivedParams, w: float) -> LimitMatrices:
    """Random covariance matrices of the mixed-normal limits, evaluated at ``w``.

    ``S`` belongs to the (B, A) estimator, ``S_tilde`` to (rho, calA), and ``R``
    to the martingale pair (sum M_k, sum M_k X_{k-1}); ``kappa`` is the lower
    triangular factor with ``kappa @ kappa.T == R``.
    """
    _require_supercritical(d.B)
    if not w > 0:
        raise ValueError(f"w must be positive, got {w}")
    B = d.B
    e1, e2, e3 = math.expm1(B), math.expm1(2 * B), math.expm1(3 * B)
    eb = math.exp(B)
    off = -eb * e1 / e3
    S = np.array(
        [
            [e1 * e2 * e2 / (B * eb * e3) / w, off],
            [off, B * eb * eb / (e1 * e3) * w],
        ]
    )
    S_tilde = np.array([[e2 * e2 / e3 / w, off], [off, eb / e3 * w]])
    R = np.array([[w / e1, w * w / e2], [w * w / e2, w**3 / e3]])
    kappa = np.array(
        [
            [math.sqrt(w / e1), 0.0],
            [math.sqrt(e1 * w**3) / e2, math.sqrt(eb * w**3 / e3) * e1 / e2],
        ]
    )
    return LimitMatrices(S=S, S_tilde=S_tilde, R=R, kappa=kappa)


@dataclass(frozen=True)
class LimitVariances:
    """Variances of the normal limits of the randomly scaled pivots (and C = 0 laws)."""

    cls_B: float
    cls_A: float
    wcls_B: float
    wcls_A: float
    c0_B_series_scale: float
    c0_A: float

    def to_dict(self) -> dict:
        return asdict(self)


def limit_variances(d: DerivedParams) -> LimitVariances:
    _require_supercritical(d.B)
    B, C = d.B, d.C
    e1, e2, e3 = math.expm1(B), math.expm1(2 * B), math.expm1(3 * B)
    eb = math.exp(B)
    return LimitVariances(
        cls_B=C * e2 * e2 / (B * eb * e3),
        cls_A=C * B * eb * eb / e3,
        wcls_B=C * e1 / (B * eb),
        wcls_A=4.0 * C * B * eb / e1,
        c0_B_series_scale=-math.expm1(-2 * B),
        c0_A=B * e2 / (2.0 * e1 * e1) * d.nu_second_moment,
    )
