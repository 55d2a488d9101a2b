"""Samplers and parameters of the limit laws of the normalized CLS errors.

With branching noise (C > 0) the limits are normal mixtures whose covariance is
a matrix function of the growth limit ``w`` (see ``model.limit_matrices``).
Without it (C = 0) the error of ``B_hat`` converges, after scaling by
``e^{Bn}``, to a geometric series of i.i.d. compensated compound-Poisson
variables ``Z_j``, and the error of ``A_hat`` is normal.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .jump_measures import JumpMeasure, exprel
from .model import DerivedParams, limit_matrices
from .rng import make_rng

__all__ = [
    "LimitKind",
    "LimitLawSpec",
    "normal_limit_params",
    "sample_limit",
    "sample_mixed_normal",
    "sample_series_C0",
    "sample_Z1",
    "series_truncation_index",
    "sqrtm_spd2",
]


class LimitKind(str, enum.Enum):
    MIXED_NORMAL_S = "mixed_normal_S"
    MIXED_NORMAL_STILDE = "mixed_normal_Stilde"
    MIXED_NORMAL_R = "mixed_normal_R"
    SERIES_C0 = "series_C0"
    NORMAL_N1 = "normal_N1"
    NORMAL_NTILDE1 = "normal_Ntilde1"


@dataclass(frozen=True, eq=False)
class LimitLawSpec:
    """A limit law together with where its ``w`` comes from.

    ``w`` is either a positive number (fixed) or an array of plug-in values;
    draw ``i`` then uses ``w[i % len(w)]``.
    """

    kind: LimitKind
    d: DerivedParams
    w: float | np.ndarray = 1.0
    nu: JumpMeasure | None = None
    tol: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "kind", LimitKind(self.kind))
        if not self.d.B > 0:
            raise ValueError(f"limit laws need B > 0, got B={self.d.B}")
        w = np.asarray(self.w, dtype=float)
        if w.size == 0 or np.any(~(w > 0)):
            raise ValueError("w must be positive")
        if self.kind is LimitKind.SERIES_C0:
            _require_c0(self.d)
            if self.nu is None:
                raise ValueError("series_C0 needs the immigration measure")


def _require_c0(d: DerivedParams):
    if d.C != 0:
        raise ValueError(f"this limit law exists only for C = 0, got C={d.C}")


def _w_draws(w, size: int) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w, dtype=float))
    return np.resize(w, size)


def sqrtm_spd2(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of 2x2 symmetric positive semidefinite matrices (shape (..., 2, 2)).

    Uses ``sqrt(M) = (M + s I) / t`` with ``s = sqrt(det M)``, ``t = sqrt(tr M + 2 s)``.
    """
    m = np.asarray(m, dtype=float)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    s = np.sqrt(np.maximum(det, 0.0))
    t = np.sqrt(m[..., 0, 0] + m[..., 1, 1] + 2.0 * s)
    out = m + s[..., None, None] * np.eye(2)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(t[..., None, None] > 0, out / t[..., None, None], 0.0)
    return out


def sample_mixed_normal(spec: LimitLawSpec, rng, size: int | None = None) -> np.ndarray:
    """Draws of ``M(w)^{1/2} N`` with ``N`` standard bivariate normal; shape (2,) or (size, 2).

    ``M(w)`` is ``C S(w)``, ``V S_tilde(w)`` or ``V R(w)`` by ``spec.kind``.
    """
    rng = make_rng(rng)
    m = 1 if size is None else int(size)
    d = spec.d
    kind = spec.kind
    if kind is LimitKind.MIXED_NORMAL_S:
        attr, factor = "S", d.C
    elif kind is LimitKind.MIXED_NORMAL_STILDE:
        attr, factor = "S_tilde", d.V
    elif kind is LimitKind.MIXED_NORMAL_R:
        attr, factor = "R", d.V
    else:
        raise ValueError(f"{kind.value} is not a mixed-normal law")
    normals = rng.standard_normal((m, 2))
    if factor == 0:
        out = np.zeros((m, 2))
    else:
        w = _w_draws(spec.w, m)
        uniq, inverse = np.unique(w, return_inverse=True)
        mats = np.stack([getattr(limit_matrices(d, wi), attr) for wi in uniq]) * factor
        roots = sqrtm_spd2(mats)[inverse]
        out = np.einsum("kij,kj->ki", roots, normals)
    return out[0] if size is None else out


def sample_Z1(d: DerivedParams, nu: JumpMeasure, rng, size: int | None = None):
    """``sum_{i<=K} r_i e^{B U_i} - int r nu(dr) (e^B - 1)/B`` with ``K ~ Poisson(nu total mass)``."""
    _require_c0(d)
    rng = make_rng(rng)
    m = 1 if size is None else int(size)
    comp = nu.moment(1) * float(exprel(d.B))
    if nu.is_zero():
        out = np.zeros(m)
    else:
        counts = rng.poisson(nu.total_mass(), m)
        total = int(counts.sum())
        sizes = nu.sample(rng, total)
        lifts = np.exp(d.B * rng.random(total))
        owner = np.repeat(np.arange(m), counts)
        out = np.bincount(owner, weights=sizes * lifts, minlength=m) - comp
    return float(out[0]) if size is None else out


def series_truncation_index(B: float, var_z1: float, tol: float) -> int:
    """Smallest ``J >= 0`` with ``sqrt(var_z1) e^{-B(J+1)} / sqrt(1 - e^{-2B}) <= tol``."""
    if not (B > 0 and tol > 0):
        raise ValueError("need B > 0 and tol > 0")
    if var_z1 <= 0:
        return 0
    head = 0.5 * math.log(var_z1) - math.log(tol) - 0.5 * math.log(-math.expm1(-2 * B))
    return max(0, math.ceil(head / B - 1.0 - 1e-12))


def sample_series_C0(d: DerivedParams, nu: JumpMeasure, w, tol: float, rng, size: int | None = None):
    """``(1 - e^{-2B}) w^{-1} sum_{j=0}^J e^{-Bj} Z_j`` with the tail standard deviation below ``tol``.

    ``w`` may be an array of plug-in values, cycled over the draws.
    """
    _require_c0(d)
    if not d.B > 0:
        raise ValueError("need B > 0")
    rng = make_rng(rng)
    m = 1 if size is None else int(size)
    var_z1 = nu.moment(2) * float(exprel(2 * d.B))
    J = series_truncation_index(d.B, var_z1, tol)
    weights = np.exp(-d.B * np.arange(J + 1))
    z = sample_Z1(d, nu, rng, m * (J + 1)).reshape(m, J + 1)
    # elementwise product and row sums rather than a BLAS matvec: reproducible bit for bit
    series = (z * weights).sum(axis=1)
    out = -math.expm1(-2 * d.B) / _w_draws(w, m) * series
    return float(out[0]) if size is None else out


def normal_limit_params(d: DerivedParams, which: str) -> float:
    """Variance of ``N1`` (limit of ``n^{1/2}(A_hat - A)``) or ``Ntilde1`` (the weighted analogue), C = 0."""
    _require_c0(d)
    B, m2 = d.B, d.nu_second_moment
    if which == "N1":
        e1 = math.expm1(B)
        return B * math.expm1(2 * B) / (2.0 * e1 * e1) * m2
    if which == "Ntilde1":
        return float(exprel(2 * B)) * m2
    raise ValueError(f"unknown normal limit {which!r}; expected 'N1' or 'Ntilde1'")


def sample_limit(spec: LimitLawSpec, rng, size: int):
    """Draws of any limit law; mixed normals give (size, 2), the rest (size,)."""
    rng = make_rng(rng)
    kind = spec.kind
    if kind in (LimitKind.MIXED_NORMAL_S, LimitKind.MIXED_NORMAL_STILDE, LimitKind.MIXED_NORMAL_R):
        return sample_mixed_normal(spec, rng, size)
    if kind is LimitKind.SERIES_C0:
        return sample_series_C0(spec.d, spec.nu, spec.w, spec.tol, rng, size)
    which = "N1" if kind is LimitKind.NORMAL_N1 else "Ntilde1"
    return math.sqrt(normal_limit_params(spec.d, which)) * rng.standard_normal(size)
