"""Sample paths observed at integer times.

Three schemes:

``exact_cir``
    no jumps (mu = nu = 0), c > 0: scaled noncentral chi-square transitions.
``exact_pure_immigration``
    c = 0, mu = 0: deterministic exponential flow plus exactly placed
    compound-Poisson immigration.
``euler_thinning``
    anything with finite-activity jumps: Euler step for drift and diffusion,
    thinning for the state-dependent branching jumps, exact immigration.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .jump_measures import exprel
from .model import CbiParams, derive
from .rng import make_rng

__all__ = [
    "ObservationPath",
    "Scheme",
    "cir_transition",
    "pure_immigration_jumps",
    "simulate",
    "simulate_cir_exact",
    "simulate_euler_thinning",
    "simulate_pure_immigration_batch",
    "simulate_pure_immigration_exact",
]


class Scheme(str, enum.Enum):
    EXACT_CIR = "exact_cir"
    EXACT_PURE_IMMIGRATION = "exact_pure_immigration"
    EULER_THINNING = "euler_thinning"


@dataclass(frozen=True, eq=False)
class ObservationPath:
    """Observations ``X_0, ..., X_n`` at unit spacing.

    ``innovations`` holds the martingale differences ``M_1..M_n`` when the
    simulator produced them directly rather than by differencing.
    """

    values: np.ndarray
    scheme: str
    seed: int | None = None
    delta_t: float = 1.0
    innovations: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a path needs at least two observations")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("observations must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size - 1


def _seed_of(rng):
    return None if isinstance(rng, np.random.Generator) else rng


def _cir_coefficients(p: CbiParams):
    if not (p.mu.is_zero() and p.nu.is_zero()):
        raise ValueError("exact CIR sampling needs mu = nu = 0")
    if not p.c > 0:
        raise ValueError("exact CIR sampling needs c > 0; use the pure-immigration or Euler scheme")
    B = p.b
    phi = float(exprel(B))  # (e^B - 1)/B
    scale = 0.5 * p.c * phi
    nc_factor = 2.0 * math.exp(B) / (p.c * phi)
    return scale, 2.0 * p.a / p.c, nc_factor


def _noncentral_chisquare(rng, df, nonc, size=None):
    if df > 0:
        return rng.noncentral_chisquare(df, nonc, size)
    # df = 0: Poisson(nonc/2) mixture of chi-square(2N), with an atom at 0
    count = rng.poisson(np.asarray(nonc) / 2.0, size)
    return 2.0 * rng.standard_gamma(count)


def cir_transition(p: CbiParams, x, rng, size=None):
    """Draw ``X_1`` given ``X_0 = x`` (vectorized in ``x`` / ``size``)."""
    scale, df, nc_factor = _cir_coefficients(p)
    rng = make_rng(rng)
    return scale * _noncentral_chisquare(rng, df, nc_factor * np.asarray(x, dtype=float), size)


def simulate_cir_exact(p: CbiParams, n: int, rng) -> ObservationPath:
    scale, df, nc_factor = _cir_coefficients(p)
    seed, rng = _seed_of(rng), make_rng(rng)
    out = np.empty(n + 1)
    x = out[0] = p.x0
    for k in range(1, n + 1):
        x = scale * float(_noncentral_chisquare(rng, df, nc_factor * x))
        out[k] = x
    return ObservationPath(out, Scheme.EXACT_CIR.value, seed)


def _check_pure_immigration(p: CbiParams):
    if p.c != 0 or not p.mu.is_zero():
        raise ValueError("exact pure-immigration sampling needs c = 0 and mu = 0")


def pure_immigration_jumps(p: CbiParams, rng, size):
    """Sum over one unit interval of ``r_i exp(B (1 - tau_i))`` for each of ``size`` intervals.

    Jump times ``tau_i`` are Poisson with intensity ``nu.total_mass()`` on (0, 1];
    sizes come from the normalized ``nu``.
    """
    _check_pure_immigration(p)
    size = int(np.prod(size))
    if p.nu.is_zero():
        return np.zeros(size)
    counts = rng.poisson(p.nu.total_mass(), size)
    total = int(counts.sum())
    sizes = p.nu.sample(rng, total)
    taus = rng.random(total)
    owner = np.repeat(np.arange(size), counts)
    return np.bincount(owner, weights=sizes * np.exp(p.b * (1.0 - taus)), minlength=size)


def simulate_pure_immigration_exact(p: CbiParams, n: int, rng) -> ObservationPath:
    _check_pure_immigration(p)
    seed, rng = _seed_of(rng), make_rng(rng)
    B = p.b
    phi = float(exprel(B))
    jumps = pure_immigration_jumps(p, rng, n)
    values = _kernels.affine_recursion(p.x0, math.exp(B), p.a * phi, jumps)
    innovations = jumps - p.nu.moment(1) * phi
    return ObservationPath(values, Scheme.EXACT_PURE_IMMIGRATION.value, seed, innovations=innovations)


def simulate_pure_immigration_batch(p: CbiParams, n: int, rng, size: int):
    """``size`` independent paths; returns ``(values, innovations)`` of shapes (size, n+1), (size, n)."""
    _check_pure_immigration(p)
    rng = make_rng(rng)
    B = p.b
    phi = float(exprel(B))
    rho, drift = math.exp(B), p.a * phi
    jumps = pure_immigration_jumps(p, rng, size * n).reshape(n, size).T
    values = np.empty((size, n + 1))
    values[:, 0] = p.x0
    for k in range(n):
        values[:, k + 1] = rho * values[:, k] + drift + jumps[:, k]
    return values, jumps - p.nu.moment(1) * phi


def simulate_euler_thinning(p: CbiParams, n: int, substeps: int, rng) -> ObservationPath:
    if int(substeps) != substeps or substeps < 1:
        raise ValueError(f"substeps must be a positive integer, got {substeps!r}")
    seed, rng = _seed_of(rng), make_rng(rng)
    d = derive(p)
    # raw (uncompensated) branching jumps: their compensator X * int z mu(dz) leaves the drift
    beta = d.B - p.mu.moment(1)
    values = _kernels.euler_thinning_path(
        p.x0,
        int(n),
        int(substeps),
        p.a,
        beta,
        p.c,
        p.mu.total_mass(),
        p.mu.sampling_table(),
        p.nu.total_mass(),
        p.nu.sampling_table(),
        rng,
    )
    return ObservationPath(values, Scheme.EULER_THINNING.value, seed)


def simulate(p: CbiParams, n: int, scheme, rng, substeps: int = 200) -> ObservationPath:
    if n < 1:
        raise ValueError("need at least one step")
    scheme = Scheme(scheme)
    if scheme is Scheme.EXACT_CIR:
        return simulate_cir_exact(p, n, rng)
    if scheme is Scheme.EXACT_PURE_IMMIGRATION:
        return simulate_pure_immigration_exact(p, n, rng)
    return simulate_euler_thinning(p, n, substeps, rng)
