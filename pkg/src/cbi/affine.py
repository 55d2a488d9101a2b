"""Branching/immigration mechanisms and the affine transform of a CBI process.

For ``u`` with nonpositive real part,

    E[exp(u X_t) | X_0 = x] = exp(x psi(t, u) + int_0^t F(psi(s, u)) ds),
    d/dt psi(t, u) = R(psi(t, u)),  psi(0, u) = u.

``psi`` is obtained from an adaptive Runge-Kutta 5(4) integrator, except for two
sub-families with explicit solutions (no branching noise: linear ODE; no
branching jumps: Riccati/Bernoulli ODE).  All functions accept numpy arrays of
``u`` or ``theta`` and broadcast.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special
from scipy.integrate import solve_ivp

from .jump_measures import JumpMeasure, exprel
from .model import CbiParams, derive

__all__ = [
    "IntegrationError",
    "branching_mechanism",
    "immigration_mechanism",
    "psi",
    "psi_and_immigration_integral",
    "char_functional",
    "char_M1",
    "kappa_X",
    "kappa_Y",
]

RTOL = 1e-10
ATOL = 1e-10


class IntegrationError(RuntimeError):
    """The Riccati integrator did not reach the requested time."""


def _as_complex(u):
    u = np.asarray(u, dtype=complex)
    if np.any(u.real > 1e-14):
        raise ValueError("mechanisms are defined for Re(u) <= 0 only")
    return u


def branching_mechanism(p: CbiParams, u):
    """``R(u) = c u^2 + b u + int (e^{uz} - 1 - u (1 ^ z)) mu(dz)``."""
    u = _as_complex(u)
    out = p.c * u * u + p.b * u
    if not p.mu.is_zero():
        out = out + p.mu.laplace(u) - p.mu.total_mass() - u * p.mu.mean_min1()
    return out


def immigration_mechanism(p: CbiParams, u):
    """``F(u) = a u + int (e^{ur} - 1) nu(dr)``."""
    u = _as_complex(u)
    out = p.a * u
    if not p.nu.is_zero():
        out = out + p.nu.laplace(u) - p.nu.total_mass()
    return out


def _closed_form_psi(p: CbiParams, t: float, u: np.ndarray):
    """Explicit psi for the linear (no noise) and Riccati (no mu) sub-families."""
    if not p.mu.is_zero():
        return None
    B = p.b
    # phi = (e^{Bt} - 1)/B, scaled so the B = 0 limit equals t
    phi = t * float(exprel(B * t))
    if p.c == 0.0:
        return u * math.exp(B * t)
    return u * math.exp(B * t) / (1.0 - p.c * u * phi)


def _closed_form_F_integral(p: CbiParams, t: float, u: np.ndarray):
    if not (p.mu.is_zero() and p.nu.is_zero()):
        return None
    B = p.b
    phi = t * float(exprel(B * t))
    if p.c == 0.0:
        return p.a * u * phi
    # int_0^t a psi ds = -(a/c) log(1 - c u phi); Re(1 - c u phi) >= 1 so the principal log is continuous
    return -(p.a / p.c) * np.log(1.0 - p.c * u * phi)


def _integrate(p: CbiParams, t: float, u: np.ndarray, with_integral: bool, psi_known=None):
    """Run RK45 on the stacked state ``[psi, int F(psi)]`` for all ``u`` at once."""
    m = u.size
    flat = u.ravel()

    if psi_known is not None:
        # psi explicit; only the immigration integral needs solving
        def rhs(s, y):
            return immigration_mechanism(p, psi_known(s))

        y0 = np.zeros(m, dtype=complex)
    elif with_integral:

        def rhs(s, y):
            ps = y[:m]
            return np.concatenate([branching_mechanism(p, ps), immigration_mechanism(p, ps)])

        y0 = np.concatenate([flat, np.zeros(m, dtype=complex)])
    else:

        def rhs(s, y):
            return branching_mechanism(p, y)

        y0 = flat.copy()

    sol = solve_ivp(rhs, (0.0, t), y0, method="RK45", rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegrationError(
            f"Riccati integration failed at t={sol.t[-1]:.6g} of {t}: {sol.message} "
            f"(nfev={sol.nfev}, steps={sol.t.size - 1})"
        )
    y = sol.y[:, -1]
    return y, m


def psi(p: CbiParams, t: float, u, method: str = "auto"):
    """Solve ``d/dt psi = R(psi)``, ``psi(0) = u``.

    ``method="ode"`` forces the numerical integrator even where a closed form exists.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    u = _as_complex(u)
    shape = u.shape
    if t == 0:
        return u if shape else u[()]
    if method == "auto":
        closed = _closed_form_psi(p, t, u)
        if closed is not None:
            return closed
    elif method != "ode":
        raise ValueError(f"unknown method {method!r}")
    y, m = _integrate(p, t, u, with_integral=False)
    out = y[:m].reshape(shape)
    return out if shape else out[()]


def psi_and_immigration_integral(p: CbiParams, t: float, u, method: str = "auto"):
    """Return ``(psi(t, u), int_0^t F(psi(s, u)) ds)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    u = _as_complex(u)
    shape = u.shape
    if t == 0:
        zero = np.zeros(shape, dtype=complex)
        return (u, zero) if shape else (u[()], zero[()])
    ps = integ = None
    if method == "auto":
        ps = _closed_form_psi(p, t, u)
        integ = _closed_form_F_integral(p, t, u)
        if ps is not None and integ is None:
            y, m = _integrate(p, t, u, True, psi_known=lambda s: _closed_form_psi(p, s, u.ravel()))
            integ = y.reshape(shape)
    elif method != "ode":
        raise ValueError(f"unknown method {method!r}")
    if ps is None:
        y, m = _integrate(p, t, u, with_integral=True)
        ps, integ = y[:m].reshape(shape), y[m:].reshape(shape)
    if not shape:
        return ps[()], integ[()]
    return ps, integ


def char_functional(p: CbiParams, t: float, x: float, theta, method: str = "auto"):
    """``E[exp(i theta X_t) | X_0 = x]`` through the affine formula."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    theta = np.asarray(theta, dtype=float)
    ps, integ = psi_and_immigration_integral(p, t, 1j * theta, method=method)
    return np.exp(x * ps + integ)


def _flow_integral(nu: JumpMeasure, B: float, theta):
    """``int_0^1 int (exp(i theta r e^{Bu}) - 1) nu(dr) du`` using explicit u-integrals.

    Atoms use the cosine/sine integrals (substitution v = e^{Bu}); an exponential
    density reduces to complex logarithms; a uniform density is integrated in u by
    Gauss-Legendre quadrature of its closed-form Fourier transform.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape, dtype=complex)
    if abs(B) < 1e-12:
        return nu.laplace(1j * theta) - nu.total_mass()
    eb = math.exp(B)
    nz = theta != 0
    th = np.where(nz, theta, 1.0)
    sgn = np.sign(th)
    for atom in nu.atoms:
        lo = np.abs(th) * atom.size
        si_lo, ci_lo = special.sici(lo)
        si_hi, ci_hi = special.sici(lo * eb)
        # int_1^{e^B} e^{i s v} / v dv for s = theta r, using evenness of Ci and oddness of Si
        val = (ci_hi - ci_lo) + 1j * sgn * (si_hi - si_lo)
        out = out + atom.mass * np.where(nz, val / B - 1.0, 0.0)
    cont = nu.continuous
    if cont is not None and cont.mass > 0:
        if cont.family == "exponential":
            lam = cont.rate
            # int_0^1 lam/(lam - i s e^{Bu}) du = 1 - [Log(lam - i s e^B) - Log(lam - i s)] / B
            val = 1.0 - (np.log(lam - 1j * th * eb) - np.log(lam - 1j * th)) / B
            out = out + cont.mass * np.where(nz, val - 1.0, 0.0)
        else:
            nodes, weights = np.polynomial.legendre.leggauss(96)
            us = 0.5 * (nodes + 1.0)
            acc = np.zeros(theta.shape, dtype=complex)
            for uk, wk in zip(us, weights):
                acc = acc + 0.5 * wk * (cont.laplace(1j * theta * math.exp(B * uk)) - cont.mass)
            out = out + acc
    return out


def char_M1(p: CbiParams, theta):
    """Characteristic function of ``M_1 = X_1 - rho X_0 - calA`` when C = 0.

    ``exp{ int_0^1 int (e^{i theta r e^{Bu}} - 1 - i theta r e^{Bu}) nu(dr) du }``
    """
    if p.has_branching_noise:
        raise ValueError("char_M1 requires C = 0 (c = 0 and mu = 0)")
    theta = np.asarray(theta, dtype=float)
    B = p.b
    comp = 1j * theta * p.nu.moment(1) * float(exprel(B))
    val = np.exp(_flow_integral(p.nu, B, theta) - comp)
    return val if val.ndim else val[()]


def kappa_Y(p: CbiParams, theta, method: str = "auto"):
    """Conditional characteristic function of ``Y_1 - rho`` for the pure branching part."""
    rho = derive(p).rho
    theta = np.asarray(theta, dtype=float)
    return np.exp(psi(p, 1.0, 1j * theta, method=method) - 1j * theta * rho)


def kappa_X(p: CbiParams, theta, method: str = "auto"):
    """Characteristic function of ``X_1 - calA`` started from 0."""
    calA = derive(p).calA
    theta = np.asarray(theta, dtype=float)
    _, integ = psi_and_immigration_integral(p, 1.0, 1j * theta, method=method)
    return np.exp(integ - 1j * theta * calA)
