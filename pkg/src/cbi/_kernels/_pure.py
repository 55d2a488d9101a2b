"""Pure-Python kernels.

The compiled module ``_ext`` implements the same functions with the same
sequence of floating point operations and random draws, so both backends give
identical results for a given generator state.
"""
import math

import numpy as np


def neumaier_sum(values) -> float:
    s = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s + comp


def centered_cross(x, y):
    """Return ``(xbar, ybar, sum (x-xbar)^2, sum (x-xbar)(y-ybar))`` with compensated sums."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    xbar = neumaier_sum(x) / n
    ybar = neumaier_sum(y) / n
    sxx = neumaier_sum([(xi - xbar) * (xi - xbar) for xi in x])
    sxy = neumaier_sum([(xi - xbar) * (yi - ybar) for xi, yi in zip(x, y)])
    return xbar, ybar, sxx, sxy


def affine_recursion(x0, rho, drift, increments):
    """``X_k = rho X_{k-1} + drift + increments[k-1]`` for k = 1..n."""
    n = len(increments)
    out = np.empty(n + 1)
    x = float(x0)
    out[0] = x
    for k in range(n):
        x = rho * x + drift + float(increments[k])
        out[k + 1] = x
    return out


def _sample_jump(rng, cum, sizes, code, p1, p2):
    u1 = rng.random()
    last = len(cum) - 1
    i = 0
    while i < last and u1 >= cum[i]:
        i += 1
    if code != 0:
        if i == 0:
            u2 = rng.random()
            if code == 1:
                return -math.log1p(-u2) / p1
            return p1 + (p2 - p1) * u2
        return sizes[i - 1]
    return sizes[i]


def euler_thinning_path(x0, n, substeps, a, beta, c, mu_total, mu_table, nu_total, nu_table, rng):
    """Operator-split scheme on a grid of ``substeps`` per unit time.

    Per substep: Euler drift/diffusion step clamped at 0, then branching jumps by
    thinning a Poisson clock with rate ``xbar * mu_total`` (the bound ``xbar`` is
    raised from the time of any jump that crosses it), then exact compound-Poisson
    immigration.
    """
    h = 1.0 / substeps
    sqrt_h = math.sqrt(h)
    mu_cum, mu_sizes, mu_code, mu_p1, mu_p2 = mu_table
    nu_cum, nu_sizes, nu_code, nu_p1, nu_p2 = nu_table
    mu_cum = [float(v) for v in mu_cum]
    mu_sizes = [float(v) for v in mu_sizes]
    nu_cum = [float(v) for v in nu_cum]
    nu_sizes = [float(v) for v in nu_sizes]
    out = np.empty(n + 1)
    x = float(x0)
    out[0] = x
    for k in range(n):
        for _ in range(substeps):
            if c > 0.0:
                z = rng.standard_normal()
                x = x + (a + beta * x) * h + math.sqrt(2.0 * c * max(0.0, x)) * sqrt_h * z
            else:
                x = x + (a + beta * x) * h
            if x < 0.0:
                x = 0.0
            if mu_total > 0.0:
                # sequential thinning: candidates at rate xbar * mu_total, accepted with
                # probability x / xbar; the bound is raised after any jump that crosses it
                xbar = x * (1.0 + 10.0 * h) + 10.0 * h
                t = 0.0
                while True:
                    t += rng.standard_exponential() / (xbar * mu_total)
                    if t >= h:
                        break
                    if rng.random() * xbar < x:
                        x += _sample_jump(rng, mu_cum, mu_sizes, mu_code, mu_p1, mu_p2)
                        if x > xbar:
                            xbar = x * (1.0 + 10.0 * h) + 10.0 * h
            if nu_total > 0.0:
                kk = rng.poisson(nu_total * h)
                for _j in range(kk):
                    x += _sample_jump(rng, nu_cum, nu_sizes, nu_code, nu_p1, nu_p2)
        out[k + 1] = x
    return out
