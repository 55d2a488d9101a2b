# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pure.py`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport fabs, log1p, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_poisson,
    random_standard_exponential,
    random_standard_normal,
    random_standard_uniform,
)

cnp.import_array()


cdef inline double _neumaier(const double[::1] v) noexcept nogil:
    cdef double s = 0.0, comp = 0.0, t, x
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        x = v[i]
        t = s + x
        if fabs(s) >= fabs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
    return s + comp


def neumaier_sum(values):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    return _neumaier(v)


def centered_cross(x, y):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    cdef double xbar = _neumaier(xv) / n
    cdef double ybar = _neumaier(yv) / n
    cdef double[::1] dxx = np.empty(n)
    cdef double[::1] dxy = np.empty(n)
    for i in range(n):
        dxx[i] = (xv[i] - xbar) * (xv[i] - xbar)
        dxy[i] = (xv[i] - xbar) * (yv[i] - ybar)
    return xbar, ybar, _neumaier(dxx), _neumaier(dxy)


def affine_recursion(double x0, double rho, double drift, increments):
    cdef const double[::1] inc = np.ascontiguousarray(increments, dtype=np.float64)
    cdef Py_ssize_t n = inc.shape[0], k
    out = np.empty(n + 1)
    cdef double[::1] o = out
    cdef double x = x0
    o[0] = x
    for k in range(n):
        x = rho * x + drift + inc[k]
        o[k + 1] = x
    return out


cdef inline bitgen_t* _bitgen(rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid bit generator capsule")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _sample_jump(bitgen_t* bg, const double[::1] cum, const double[::1] sizes,
                                int code, double p1, double p2) noexcept nogil:
    cdef double u1 = random_standard_uniform(bg), u2
    cdef Py_ssize_t last = cum.shape[0] - 1, i = 0
    while i < last and u1 >= cum[i]:
        i += 1
    if code != 0:
        if i == 0:
            u2 = random_standard_uniform(bg)
            if code == 1:
                return -log1p(-u2) / p1
            return p1 + (p2 - p1) * u2
        return sizes[i - 1]
    return sizes[i]


def euler_thinning_path(double x0, Py_ssize_t n, Py_ssize_t substeps, double a, double beta, double c,
                        double mu_total, mu_table, double nu_total, nu_table, rng):
    cdef const double[::1] mu_cum = np.ascontiguousarray(mu_table[0], dtype=np.float64)
    cdef const double[::1] mu_sizes = np.ascontiguousarray(mu_table[1], dtype=np.float64)
    cdef int mu_code = mu_table[2]
    cdef double mu_p1 = mu_table[3], mu_p2 = mu_table[4]
    cdef const double[::1] nu_cum = np.ascontiguousarray(nu_table[0], dtype=np.float64)
    cdef const double[::1] nu_sizes = np.ascontiguousarray(nu_table[1], dtype=np.float64)
    cdef int nu_code = nu_table[2]
    cdef double nu_p1 = nu_table[3], nu_p2 = nu_table[4]
    cdef double h = 1.0 / substeps
    cdef double sqrt_h = sqrt(h)
    cdef double x = x0, z, xbar, xm, t
    cdef Py_ssize_t k, s
    cdef long long kk, j
    cdef bitgen_t* bg = _bitgen(rng)
    out = np.empty(n + 1)
    cdef double[::1] o = out
    o[0] = x
    with rng.bit_generator.lock, nogil:
        for k in range(n):
            for s in range(substeps):
                if c > 0.0:
                    z = random_standard_normal(bg)
                    xm = x if x > 0.0 else 0.0
                    x = x + (a + beta * x) * h + sqrt(2.0 * c * xm) * sqrt_h * z
                else:
                    x = x + (a + beta * x) * h
                if x < 0.0:
                    x = 0.0
                if mu_total > 0.0:
                    xbar = x * (1.0 + 10.0 * h) + 10.0 * h
                    t = 0.0
                    while True:
                        t += random_standard_exponential(bg) / (xbar * mu_total)
                        if t >= h:
                            break
                        if random_standard_uniform(bg) * xbar < x:
                            x += _sample_jump(bg, mu_cum, mu_sizes, mu_code, mu_p1, mu_p2)
                            if x > xbar:
                                xbar = x * (1.0 + 10.0 * h) + 10.0 * h
                if nu_total > 0.0:
                    kk = random_poisson(bg, nu_total * h)
                    j = 0
                    while j < kk:
                        x += _sample_jump(bg, nu_cum, nu_sizes, nu_code, nu_p1, nu_p2)
                        j += 1
            o[k + 1] = x
    return out
