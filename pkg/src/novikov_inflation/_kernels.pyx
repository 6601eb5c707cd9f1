# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: smooth cutoff evaluation and Gaussian-gridding interpolation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, floor, sqrt, M_PI

cnp.import_array()


cdef inline double _smooth_step(double t) nogil:
    cdef double z, e
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    z = (1.0 - 2.0 * t) / (t * (1.0 - t))
    if z > 0.0:
        e = exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + exp(z))


def smooth_cutoff(const double[::1] xi, double r1, double r2):
    cdef Py_ssize_t i, n = xi.shape[0]
    cdef double width = r2 - r1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _smooth_step((r2 - fabs(xi[i])) / width)
    return out


def gauss_interp(const double[::1] grid_vals, const double[::1] theta, double tau, int msp):
    """Sum grid_vals[r] * exp(-(theta - 2 pi r / M)^2 / (4 tau)) over the 2*msp nearest r."""
    cdef Py_ssize_t m = grid_vals.shape[0]
    cdef Py_ssize_t npts = theta.shape[0]
    cdef Py_ssize_t i, r, r0, idx
    cdef int l
    cdef double h = 2.0 * M_PI / m
    cdef double inv4tau = 1.0 / (4.0 * tau)
    cdef double scale = sqrt(M_PI / tau)
    cdef double th, d, acc
    out = np.empty(npts, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(npts):
            th = theta[i]
            r0 = <Py_ssize_t> floor(th / h)
            acc = 0.0
            for l in range(-msp + 1, msp + 1):
                r = r0 + l
                d = th - r * h
                idx = r % m
                if idx < 0:
                    idx = idx + m
                acc = acc + grid_vals[idx] * exp(-d * d * inv4tau)
            o[i] = scale * acc
    return out
