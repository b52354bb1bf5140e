# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

BACKEND = "cython"


cdef inline double _powp(double a, double p, int mode) noexcept nogil:
    # exact shortcuts for the exponents used most; pow() otherwise
    if mode == 2:
        return a * a
    if mode == 3:
        return a * a * a
    if mode == 1:
        return a * sqrt(a)
    if mode == 4:
        return a
    if mode == 5:
        return sqrt(a)
    return pow(a, p)


cdef inline int _mode(double p) noexcept nogil:
    if p == 2.0:
        return 2
    if p == 3.0:
        return 3
    if p == 1.5:
        return 1
    if p == 1.0:
        return 4
    if p == 0.5:
        return 5
    return 0


def pair_energy(const cnp.int64_t[:] i, const cnp.int64_t[:] j,
                const double[:] w, const double[:] u, double p):
    cdef Py_ssize_t k, m = w.shape[0]
    cdef double total = 0.0, a
    cdef int mode = _mode(p)
    with nogil:
        for k in range(m):
            a = fabs(u[i[k]] - u[j[k]])
            if a > 0.0:
                total += w[k] * _powp(a, p, mode)
    return total


def pair_energy_grad(const cnp.int64_t[:] i, const cnp.int64_t[:] j,
                     const double[:] w, const double[:] u, double p):
    cdef Py_ssize_t k, m = w.shape[0]
    cdef double total = 0.0, d, a, s
    grad_arr = np.zeros(u.shape[0], dtype=np.float64)
    cdef double[:] grad = grad_arr
    cdef int mode = _mode(p - 1.0)
    with nogil:
        for k in range(m):
            d = u[i[k]] - u[j[k]]
            a = fabs(d)
            if a > 0.0:
                s = _powp(a, p - 1.0, mode)
                total += w[k] * s * a
                s = w[k] * p * s
                if d < 0.0:
                    s = -s
                grad[i[k]] += s
                grad[j[k]] -= s
    return total, grad_arr


def open_ball_masses(dist, mass):
    cdef const double[:, :] D = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[:] nu = np.ascontiguousarray(mass, dtype=np.float64)
    cdef Py_ssize_t n = D.shape[0], z, a, b, t
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef cnp.int64_t[:] order
    cdef double acc
    for z in range(n):
        order = np.argsort(dist[z], kind="stable").astype(np.int64)
        with nogil:
            acc = 0.0
            a = 0
            # walk blocks of equal distance; each block sees the mass strictly before it
            while a < n:
                b = a
                while b < n and D[z, order[b]] == D[z, order[a]]:
                    b += 1
                for t in range(a, b):
                    out[z, order[t]] = acc
                for t in range(a, b):
                    acc += nu[order[t]]
                a = b
    return out_arr
