# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; semantics match ``_pykernels``."""
import numpy as np

cimport cython
from libc.math cimport sqrt, fabs, isfinite, pow, NAN
from libc.stdlib cimport malloc, free

from .errors import NumericalError

cdef extern from "complex.h" nogil:
    double cabs(double complex)

cdef long MAX_STEPS = 50000000

# Dormand-Prince 5(4) tableau, row-major lower triangle
cdef double[7][6] A = [
    [0, 0, 0, 0, 0, 0],
    [1.0 / 5, 0, 0, 0, 0, 0],
    [3.0 / 40, 9.0 / 40, 0, 0, 0, 0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0],
    [35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84],
]
cdef double[7] E = [71.0 / 57600, 0, -71.0 / 16695, 71.0 / 1920,
                    -17253.0 / 339200, 22.0 / 525, -1.0 / 40]


def apply_phase(double complex[::1] psi, const double complex[::1] phase):
    """In place ``psi *= phase``."""
    cdef Py_ssize_t i, n = psi.shape[0]
    cdef double* p = <double*> &psi[0]
    cdef const double* f = <const double*> &phase[0]
    cdef double re, im
    if n == 0:
        return
    # expanded product; the C99 complex multiply calls __muldc3
    with nogil:
        for i in range(n):
            re = p[2 * i] * f[2 * i] - p[2 * i + 1] * f[2 * i + 1]
            im = p[2 * i] * f[2 * i + 1] + p[2 * i + 1] * f[2 * i]
            p[2 * i] = re
            p[2 * i + 1] = im


def max_abs(const double complex[::1] psi):
    cdef Py_ssize_t i, n = psi.shape[0]
    cdef double best = 0.0, v
    with nogil:
        for i in range(n):
            v = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
            if v > best:
                best = v
    return sqrt(best)


cdef int _solve_inplace(double complex* a, double complex* b, Py_ssize_t n) noexcept nogil:
    """Gaussian elimination with partial pivoting on row-major ``a``; 0 on success."""
    cdef Py_ssize_t i, j, k, p
    cdef double big, v
    cdef double complex tmp, f
    for k in range(n):
        p = k
        big = cabs(a[k * n + k])
        for i in range(k + 1, n):
            v = cabs(a[i * n + k])
            if v > big:
                big = v
                p = i
        if big == 0.0:
            return 1
        if p != k:
            for j in range(k, n):
                tmp = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        for i in range(k + 1, n):
            f = a[i * n + k] / a[k * n + k]
            if f != 0:
                for j in range(k + 1, n):
                    a[i * n + j] = a[i * n + j] - f * a[k * n + j]
                b[i] = b[i] - f * b[k]
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp = tmp - a[i * n + j] * b[j]
        b[i] = tmp / a[i * n + i]
    return 0


def resolvent_nodes(diag, offsets, values, double complex z, Py_ssize_t row, Py_ssize_t col):
    """Element ``[row]`` of ``(z - H_j)^{-1} e_col`` for every node ``j``; nan if singular."""
    cdef const double[:, ::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const long long[::1] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double complex[::1] vals = np.ascontiguousarray(values, dtype=np.complex128)
    cdef Py_ssize_t n_nodes = d.shape[0], n = d.shape[1], n_off = offs.shape[0]
    cdef double complex[::1] out = np.empty(n_nodes, dtype=np.complex128)
    cdef double complex* a = <double complex*> malloc(n * n * sizeof(double complex))
    cdef double complex* b = <double complex*> malloc(n * sizeof(double complex))
    cdef Py_ssize_t jn, i, m, o
    if a == NULL or b == NULL:
        free(a)
        free(b)
        raise MemoryError()
    try:
        with nogil:
            for jn in range(n_nodes):
                for i in range(n * n):
                    a[i] = 0
                for i in range(n):
                    a[i * n + i] = z - d[jn, i]
                    b[i] = 0
                for o in range(n_off):
                    for i in range(n):
                        m = i - offs[o]
                        if 0 <= m < n:
                            a[i * n + m] = a[i * n + m] - vals[o]
                b[col] = 1
                if _solve_inplace(a, b, n):
                    out[jn] = NAN
                else:
                    out[jn] = b[row]
    finally:
        free(a)
        free(b)
    return np.asarray(out)


cdef inline void _matvec(const double complex[:, ::1] h, const double complex* y,
                         double complex* out, Py_ssize_t n) noexcept nogil:
    # out = -i H y
    cdef Py_ssize_t i, j
    cdef double complex acc
    for i in range(n):
        acc = 0
        for j in range(n):
            acc = acc + h[i, j] * y[j]
        out[i] = -1j * acc


def dp45_linear(hmat, c0, times, double rtol=1e-10, double atol=1e-14, double h0=0.0):
    """Integrate ``i dc/dt = H c`` with adaptive Dormand-Prince 5(4); returns (records, n_steps)."""
    cdef const double complex[:, ::1] h = np.ascontiguousarray(hmat, dtype=np.complex128)
    cdef const double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t n = h.shape[0], n_t = ts.shape[0]
    records_arr = np.empty((n_t, n), dtype=np.complex128)
    cdef double complex[:, ::1] records = records_arr
    cdef double complex[::1] y = np.array(c0, dtype=np.complex128)
    cdef double complex[::1] y_new = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] acc = np.empty(n, dtype=np.complex128)
    cdef double complex[:, ::1] k = np.empty((7, n), dtype=np.complex128)
    cdef double complex[::1] tmp
    cdef double t = ts[0], t_next, step, err, scale, ev, fac, h_new, hstep, rowsum, hmax
    cdef Py_ssize_t i, j, s, r, jt
    cdef long n_steps = 0
    cdef bint hit

    records[0, :] = y
    hmax = 1.0
    for i in range(n):
        rowsum = 0
        for j in range(n):
            rowsum += cabs(h[i, j])
        if rowsum > hmax:
            hmax = rowsum
    hstep = h0 if h0 > 0 else min(1e-2, 0.1 / hmax)
    _matvec(h, &y[0], &k[0, 0], n)

    for jt in range(1, n_t):
        t_next = ts[jt]
        while t < t_next:
            if n_steps > MAX_STEPS:
                raise NumericalError("dp45_linear: step limit exceeded")
            hit = hstep >= t_next - t
            step = t_next - t if hit else hstep
            with nogil:
                for s in range(1, 7):
                    for i in range(n):
                        acc[i] = y[i]
                        for r in range(s):
                            if A[s][r] != 0:
                                acc[i] = acc[i] + step * A[s][r] * k[r, i]
                    if s == 6:
                        for i in range(n):
                            y_new[i] = acc[i]
                    _matvec(h, &acc[0], &k[s, 0], n)
                err = 0
                for i in range(n):
                    ev = cabs(step * (E[0] * k[0, i] + E[2] * k[2, i] + E[3] * k[3, i]
                                      + E[4] * k[4, i] + E[5] * k[5, i] + E[6] * k[6, i]))
                    scale = atol + rtol * max(cabs(y[i]), cabs(y_new[i]))
                    err += (ev / scale) * (ev / scale)
                err = sqrt(err / n)
            if not isfinite(err):
                raise NumericalError("dp45_linear: non-finite error estimate")
            if err <= 1.0:
                t = t_next if hit else t + step
                tmp = y
                y = y_new
                y_new = tmp
                k[0, :] = k[6, :]
                n_steps += 1
            if err == 0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * pow(err, -0.2)))
            if err > 1.0:
                fac = min(fac, 1.0)
            h_new = step * fac
            if step < hstep and err <= 1.0:
                hstep = max(hstep, h_new)
            else:
                hstep = h_new
            if hstep < 1e-14 * max(1.0, fabs(t)):
                raise NumericalError(f"dp45_linear: step size underflow at t={t:g}")
        records[jt, :] = y
    return records_arr, n_steps
