"""Pure-numpy implementations of the hot kernels.

Each function mirrors one in ``_ckernels.pyx`` with identical semantics; the
compiled module is preferred at import time (see ``ptcrystal.kernels``).
"""
import numpy as np

from .errors import NumericalError

# Dormand-Prince 5(4) tableau
DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

MAX_STEPS = 50_000_000


def apply_phase(psi, phase):
    """In place ``psi *= phase``."""
    np.multiply(psi, phase, out=psi)


def max_abs(psi):
    return float(np.abs(psi).max())


def resolvent_nodes(diag, offsets, values, z, row, col, chunk=256):
    """Element ``[row]`` of ``(z - H_j)^{-1} e_col`` for every node ``j``.

    ``H_j = diag(diag[j]) + T`` where ``T[n, m] = values[i]`` whenever
    ``n - m == offsets[i]``.  Nodes whose shifted matrix is exactly singular
    return ``nan``.
    """
    diag = np.asarray(diag, dtype=float)
    n_nodes, dim = diag.shape
    band = np.zeros((dim, dim), dtype=complex)
    for off, val in zip(offsets, values):
        band += np.diag(np.full(dim - abs(int(off)), complex(val)), -int(off))
    out = np.empty(n_nodes, dtype=complex)
    rhs = np.zeros(dim, dtype=complex)
    rhs[col] = 1.0
    idx = np.arange(dim)
    for start in range(0, n_nodes, chunk):
        d = diag[start:start + chunk]
        a = np.broadcast_to(-band, (len(d), dim, dim)).copy()
        a[:, idx, idx] += z - d
        try:
            x = np.linalg.solve(a, np.broadcast_to(rhs, (len(d), dim))[..., None])[..., 0]
            out[start:start + len(d)] = x[:, row]
        except np.linalg.LinAlgError:
            for j in range(len(d)):
                try:
                    out[start + j] = np.linalg.solve(a[j], rhs)[row]
                except np.linalg.LinAlgError:
                    out[start + j] = np.nan
    return out


def dp45_linear(hmat, c0, times, rtol=1e-10, atol=1e-14, h0=0.0):
    """Integrate ``i dc/dt = H c`` with adaptive Dormand-Prince 5(4).

    Returns ``(records, n_steps)`` where ``records[j]`` is ``c(times[j])``;
    ``times`` must be increasing with ``times[0]`` the initial time.
    """
    h_op = -1j * np.asarray(hmat, dtype=complex)
    y = np.array(c0, dtype=complex)
    times = np.asarray(times, dtype=float)
    records = np.empty((len(times), len(y)), dtype=complex)
    records[0] = y
    t = times[0]
    h = h0 if h0 > 0 else min(1e-2, 0.1 / max(1.0, np.abs(h_op).sum(axis=1).max()))
    k1 = h_op @ y
    n_steps = 0
    k = [None] * 7
    for j in range(1, len(times)):
        t_next = times[j]
        while t < t_next:
            if n_steps > MAX_STEPS:
                raise NumericalError("dp45_linear: step limit exceeded")
            step = min(h, t_next - t)
            k[0] = k1
            for s in range(1, 7):
                acc = y.copy()
                for i, a in enumerate(DP_A[s]):
                    if a:
                        acc += step * a * k[i]
                if s == 6:
                    y_new = acc
                k[s] = h_op @ acc
            err_vec = step * sum(e * ki for e, ki in zip(DP_E, k) if e)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2))
            if not np.isfinite(err):
                raise NumericalError("dp45_linear: non-finite error estimate")
            if err <= 1.0:
                t = t_next if step == t_next - t else t + step
                y = y_new
                k1 = k[6]
                n_steps += 1
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            if err > 1.0:
                fac = min(fac, 1.0)
            h_new = step * fac
            if step < h and err <= 1.0:
                h = max(h, h_new)
            else:
                h = h_new
            if h < 1e-14 * max(1.0, abs(t)):
                raise NumericalError(f"dp45_linear: step size underflow at t={t:g}")
        records[j] = y
    return records, n_steps
