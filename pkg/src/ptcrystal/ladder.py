"""Diffracted-order amplitudes for plane-wave excitation and secular-growth detection.

An incident wave ``e^{ikx}`` with ``k = q + l0 k_B`` only couples to the orders
``q + l k_B``; their amplitudes obey ``i dc/dt = H(q) c`` with ``c(0) = e_{l0}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import kernels
from .bloch import build_hq
from .errors import NumericalError, TruncationWarning
from .potential import PotentialFamily

BOUNDARY_TOL = 1e-6


def reduce_wavenumber(k: float, period: float = 1.0) -> tuple[float, int]:
    """Split ``k = q + l0 k_B`` with ``q`` in ``[-pi/a, pi/a)``.

    ``l0`` is ``k/k_B`` rounded half-up, so ``q = +pi/a`` maps to ``-pi/a``.
    """
    kb = 2 * math.pi / period
    l0 = math.floor(k / kb + 0.5)
    return k - l0 * kb, int(l0)


@dataclass(frozen=True)
class DiffractionTrace:
    k: float
    q: float
    l0: int
    lam: float
    n_trunc: int
    times: np.ndarray
    amplitudes: np.ndarray  # (n_records, 2N+1), column j is order j - N
    n_steps: int = 0

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_trunc, self.n_trunc + 1)

    def order(self, l: int) -> np.ndarray:
        if abs(l) > self.n_trunc:
            raise ValueError(f"order {l} outside truncation {self.n_trunc}")
        return self.amplitudes[:, l + self.n_trunc]

    def rows(self):
        for t, c in zip(self.times, self.amplitudes):
            for l, v in zip(self.orders, c):
                yield float(t), int(l), complex(v)


def evolve_orders(family: PotentialFamily, lam: float | None = None, n_trunc: int = 16,
                  k: float = -math.pi, t_end: float = 50.0, n_records: int = 256,
                  method: str = "expm", rtol: float = 1e-10, backend=None) -> DiffractionTrace:
    """Integrate the coupled-order equations from ``c_l(0) = delta_{l, l0}``.

    Parameters
    ----------
    method : {"expm", "rk"}
        ``expm`` propagates with the exact interval propagator ``exp(-i H dt)``;
        ``rk`` uses adaptive Dormand-Prince 5(4) with relative tolerance ``rtol``.

    Warns
    -----
    TruncationWarning
        If ``|c_{+-N}(t)|`` exceeds ``1e-6`` at any record.
    """
    if lam is not None:
        family = family.with_strength(lam)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if n_records < 2:
        raise ValueError("n_records must be at least 2")
    q, l0 = reduce_wavenumber(k, family.period)
    if abs(l0) > n_trunc:
        raise ValueError(f"incident order {l0} lies outside the truncation N={n_trunc}")
    h = build_hq(family, q, n_trunc).entries
    dim = h.shape[0]
    c0 = np.zeros(dim, dtype=complex)
    c0[l0 + n_trunc] = 1.0
    times = np.linspace(0.0, t_end, n_records)
    n_steps = 0

    if method == "expm":
        step = sla.expm(-1j * (times[1] - times[0]) * h)
        amps = np.empty((n_records, dim), dtype=complex)
        amps[0] = c0
        for j in range(1, n_records):
            amps[j] = step @ amps[j - 1]
        n_steps = n_records - 1
    elif method == "rk":
        kern = kernels if backend is None else backend
        amps, n_steps = kern.dp45_linear(h, c0, times, rtol=rtol, atol=rtol * 1e-4)
        amps = np.asarray(amps)
    else:
        raise ValueError(f"unknown method {method!r}")

    if not np.all(np.isfinite(amps)):
        raise NumericalError("ladder: non-finite amplitudes")
    edge = max(np.abs(amps[:, 0]).max(), np.abs(amps[:, -1]).max())
    if edge > BOUNDARY_TOL:
        warnings.warn(f"ladder: |c_(+-N)| reached {edge:.2e}; increase n_trunc",
                      TruncationWarning, stacklevel=2)
    return DiffractionTrace(k=float(k), q=q, l0=l0, lam=family.lam, n_trunc=n_trunc,
                            times=times, amplitudes=amps, n_steps=int(n_steps))


@dataclass(frozen=True)
class SecularFit:
    secular: bool
    slope: float
    r2: float
    score: float


def detect_secular(trace: DiffractionTrace, l: int, score_min: float = 0.5,
                   r2_min: float = 0.99, min_records: int = 32) -> SecularFit:
    """Linear fit of ``|c_l(t)|`` over ``[t_end/2, t_end]``.

    Secular when ``slope * t_end / mean|c_l| > score_min`` and the coefficient
    of determination exceeds ``r2_min``.
    """
    if trace.times.size < min_records:
        raise ValueError(f"need at least {min_records} records, got {trace.times.size}")
    t_end = float(trace.times[-1])
    sel = trace.times >= 0.5 * t_end
    t, y = trace.times[sel], np.abs(trace.order(l))[sel]
    slope, icpt = np.polyfit(t, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * t + icpt)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    mean = float(y.mean())
    score = slope * t_end / mean if mean > 0 else 0.0
    return SecularFit(secular=bool(score > score_min and r2 > r2_min),
                      slope=float(slope), r2=float(r2), score=float(score))
