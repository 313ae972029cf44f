"""Wave-packet propagation on a periodic grid and first-order Born diagnostics.

The field obeys ``i psi_t = -psi_xx + V(x) psi`` on ``[-L/2, L/2)`` with
periodic wrap.  Propagation is symmetric split-step: half kinetic phase in
momentum space, full potential phase in position space, half kinetic.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import AccuracyWarning, NumericalError
from .potential import PotentialFamily, sample

OVERFLOW = 1e12
EDGE_FRACTION = 0.05
WRAP_TOL = 1e-4
TAIL_TOL = 1e-10


@dataclass
class WaveField:
    domain_length: float
    points: int
    values: np.ndarray
    time: float = 0.0

    @property
    def dx(self) -> float:
        return self.domain_length / self.points

    @property
    def x_grid(self) -> np.ndarray:
        return -0.5 * self.domain_length + self.dx * np.arange(self.points)

    @property
    def k_grid(self) -> np.ndarray:
        return 2 * np.pi * sfft.fftfreq(self.points, d=self.dx)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.dx))


@dataclass(frozen=True)
class SpectrumProfile:
    """Gaussian momentum profile ``F(k) = w/(2 sqrt(pi)) exp(-(k-k0)^2 w^2/4)``."""

    w: float
    k0: float

    @classmethod
    def bragg(cls, w: float, period: float = 1.0) -> "SpectrumProfile":
        return cls(w=w, k0=-math.pi / period)

    def __call__(self, k):
        return self.w / (2 * math.sqrt(math.pi)) * np.exp(-((k - self.k0) * self.w) ** 2 / 4)


@dataclass
class PeakTrace:
    times: np.ndarray
    values: np.ndarray
    order_values: dict[int, np.ndarray] = field(default_factory=dict)

    def window(self, t0: float, t1: float):
        sel = (self.times >= t0 - 1e-9) & (self.times <= t1 + 1e-9)
        return self.times[sel], self.values[sel]


def _is_pow2(m: int) -> bool:
    return m > 0 and (m & (m - 1)) == 0


def init_gaussian(w: float, domain_length: float = 2048.0, points: int = 16384,
                  period: float = 1.0) -> WaveField:
    """``psi(x, 0) = exp(-(x/w)^2 - i k_B x/2)`` sampled on the periodic grid.

    Raises ``ValueError`` when ``points`` is not a power of two, when
    ``w < 8 dx`` or ``w > L/4``, or when the spectrum is not resolved.
    """
    if not _is_pow2(int(points)):
        raise ValueError(f"points={points} must be a power of two")
    if not domain_length > 0 or not w > 0:
        raise ValueError("domain_length and w must be positive")
    dx = domain_length / points
    if w < 8 * dx:
        raise ValueError(f"w={w:g} below 8 dx={8 * dx:g}: grid too coarse")
    if w > domain_length / 4:
        raise ValueError(f"w={w:g} above L/4={domain_length / 4:g}: domain too small")
    kb = 2 * math.pi / period
    x = -0.5 * domain_length + dx * np.arange(points)
    psi = np.exp(-(x / w) ** 2 - 0.5j * kb * x)
    wf = WaveField(domain_length=float(domain_length), points=int(points), values=psi)
    spec = np.abs(sfft.fft(psi))
    k = np.abs(wf.k_grid)
    k_half = 0.5 * np.pi / dx
    if spec[k >= k_half].max(initial=0.0) > TAIL_TOL * spec.max():
        raise ValueError("spectral tail above 1e-10 at k_max/2: grid too coarse for w")
    return wf


def peak_amplitude(wf: WaveField) -> float:
    """``max_x |psi(x)|``."""
    return float(kernels.max_abs(np.ascontiguousarray(wf.values, dtype=complex)))


def _order_mask(k, l: int, period: float):
    kb = 2 * math.pi / period
    lo = -0.5 * kb + (l - 0.5) * kb
    return (k >= lo) & (k < lo + kb)


def order_filter(wf: WaveField, l: int, period: float = 1.0) -> WaveField:
    """Keep momenta ``k`` in ``[-k_B/2 + (l-1/2) k_B, -k_B/2 + (l+1/2) k_B)``."""
    spec = sfft.fft(wf.values)
    spec[~_order_mask(wf.k_grid, l, period)] = 0
    return WaveField(wf.domain_length, wf.points, sfft.ifft(spec), wf.time)


def _edge_fraction(psi) -> float:
    dens = np.abs(psi) ** 2
    total = dens.sum()
    if total == 0:
        return 0.0
    n = max(1, int(EDGE_FRACTION * psi.size))
    return float((dens[:n].sum() + dens[-n:].sum()) / total)


def propagate(wf: WaveField, family: PotentialFamily, lam: float | None = None,
              dt: float = 0.002, n_steps: int = 20000, record_every: int = 50,
              track_orders=(), check_wrap: bool = True, workers: int | None = None,
              backend=None):
    """Strang split-step propagation; returns ``(final_field, PeakTrace)``.

    Parameters
    ----------
    track_orders : iterable of int
        Orders whose filtered peak amplitude is recorded alongside ``psi_m``.
    check_wrap : bool
        Abort when more than ``1e-4`` of the density sits within 5% of the
        periodic boundary.

    Raises
    ------
    NumericalError
        On overflow of ``max|psi|`` beyond ``1e12``, non-finite values or
        wrap-around.
    """
    if lam is not None:
        family = family.with_strength(lam)
    if not dt > 0 or n_steps < 1 or record_every < 1:
        raise ValueError("dt > 0, n_steps >= 1 and record_every >= 1 required")
    kern = kernels if backend is None else backend
    k = wf.k_grid
    k_max = math.pi / wf.dx
    if dt * k_max**2 >= 10:
        raise ValueError(f"dt*k_max^2 = {dt * k_max**2:.3g} >= 10: time step too coarse")
    half = np.ascontiguousarray(np.exp(-0.5j * k**2 * dt))
    full = np.ascontiguousarray(half * half)
    pot = np.ascontiguousarray(np.exp(-1j * dt * np.asarray(sample(family, wf.x_grid), dtype=complex)))
    orders = tuple(int(l) for l in track_orders)
    masks = {l: _order_mask(k, l, family.period) for l in orders}

    times, peaks = [wf.time], [peak_amplitude(wf)]
    order_peaks: dict[int, list[float]] = {l: [] for l in orders}
    spec = sfft.fft(wf.values, workers=workers)
    for l in orders:
        order_peaks[l].append(float(np.abs(sfft.ifft(np.where(masks[l], spec, 0), workers=workers)).max()))

    kern.apply_phase(spec, half)
    psi = None
    for s in range(1, n_steps + 1):
        psi = sfft.ifft(spec, workers=workers)
        kern.apply_phase(psi, pot)
        spec = sfft.fft(psi, workers=workers)
        last = s == n_steps
        if s % record_every == 0 or last:
            kern.apply_phase(spec, half)
            psi = sfft.ifft(spec, workers=workers)
            peak = kern.max_abs(psi)
            t = wf.time + s * dt
            if not math.isfinite(peak) or peak > OVERFLOW:
                raise NumericalError(f"packet: max|psi| = {peak:.3e} exceeds {OVERFLOW:g} at t={t:g}")
            if check_wrap:
                frac = _edge_fraction(psi)
                if frac > WRAP_TOL:
                    raise NumericalError(
                        f"packet: {frac:.2e} of the density reached the periodic boundary at t={t:g}"
                    )
            if s % record_every == 0:
                times.append(t)
                peaks.append(peak)
                for l in orders:
                    order_peaks[l].append(
                        float(np.abs(sfft.ifft(np.where(masks[l], spec, 0), workers=workers)).max())
                    )
            if not last:
                kern.apply_phase(spec, half)
        else:
            kern.apply_phase(spec, full)

    out = WaveField(wf.domain_length, wf.points, psi, wf.time + n_steps * dt)
    trace = PeakTrace(times=np.array(times), values=np.array(peaks),
                      order_values={l: np.array(v) for l, v in order_peaks.items()})
    return out, trace


def born_c1(k, t: float, period: float = 1.0):
    """First-order amplitude ``c_1(k, t)`` of the diffracted wave ``e^{i(k+k_B)x}``.

    ``-i t e^{-i(k+k_B)^2 t} e^{i D t/2} sinc(D t/2)`` with ``D = k_B(2k + k_B)``,
    regular at the Bragg point ``D = 0``.
    """
    kb = 2 * math.pi / period
    k = np.asarray(k, dtype=float)
    d = kb * (2 * k + kb)
    return -1j * t * np.exp(-1j * (k + kb) ** 2 * t + 0.5j * d * t) * np.sinc(d * t / (2 * np.pi))


def born_psi1(profile: SpectrumProfile, t: float, x, period: float = 1.0,
              n_k: int = 4096, span: float = 12.0, chunk: int = 512) -> np.ndarray:
    """First Born term for ``V = e^{i k_B x}`` (multiply by ``V0`` for the field).

    ``psi_1(x,t) = int dk F(k) c_1(k,t) e^{i(k+k_B)x}`` with
    ``c_1 = -i t e^{-i(k+k_B)^2 t} e^{i D t/2} sinc(D t/2)`` and
    ``D = k_B(2k + k_B)``.  The k-integral is trapezoidal over
    ``k0 +- span/w``.
    """
    if not t >= 0:
        raise ValueError("t must be non-negative")
    kb = 2 * math.pi / period
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ks = np.linspace(profile.k0 - span / profile.w, profile.k0 + span / profile.w, n_k)
    wts = np.full(n_k, ks[1] - ks[0])
    wts[[0, -1]] *= 0.5
    amp = wts * profile(ks) * born_c1(ks, t, period)
    out = np.empty(x.size, dtype=complex)
    for s in range(0, x.size, chunk):
        xs = x[s:s + chunk]
        out[s:s + chunk] = np.exp(1j * np.outer(xs, ks + kb)) @ amp
    return out


def asymptotic_psi1(profile: SpectrumProfile, t: float, x, period: float = 1.0) -> np.ndarray:
    """Long-time first Born term: a boxcar of height ``(pi/k_B) F(-k_B/2)`` on ``|x| < k_B t``.

    Warns with :class:`AccuracyWarning` when ``t < 2 pi w / k_B``.
    """
    kb = 2 * math.pi / period
    if t < 2 * math.pi * profile.w / kb:
        warnings.warn(f"packet: t={t:g} below the asymptotic regime t >= {2 * math.pi * profile.w / kb:g}",
                      AccuracyWarning, stacklevel=2)
    x = np.asarray(x, dtype=float)
    box = (np.abs(x) < kb * t).astype(float) if t > 0 else np.zeros_like(x)
    return (-1j * math.pi / kb) * profile(-0.5 * kb) * np.exp(1j * (0.5 * kb * x - 0.25 * kb**2 * t)) * box


def plateau_value(w: float, v0: float, period: float = 1.0) -> float:
    """Saturated order-1 amplitude ``V0 (pi/k_B) F(-k_B/2)``."""
    kb = 2 * math.pi / period
    return v0 * math.pi / kb * w / (2 * math.sqrt(math.pi))


def onset_time(times, values, plateau: float, fraction: float = 0.9) -> float:
    """First time the series reaches ``fraction * plateau``; ``nan`` if never."""
    hit = np.nonzero(np.asarray(values) >= fraction * plateau)[0]
    return float(np.asarray(times)[hit[0]]) if hit.size else math.nan


def late_slope(times, values, t0: float, t1: float) -> float:
    times, values = np.asarray(times), np.asarray(values)
    sel = (times >= t0 - 1e-9) & (times <= t1 + 1e-9)
    return float(np.polyfit(times[sel], values[sel], 1)[0])


def propagate_snapshots(wf: WaveField, family: PotentialFamily, snapshot_times,
                        lam: float | None = None, dt: float = 0.002, record_every: int = 50,
                        track_orders=(), **kwargs):
    """Propagate through increasing ``snapshot_times``; returns ``(fields, PeakTrace)``.

    Each snapshot time must be a multiple of ``dt * record_every`` from the start.
    """
    fields, parts = [], []
    cur = wf
    for t in snapshot_times:
        n = int(round((t - cur.time) / dt))
        if n < 0 or abs(cur.time + n * dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"snapshot time {t:g} is not reachable in steps of {dt:g}")
        if n % record_every:
            raise ValueError(f"snapshot time {t:g} is not on the record grid")
        if n:
            cur, tr = propagate(cur, family, lam, dt, n, record_every, track_orders, **kwargs)
            parts.append(tr if not parts else PeakTrace(
                tr.times[1:], tr.values[1:], {l: v[1:] for l, v in tr.order_values.items()}))
        cur.time = float(t)
        fields.append(cur)
    if not parts:
        return fields, PeakTrace(np.array([wf.time]), np.array([peak_amplitude(wf)]))
    trace = PeakTrace(
        times=np.concatenate([p.times for p in parts]),
        values=np.concatenate([p.values for p in parts]),
        order_values={l: np.concatenate([p.order_values[l] for p in parts])
                      for l in parts[0].order_values},
    )
    return fields, trace


def free_modulus(w: float, t: float, x, period: float = 1.0) -> np.ndarray:
    """``|psi|`` of the Gaussian packet in the absence of the lattice."""
    kb = 2 * math.pi / period
    s = 1 + (4 * t / w**2) ** 2
    x = np.asarray(x, dtype=float)
    return s**-0.25 * np.exp(-((x + kb * t) ** 2) / (w**2 * s))
