"""Spectral singularities: defective Bloch pairs, the PT threshold and resolvent probes."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bloch import band_solve, band_structure, build_hq
from .errors import AccuracyWarning, NoTransitionError, NumericalError
from .potential import PotentialFamily, effective_coeffs

DEFECTIVE = "defective"
DIAGONALIZABLE = "degenerate-diagonalizable"
ISOLATED = "isolated"


@dataclass(frozen=True)
class PointRecord:
    q: float
    pair: tuple[int, int]
    energy: complex
    gap: float
    kappa_min: float
    classification: str


@dataclass
class SingularityReport:
    lam: float
    points: list[PointRecord] = field(default_factory=list)
    singular_energies: list[float] = field(default_factory=list)
    lambda_c: float | None = None


def _with_lam(family: PotentialFamily, lam):
    return family if lam is None else family.with_strength(lam)


def _special_q(family: PotentialFamily, q: float) -> float:
    edge = math.pi / family.period
    for target in (0.0, -edge):
        if abs(q - target) <= 1e-12 * edge:
            return target
    raise ValueError(f"classification is defined only at q=0 or q=-pi/a, got q={q!r}")


def classify_point(family: PotentialFamily, lam: float | None = None, n_trunc: int = 24,
                   q: float = 0.0, gap_tol: float | None = None,
                   kappa_tol: float = 1e-3) -> list[PointRecord]:
    """Classify every eigenvalue of ``H(q)`` at the zone centre or edge.

    Adjacent (sorted) eigenvalues closer than ``gap_tol`` form a pair that is
    ``defective`` when the smaller biorthogonal overlap is below ``kappa_tol``
    and ``degenerate-diagonalizable`` otherwise; every other eigenvalue is
    reported as ``isolated`` together with its nearest neighbour.
    """
    family = _with_lam(family, lam)
    q = _special_q(family, q)
    if gap_tol is None:
        gap_tol = 1e-4 * family.k_bragg**2
    sol = band_solve(build_hq(family, q, n_trunc), gap_tol=gap_tol)
    vals, kappa = sol.eigenvalues, sol.kappa
    records = []
    j = 0
    while j < vals.size:
        if j + 1 < vals.size and abs(vals[j + 1] - vals[j]) < gap_tol:
            kmin = float(min(kappa[j], kappa[j + 1]))
            records.append(PointRecord(
                q=q,
                pair=(j, j + 1),
                energy=complex(0.5 * (vals[j] + vals[j + 1])),
                gap=float(abs(vals[j + 1] - vals[j])),
                kappa_min=kmin,
                classification=DEFECTIVE if kmin < kappa_tol else DIAGONALIZABLE,
            ))
            j += 2
            continue
        dist = np.abs(vals - vals[j])
        dist[j] = np.inf
        nearest = int(np.argmin(dist)) if vals.size > 1 else j
        records.append(PointRecord(
            q=q,
            pair=(j, nearest),
            energy=complex(vals[j]),
            gap=float(dist[nearest]) if vals.size > 1 else math.inf,
            kappa_min=float(kappa[j]),
            classification=ISOLATED,
        ))
        j += 1
    return records


def energy_cap(n_trunc: int, k_bragg: float, safety: float = 0.25) -> float:
    """Largest energy trusted under truncation ``n_trunc``: ``safety*(N k_B/2)^2``."""
    return safety * (0.5 * n_trunc * k_bragg) ** 2


def scan_singularities(family: PotentialFamily, lam: float | None = None, n_trunc: int = 24,
                       gap_tol: float | None = None, kappa_tol: float = 1e-3,
                       safety: float = 0.25) -> SingularityReport:
    family = _with_lam(family, lam)
    edge = math.pi / family.period
    points = []
    for q in (0.0, -edge):
        points.extend(classify_point(family, None, n_trunc, q, gap_tol, kappa_tol))
    cap = energy_cap(n_trunc, family.k_bragg, safety) * (1 + 1e-9)
    energies = sorted(
        p.energy.real for p in points if p.classification == DEFECTIVE and p.energy.real <= cap
    )
    merged: list[float] = []
    for e in energies:
        if not merged or abs(e - merged[-1]) > 1e-9 * max(1.0, abs(e)):
            merged.append(e)
    return SingularityReport(lam=family.lam, points=points, singular_energies=merged)


def singular_energies(family: PotentialFamily, lam: float | None = None, n_trunc: int = 24,
                      **kwargs) -> list[float]:
    """Sorted real parts of defective energies at ``q = 0`` and ``q = -pi/a``.

    Only energies below ``energy_cap(n_trunc, k_B)`` are reported.
    """
    return scan_singularities(family, lam, n_trunc, **kwargs).singular_energies


def max_imag(family: PotentialFamily, lam: float, n_trunc: int = 24, n_q: int = 65,
             threads: int = 1) -> float:
    """``max |Im E|`` over bands and ``n_q`` points of ``[-pi/a, 0]``."""
    edge = math.pi / family.period
    grid = np.linspace(-edge, 0.0, n_q)
    table = band_structure(family.with_strength(lam), n_trunc, grid, threads=threads)
    return float(np.abs(table.energies.imag).max())


def find_lambda_c(family: PotentialFamily, n_trunc: int = 24, lam_lo: float = 0.5,
                  lam_hi: float = 1.5, tol: float = 1e-3, n_q: int = 65,
                  im_tol: float | None = None, threads: int = 1) -> float:
    """Bisect the onset of complex eigenvalues within ``[lam_lo, lam_hi]``.

    The indicator is ``max |Im E| > im_tol`` (default ``1e-8 k_B^2``) on a
    grid containing ``q = 0`` and ``q = -pi/a``.  Returns the midpoint of the
    final bracket, whose width is at most ``tol``.
    """
    if im_tol is None:
        im_tol = 1e-8 * family.k_bragg**2
    if not lam_lo < lam_hi:
        raise ValueError("need lam_lo < lam_hi")

    def broken(lam):
        return max_imag(family, lam, n_trunc, n_q, threads) > im_tol

    b_lo, b_hi = broken(lam_lo), broken(lam_hi)
    if b_lo == b_hi:
        raise NoTransitionError(
            f"singularity: reality indicator is {'complex' if b_lo else 'real'} at both "
            f"lambda={lam_lo:g} and lambda={lam_hi:g}"
        )
    lo, hi = lam_lo, lam_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if broken(mid) == b_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _graded_nodes(c0: float, c1: float, n_per_panel: int, s_min: float):
    """Composite midpoint nodes on ``[c0, c1]``, dyadically graded toward both ends."""
    half = 0.5 * (c1 - c0)
    depth = max(1, min(60, math.ceil(math.log2(half / s_min)))) if half > s_min else 1
    edges = np.concatenate([[0.0], half * 0.5 ** np.arange(depth, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        h = (hi - lo) / n_per_panel
        mids = lo + h * (np.arange(n_per_panel) + 0.5)
        nodes.extend([c0 + mids, c1 - mids])
        weights.extend([np.full(n_per_panel, h)] * 2)
    return np.concatenate(nodes), np.concatenate(weights)


def _crossings(family: PotentialFamily, n_trunc: int, energy: float, n_coarse: int = 257):
    edge = math.pi / family.period
    grid = np.linspace(-edge, edge, n_coarse)
    re = band_structure(family, n_trunc, grid).energies.real - energy
    out = []
    for i in range(n_coarse - 1):
        flips = np.nonzero(np.sign(re[i]) * np.sign(re[i + 1]) < 0)[0]
        for a in flips:
            f0, f1 = re[i, a], re[i + 1, a]
            out.append(grid[i] + (grid[i + 1] - grid[i]) * f0 / (f0 - f1))
    return out


def quadrature_nodes(family: PotentialFamily, n_trunc: int, energy: float, eta: float,
                     n_quad: int = 64):
    """Graded midpoint nodes over the zone, refined at ``q = 0``, ``+-pi/a`` and band crossings."""
    edge = math.pi / family.period
    centres = sorted(set([-edge, 0.0, edge] + _crossings(family, n_trunc, energy)))
    merged = [centres[0]]
    for c in centres[1:]:
        if c - merged[-1] > 1e-9 * edge:
            merged.append(c)
    s_min = 1e-3 * eta / family.k_bragg
    qs, ws = [], []
    for c0, c1 in zip(merged[:-1], merged[1:]):
        q, w = _graded_nodes(c0, c1, n_quad, s_min)
        qs.append(q)
        ws.append(w)
    return np.concatenate(qs), np.concatenate(ws)


def projected_resolvent(family: PotentialFamily, lam: float | None = None, n_trunc: int = 8,
                        m0: int = 1, n0: int = 0, energy: float = math.pi**2,
                        eta: float = 1e-2, n_quad: int = 64, backend=None) -> complex:
    """Zone integral of ``[(E + i eta - H(q))^{-1}]_{m0, n0}``.

    This is the resolvent matrix element between the two states whose only
    plane-wave content is the flat spectral functions on orders ``m0`` and
    ``n0``.  ``n_quad`` midpoint nodes are used on each dyadic panel.
    """
    family = _with_lam(family, lam)
    if not eta > 0:
        raise ValueError("eta must be positive")
    if n_quad < 64:
        raise ValueError("n_quad must be at least 64")
    if max(abs(m0), abs(n0)) > n_trunc:
        raise ValueError("m0 and n0 must lie within the truncation -N..N")
    if n_trunc < max(1, family.n_max):
        raise ValueError(f"n_trunc={n_trunc} smaller than the potential support {family.n_max}")
    kern = kernels if backend is None else backend
    coeffs = effective_coeffs(family)
    offsets = np.array(list(coeffs), dtype=np.int64)
    values = np.array(list(coeffs.values()), dtype=complex)
    orders = np.arange(-n_trunc, n_trunc + 1)
    kb = family.k_bragg
    z = complex(energy, eta)
    row, col = m0 + n_trunc, n0 + n_trunc

    qs, ws = quadrature_nodes(family, n_trunc, energy, eta, n_quad)
    diag = (qs[:, None] + orders[None, :] * kb) ** 2
    vals = np.asarray(kern.resolvent_nodes(diag, offsets, values, z, row, col))
    bad = ~np.isfinite(vals)
    if bad.any():
        warnings.warn(f"singularity: {bad.sum()} singular quadrature node(s) shifted by half a step",
                      AccuracyWarning, stacklevel=2)
        shifted = qs[bad] + 0.5 * ws[bad]
        diag = (shifted[:, None] + orders[None, :] * kb) ** 2
        vals[bad] = kern.resolvent_nodes(diag, offsets, values, z, row, col)
        if not np.all(np.isfinite(vals)):
            raise NumericalError("singularity: resolvent quadrature hit a singular system twice")
    return complex(np.sum(ws * vals))


def resolvent_sweep(family: PotentialFamily, etas, lam: float | None = None, threads: int = 1,
                    **kwargs) -> list[tuple[float, complex]]:
    def one(eta):
        return float(eta), projected_resolvent(family, lam, eta=eta, **kwargs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, etas))
    return [one(eta) for eta in etas]
