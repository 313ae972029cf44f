"""Plane-wave Bloch matrices, their eigen-decomposition and band structures.

``H(q)[n, m] = (q + n k_B)^2 delta_{nm} + V_{n-m}`` on the orders
``n = -N..N``.  Eigenpairs come from LAPACK (Hessenberg reduction + shifted QR),
with left and right eigenvectors.  Near-degenerate pairs are then re-solved
on a two-dimensional reduced problem so that their biorthogonal overlap
keeps full relative precision even when the coupling that makes them
defective is far below the round-off level of the full matrix.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import EigensolverError
from .potential import PotentialFamily, effective_coeffs

_ZONE_SLACK = 1e-12
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BlochMatrix:
    q: float
    n_trunc: int
    k_bragg: float
    entries: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_trunc, self.n_trunc + 1)

    @property
    def dim(self) -> int:
        return 2 * self.n_trunc + 1


@dataclass(frozen=True)
class BandSolution:
    """Sorted eigenpairs of one Bloch matrix.

    ``right_vectors[:, j]`` and ``left_vectors[:, j]`` have unit 2-norm, with
    ``H w = E w`` and ``l^H H = E l^H``.  ``kappa[j] = |l^H w|`` is the
    biorthogonal overlap: 1 for normal matrices, 0 at a defective eigenvalue.
    """

    q: float
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    kappa: np.ndarray
    refined: tuple[tuple[int, int], ...] = ()


def check_zone(q: float, period: float) -> float:
    """Validate a Bloch wave number against the closed zone ``[-pi/a, pi/a]``."""
    edge = math.pi / period
    if not (-edge * (1 + _ZONE_SLACK) <= q <= edge * (1 + _ZONE_SLACK)):
        raise ValueError(f"q={q!r} lies outside the first Brillouin zone [-{edge:g}, {edge:g}]")
    return float(q)


def build_hq(family: PotentialFamily, q: float, n_trunc: int) -> BlochMatrix:
    """Assemble the truncated plane-wave matrix ``H(q)``."""
    check_zone(q, family.period)
    if n_trunc < max(1, family.n_max):
        raise ValueError(f"n_trunc={n_trunc} smaller than the potential support {family.n_max}")
    kb = family.k_bragg
    orders = np.arange(-n_trunc, n_trunc + 1)
    dim = orders.size
    h = np.diag(((q + orders * kb) ** 2).astype(complex))
    for n, v in effective_coeffs(family).items():
        if abs(n) < dim:
            h += np.diag(np.full(dim - abs(n), v), -n)
    return BlochMatrix(q=float(q), n_trunc=n_trunc, k_bragg=kb, entries=h)


def _overlap(left, right):
    return np.abs(np.einsum("ij,ij->j", left.conj(), right))


def _normalize(v):
    return v / np.linalg.norm(v, axis=0)


def _unit(v):
    big = np.abs(v).max()
    if big == 0:
        return v
    v = (v.real / big) + 1j * (v.imag / big)
    return v / np.linalg.norm(v)


def _rdiv(z, r):
    # componentwise, so a subnormal r cannot overflow through 1/r
    z = complex(z)
    return complex(z.real / r, z.imag / r)


def _pick(v1, v2):
    return _unit(v1 if np.abs(v1).max() >= np.abs(v2).max() else v2)


def _eig2(m, diff=None):
    """Closed-form eigen-decomposition of a 2x2 matrix.

    Returns ``(values, right, left_rows)`` with unit-norm vectors and
    ``left_rows[j] @ m = values[j] * left_rows[j]``.  ``diff`` is the diagonal
    difference ``m[0,0] - m[1,1]`` when it is known more accurately than the
    rounded entries give it.  Without it, a difference at the round-off level
    of the entries is treated as zero.  The square root is scaled against
    underflow and the vector components use ``+-s`` directly, so an exact
    Jordan block yields zero overlap and a splitting far below ``eps*|E|`` is
    still resolved.
    """
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    if diff is None:
        diff = a - d
        if abs(diff) <= 8 * _EPS * (abs(a) + abs(d)):
            diff = 0.0
    half = 0.5 * diff
    mean = 0.5 * (a + d)
    sigma = max(abs(half), np.sqrt(abs(b)) * np.sqrt(abs(c)))
    s = 0.0 if sigma == 0 else sigma * np.sqrt(_rdiv(half, sigma) ** 2 + _rdiv(b, sigma) * _rdiv(c, sigma))
    if b == 0 and c == 0 and half == 0:
        eye = np.eye(2, dtype=complex)
        return np.array([mean, mean], dtype=complex), eye, eye
    values = np.empty(2, dtype=complex)
    right = np.empty((2, 2), dtype=complex)
    left = np.empty((2, 2), dtype=complex)
    for j, sgn in enumerate((1.0, -1.0)):
        # e - a and e - d without cancellation
        ea, ed = -half + sgn * s, half + sgn * s
        values[j] = mean + sgn * s
        right[:, j] = _pick(np.array([b, ea]), np.array([ed, c]))
        left[j] = _pick(np.array([c, ea]), np.array([ed, b]))
    return values, right, left


def _reduced_pair(h, energy_guess, n_iter=4, bare_diff=None):
    """Eigenpairs of ``h`` near ``energy_guess`` from a two-state Schur complement.

    The two plane-wave orders whose diagonal entries lie closest to the guess
    form the retained space P; the rest Q is eliminated exactly through
    ``H_eff(E) = H_PP + H_PQ (E - H_QQ)^{-1} H_QP``.  Each branch is iterated
    to self-consistency and lifted back to full left/right eigenvectors.
    ``bare_diff(i, j)`` gives the exact difference of two bare diagonal
    entries of ``h``.
    """
    dim = h.shape[0]
    p = np.sort(np.argsort(np.abs(np.diag(h) - energy_guess))[:2])
    q = np.setdiff1d(np.arange(dim), p)
    h_pp, h_pq, h_qp, h_qq = h[np.ix_(p, p)], h[np.ix_(p, q)], h[np.ix_(q, p)], h[np.ix_(q, q)]
    eye_q = np.eye(q.size)

    d0 = bare_diff(p[0], p[1]) if bare_diff is not None else None

    def reduce(e):
        shifted = e * eye_q - h_qq
        x = np.linalg.solve(shifted, h_qp)
        y = np.linalg.solve(shifted.T, h_pq.T).T
        sigma = h_pq @ x
        diff = None
        if d0 is not None:
            # kinetic part exact; self-energy difference at its own round-off is zero
            ds = sigma[0, 0] - sigma[1, 1]
            if abs(ds) <= 8 * _EPS * (abs(sigma[0, 0]) + abs(sigma[1, 1])):
                ds = 0.0
            diff = d0 + ds
        return h_pp + sigma, x, y, diff

    m, _, _, diff = reduce(energy_guess)
    values, _, _ = _eig2(m, diff)
    out = []
    for branch in range(2):
        e = values[branch]
        for _ in range(n_iter):
            m, x, y, diff = reduce(e)
            cand, _, _ = _eig2(m, diff)
            e_new = cand[np.argmin(np.abs(cand - e))]
            done = abs(e_new - e) <= 1e-15 * max(1.0, abs(e))
            e = e_new
            if done:
                break
        m, x, y, diff = reduce(e)
        cand, right2, left2 = _eig2(m, diff)
        j = int(np.argmin(np.abs(cand - e)))
        u, v = right2[:, j], left2[j]
        w = np.zeros(dim, dtype=complex)
        w[p], w[q] = u, x @ u
        yrow = np.zeros(dim, dtype=complex)
        yrow[p], yrow[q] = v, v @ y
        out.append((e, w, yrow.conj()))
    return out


def band_solve(matrix: BlochMatrix, tol_resid: float = 1e-9, gap_tol: float | None = None) -> BandSolution:
    """Eigenvalues, left/right eigenvectors and overlaps of ``matrix``.

    Eigenvalues are sorted by real then imaginary part.  Adjacent pairs closer
    than ``gap_tol`` (default ``1e-4 k_B^2``) are refined through a reduced
    two-state problem.  Raises :class:`EigensolverError` on non-convergence or
    when a residual exceeds ``tol_resid * ||H||``.
    """
    h = matrix.entries
    if not np.all(np.isfinite(h)):
        raise EigensolverError("Bloch matrix has non-finite entries")
    if gap_tol is None:
        gap_tol = 1e-4 * matrix.k_bragg**2
    try:
        vals, vl, vr = sla.eig(h, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"bloch: eigensolver failed at q={matrix.q:g}: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise EigensolverError(f"bloch: eigensolver returned non-finite values at q={matrix.q:g}")
    vr, vl = _normalize(vr), _normalize(vl)
    orders, kb, q = matrix.orders, matrix.k_bragg, matrix.q

    def bare_diff(i, j):
        # (q + n_i kB)^2 - (q + n_j kB)^2, exact zero at a crossing
        return (orders[i] - orders[j]) * kb * (2 * q + (orders[i] + orders[j]) * kb)

    order = np.lexsort((vals.imag, vals.real))
    vals, vl, vr = vals[order], vl[:, order], vr[:, order]

    refined = []
    j = 0
    while j < vals.size - 1:
        if abs(vals[j + 1] - vals[j]) < gap_tol:
            try:
                pair = _reduced_pair(h, 0.5 * (vals[j] + vals[j + 1]), bare_diff=bare_diff)
            except np.linalg.LinAlgError:
                j += 1
                continue
            for slot, (e, w, l) in zip((j, j + 1), sorted(pair, key=lambda r: (r[0].real, r[0].imag))):
                vals[slot] = e
                vr[:, slot] = _unit(w)
                vl[:, slot] = _unit(l)
            refined.append((j, j + 1))
            j += 2
        else:
            j += 1

    kappa = np.minimum(_overlap(vl, vr), 1.0)
    norm_h = np.linalg.norm(h, 2)
    resid = np.linalg.norm(h @ vr - vr * vals, axis=0)
    worst = float(resid.max()) if resid.size else 0.0
    if worst > tol_resid * max(norm_h, 1.0):
        raise EigensolverError(
            f"bloch: residual {worst:.3e} exceeds {tol_resid:g}*||H|| at q={matrix.q:g}"
        )
    return BandSolution(
        q=matrix.q,
        eigenvalues=vals,
        right_vectors=vr,
        left_vectors=vl,
        kappa=kappa,
        refined=tuple(refined),
    )


@dataclass(frozen=True)
class BandTable:
    """Band structure on a q-grid: ``energies[i, alpha]`` and ``kappa[i, alpha]``."""

    q: np.ndarray
    energies: np.ndarray
    kappa: np.ndarray

    def rows(self):
        for i, q in enumerate(self.q):
            for alpha, (e, k) in enumerate(zip(self.energies[i], self.kappa[i])):
                yield float(q), alpha, complex(e), float(k)


def default_q_grid(period: float, n_q: int = 101) -> np.ndarray:
    edge = math.pi / period
    return np.linspace(-edge, edge, n_q)


def band_structure(family: PotentialFamily, n_trunc: int = 24, q_grid=None,
                   threads: int = 1, tol_resid: float = 1e-9) -> BandTable:
    """Sorted complex bands ``E_alpha(q)`` over ``q_grid`` (closed zone).

    Grid points are independent; with ``threads > 1`` they are solved in a
    pool and assembled in grid order.
    """
    if q_grid is None:
        q_grid = default_q_grid(family.period)
    q_grid = np.asarray(q_grid, dtype=float)
    for q in q_grid:
        check_zone(q, family.period)

    def solve(q):
        return band_solve(build_hq(family, q, n_trunc), tol_resid=tol_resid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sols = list(pool.map(solve, q_grid))
    else:
        sols = [solve(q) for q in q_grid]
    return BandTable(
        q=q_grid,
        energies=np.array([s.eigenvalues for s in sols]),
        kappa=np.array([s.kappa for s in sols]),
    )
