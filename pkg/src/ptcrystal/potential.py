"""Complex periodic potentials stored as sparse Fourier series.

A potential of period ``a`` is written ``V(x) = V_R(x) + i*lam*V_I(x)`` with
real-valued ``V_R`` and ``V_I``.  Both parts are kept as integer-indexed maps of
Fourier coefficients on the harmonics ``exp(i*k_B*n*x)``, ``k_B = 2*pi/a``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

_HERMITIAN_TOL = 1e-12


def _freeze(coeffs: Mapping[int, complex] | None) -> Mapping[int, complex]:
    items = {} if coeffs is None else {int(n): complex(c) for n, c in coeffs.items()}
    return MappingProxyType(dict(sorted(items.items())))


@dataclass(frozen=True)
class PotentialFamily:
    """Periodic potential ``V_R + i*lam*V_I`` given by Fourier coefficients.

    Parameters
    ----------
    period : float
        Lattice period ``a`` (> 0).
    real_coeffs, imag_coeffs : mapping int -> complex
        Coefficients ``R_n`` and ``I_n`` of the real-valued functions
        ``V_R(x) = sum_n R_n exp(i k_B n x)`` and ``V_I``.  They must satisfy
        ``C_{-n} = conj(C_n)``.
    lam : float
        Anti-Hermitian strength (>= 0).
    """

    period: float
    real_coeffs: Mapping[int, complex] = field(default_factory=dict)
    imag_coeffs: Mapping[int, complex] = field(default_factory=dict)
    lam: float = 0.0

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be non-negative, got {self.lam!r}")
        for name in ("real_coeffs", "imag_coeffs"):
            coeffs = _freeze(getattr(self, name))
            for n, c in coeffs.items():
                partner = coeffs.get(-n, 0.0)
                if abs(partner - c.conjugate()) > _HERMITIAN_TOL * max(1.0, abs(c)):
                    raise ValueError(
                        f"{name}[{-n}] must equal conj({name}[{n}]) for a real-valued function"
                    )
            object.__setattr__(self, name, coeffs)
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def k_bragg(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def n_max(self) -> int:
        support = [abs(n) for n, c in self.effective().items()]
        return max(support, default=0)

    def with_strength(self, lam: float) -> "PotentialFamily":
        return dataclasses.replace(self, lam=lam)

    def effective(self) -> dict[int, complex]:
        return effective_coeffs(self)

    def __call__(self, x):
        return sample(self, x)


def make_pt_lattice(v0: float, a: float = 1.0, lam: float = 0.0) -> PotentialFamily:
    """PT lattice ``V_R = v0 cos(2 pi x/a)``, ``V_I = v0 sin(2 pi x/a)``.

    The effective coefficients are ``V_1 = v0 (1+lam)/2`` and
    ``V_{-1} = v0 (1-lam)/2``; at ``lam = 1`` the potential is ``v0 exp(i k_B x)``.
    """
    if not a > 0:
        raise ValueError(f"lattice period must be positive, got {a!r}")
    half = 0.5 * v0
    return PotentialFamily(
        period=a,
        real_coeffs={1: half, -1: half},
        imag_coeffs={1: -0.5j * v0, -1: 0.5j * v0},
        lam=lam,
    )


def effective_coeffs(family: PotentialFamily) -> dict[int, complex]:
    """Coefficients ``V_n = R_n + i*lam*I_n``; exact zeros are dropped."""
    out = {}
    for n in sorted(set(family.real_coeffs) | set(family.imag_coeffs)):
        v = family.real_coeffs.get(n, 0.0) + 1j * family.lam * family.imag_coeffs.get(n, 0.0)
        if v != 0:
            out[n] = complex(v)
    return out


def _series(coeffs: Mapping[int, complex], k_bragg: float, x):
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    for n, c in coeffs.items():
        total += c * np.exp(1j * k_bragg * n * x)
    return total


def sample(family: PotentialFamily, x):
    """Evaluate ``V(x)`` directly from the Fourier series (scalar or array)."""
    value = _series(effective_coeffs(family), family.k_bragg, x)
    return complex(value) if value.ndim == 0 else value


def sample_parts(family: PotentialFamily, x):
    """Return the series values ``(V_R(x), V_I(x))``; both are real up to round-off."""
    vr = _series(family.real_coeffs, family.k_bragg, x)
    vi = _series(family.imag_coeffs, family.k_bragg, x)
    return vr, vi


def is_pt_symmetric(family: PotentialFamily, tol: float = 1e-10) -> bool:
    """True iff ``V(-x) = conj(V(x))`` about ``x = 0``, i.e. every ``V_n`` is real.

    PT symmetry about a shifted centre is not detected.
    """
    return all(abs(v.imag) <= tol for v in effective_coeffs(family).values())
