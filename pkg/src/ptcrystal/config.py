"""Run configuration: embedded defaults, ``key = value`` files and overrides.

Keys are dotted (``packet.w``).  Each value is coerced to the type of its
default; list-valued keys take comma-separated numbers.  Unknown keys and
malformed values raise :class:`ConfigError`.
"""
from __future__ import annotations

import math
import os
from pathlib import Path

from .errors import ConfigError
from .potential import PotentialFamily, make_pt_lattice

AUTO = "auto"

DEFAULTS: dict[str, object] = {
    "potential.kind": "pt_lattice",
    "potential.v0": 0.2,
    "potential.a": 1.0,
    "potential.lambda": 1.0,
    # custom coefficients: "n:re:im; n:re:im"
    "potential.real": "",
    "potential.imag": "",
    "bloch.n_trunc": 24,
    "bloch.n_q": 101,
    "bloch.tol_resid": 1e-9,
    "singularity.gap_tol_rel": 1e-4,
    "singularity.kappa_tol": 1e-3,
    "singularity.lam_lo": 0.5,
    "singularity.lam_hi": 1.5,
    "singularity.lam_tol": 1e-3,
    "singularity.n_q": 65,
    "singularity.im_tol_rel": 1e-8,
    "singularity.scan_points": 11,
    "resolvent.n_trunc": 8,
    "resolvent.m0": 1,
    "resolvent.n0": 0,
    "resolvent.energy": AUTO,
    "resolvent.etas": (1e-2, 2.5e-3, 6.25e-4, 1.5625e-4),
    "resolvent.n_quad": 64,
    "ladder.n_trunc": 16,
    "ladder.k": AUTO,
    "ladder.t_end": 50.0,
    "ladder.n_records": 256,
    "ladder.method": "expm",
    "ladder.rtol": 1e-10,
    "packet.w": 80.0,
    "packet.length": 2048.0,
    "packet.points": 16384,
    "packet.dt": 0.002,
    "packet.t_end": 40.0,
    "packet.record_every": 50,
    "packet.orders": (0.0, 1.0),
    "figure.snapshots": (0.0, 10.0, 20.0, 30.0, 40.0),
    "figure.map_dt": 1.0,
    "figure.map_stride": 16,
    "figure.profile_stride": 4,
    "figure.sweep_w": (40.0, 80.0, 150.0, 300.0),
    "figure.sweep_length": 4096.0,
    "figure.sweep_points": 32768,
    "figure.sweep_t_end": 70.0,
    "figure.lambda_below": 0.9,
    "figure.lambda_above": 1.1,
    "run.out_dir": "out",
    "run.threads": 1,
}

_POSITIVE = {
    "potential.a", "bloch.n_trunc", "bloch.n_q", "bloch.tol_resid", "singularity.gap_tol_rel",
    "singularity.kappa_tol", "singularity.lam_tol", "singularity.n_q", "singularity.im_tol_rel",
    "singularity.scan_points", "resolvent.n_trunc", "resolvent.n_quad", "ladder.n_trunc",
    "ladder.t_end", "ladder.n_records", "ladder.rtol", "packet.w", "packet.length",
    "packet.points", "packet.dt", "packet.t_end", "packet.record_every", "figure.map_dt",
    "figure.map_stride", "figure.profile_stride", "figure.sweep_length", "figure.sweep_points",
    "figure.sweep_t_end", "run.threads",
}
_CHOICES = {
    "potential.kind": ("pt_lattice", "custom"),
    "ladder.method": ("expm", "rk"),
}


def _coerce(key: str, raw):
    default = DEFAULTS[key]
    try:
        if isinstance(raw, str):
            raw = raw.strip()
        if default == AUTO:
            if raw == AUTO:
                return AUTO
            return float(raw)
        if isinstance(default, tuple):
            if isinstance(raw, str):
                return tuple(float(s) for s in raw.split(",") if s.strip())
            return tuple(float(v) for v in raw)
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            val = float(raw)
            if val != int(val):
                raise ValueError("not an integer")
            return int(val)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: bad value {raw!r} for {key}: {exc}") from None


class RunConfig:
    """Resolved configuration; ``cfg["packet.w"]`` style access."""

    def __init__(self, values: dict | None = None):
        self.values = dict(DEFAULTS)
        for key, val in (values or {}).items():
            self.set(key, val)

    def set(self, key: str, raw) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"config: unknown key {key!r}")
        if raw is None:
            return
        self.values[key] = _coerce(key, raw)

    def __getitem__(self, key: str):
        return self.values[key]

    def update(self, pairs) -> None:
        for key, val in pairs:
            self.set(key, val)

    def validate(self) -> "RunConfig":
        for key in _POSITIVE:
            val = self.values[key]
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"config: {key} must be positive, got {val!r}")
        for key, allowed in _CHOICES.items():
            if self.values[key] not in allowed:
                raise ConfigError(f"config: {key} must be one of {allowed}, got {self.values[key]!r}")
        if self.values["potential.lambda"] < 0:
            raise ConfigError("config: potential.lambda must be non-negative")
        if not self.values["resolvent.etas"] or min(self.values["resolvent.etas"]) <= 0:
            raise ConfigError("config: resolvent.etas must be positive")
        if self.values["resolvent.n_quad"] < 64:
            raise ConfigError("config: resolvent.n_quad must be at least 64")
        return self

    def dump(self) -> str:
        lines = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple):
                val = ", ".join(repr(v) for v in val)
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"

    def family(self, lam: float | None = None) -> PotentialFamily:
        lam = self.values["potential.lambda"] if lam is None else lam
        a = self.values["potential.a"]
        if self.values["potential.kind"] == "pt_lattice":
            return make_pt_lattice(self.values["potential.v0"], a, lam)
        try:
            return PotentialFamily(
                period=a,
                real_coeffs=parse_coeffs(self.values["potential.real"]),
                imag_coeffs=parse_coeffs(self.values["potential.imag"]),
                lam=lam,
            )
        except ValueError as exc:
            raise ConfigError(f"config: invalid custom potential: {exc}") from None

    def out_dir(self) -> Path:
        path = Path(self.values["run.out_dir"])
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"config: cannot create output directory {path}: {exc}") from None
        if not os.access(path, os.W_OK):
            raise ConfigError(f"config: output directory {path} is not writable")
        return path


def parse_coeffs(text: str) -> dict[int, complex]:
    """``"1:0.1:0; -1:0.1:0"`` -> ``{1: 0.1, -1: 0.1}``."""
    out: dict[int, complex] = {}
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"config: coefficient {item!r} is not n:re:im")
        try:
            out[int(parts[0])] = complex(float(parts[1]), float(parts[2]))
        except ValueError:
            raise ConfigError(f"config: coefficient {item!r} is not n:re:im") from None
    return out


def read_config_file(path) -> list[tuple[str, str]]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    pairs = []
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config: {path}:{num}: expected key = value")
        key, val = line.split("=", 1)
        pairs.append((key.strip(), val.strip()))
    return pairs
