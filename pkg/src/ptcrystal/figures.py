"""Figure pipelines: CSV data plus a generated matplotlib script per figure."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bloch import band_structure, default_q_grid
from .config import RunConfig
from .errors import AccuracyWarning
from .io import write_csv
from .packet import (
    SpectrumProfile,
    asymptotic_psi1,
    free_modulus,
    init_gaussian,
    late_slope,
    onset_time,
    plateau_value,
    propagate,
    propagate_snapshots,
)
from .singularity import scan_singularities

FIGURES = ("fig1b", "fig2", "fig3", "fig4", "fig5")


def _header(cfg: RunConfig, lam: float, w: float | None = None) -> list[str]:
    line = f"lambda={lam:g}, V0={cfg['potential.v0']:g}, a={cfg['potential.a']:g}"
    return [line + (f", w={w:g}" if w is not None else "")]


def _write_script(out: Path, name: str, body: str) -> Path:
    path = out / f"{name}_plot.py"
    path.write_text(
        '"""Plot script generated by ptcrystal; run from the output directory."""\n'
        "import csv\n\nimport matplotlib.pyplot as plt\n\n\n"
        "def load(name):\n"
        "    with open(name) as fh:\n"
        "        rows = [ln for ln in fh if not ln.startswith('#')]\n"
        "    return list(csv.DictReader(rows))\n\n\n"
        + body
    )
    return path


def fig1b(cfg: RunConfig, out: Path, threads: int = 1) -> str:
    fam = cfg.family()
    table = band_structure(fam, cfg["bloch.n_trunc"], default_q_grid(fam.period, cfg["bloch.n_q"]),
                           threads=threads, tol_resid=cfg["bloch.tol_resid"])
    write_csv(out / "bands.csv", ["q", "band_index", "re_E", "im_E", "kappa"],
              ((q, a, e.real, e.imag, k) for q, a, e, k in table.rows()), _header(cfg, fam.lam))
    report = scan_singularities(fam, None, cfg["bloch.n_trunc"],
                                gap_tol=cfg["singularity.gap_tol_rel"] * fam.k_bragg**2,
                                kappa_tol=cfg["singularity.kappa_tol"])
    marks = [p for p in report.points if p.classification == "defective"
             and p.energy.real in report.singular_energies]
    write_csv(out / "singular_points.csv", ["q", "E"],
              ((p.q, p.energy.real) for p in marks), _header(cfg, fam.lam))
    _write_script(out, "fig1b", (
        "bands = load('bands.csv')\n"
        "marks = load('singular_points.csv')\n"
        "emax = max(float(m['E']) for m in marks) * 1.05 if marks else 150.0\n"
        "fig, ax = plt.subplots(figsize=(4, 5))\n"
        "for b in sorted({int(r['band_index']) for r in bands}):\n"
        "    pts = [(float(r['q']), float(r['re_E'])) for r in bands if int(r['band_index']) == b]\n"
        "    ax.plot(*zip(*pts), 'k-', lw=0.8)\n"
        "for m in marks:\n"
        "    ax.plot(float(m['q']), float(m['E']), 'o', mfc='none', mec='r')\n"
        "ax.set_ylim(0, emax)\nax.set_xlabel('q')\nax.set_ylabel('E')\n"
        "fig.savefig('fig1b.png', dpi=150)\n"
    ))
    return f"fig1b: {len(table.q)} q-points, {len(marks)} singular points up to E={max(report.singular_energies, default=0):.6g}"


def _packet_map(cfg: RunConfig, out: Path, name: str, lam: float) -> tuple[str, object]:
    """Space-time map of ``|psi|`` and the peak trace for the default packet."""
    fam = cfg.family(lam)
    w, t_end, dt = cfg["packet.w"], cfg["packet.t_end"], cfg["packet.dt"]
    wf = init_gaussian(w, cfg["packet.length"], cfg["packet.points"], fam.period)
    n_map = int(round(t_end / cfg["figure.map_dt"]))
    grid = sorted({round(i * cfg["figure.map_dt"], 9) for i in range(n_map + 1)}
                  | {float(t) for t in cfg["figure.snapshots"] if t <= t_end})
    fields, trace = propagate_snapshots(wf, fam, grid, None, dt, cfg["packet.record_every"],
                                        track_orders=(1,))
    stride = cfg["figure.map_stride"]
    x = wf.x_grid
    rows = ((f.time, xv, av) for f in fields
            for xv, av in zip(x[::stride], np.abs(f.values[::stride])))
    write_csv(out / f"{name}_map.csv", ["t", "x", "abs_psi"], rows, _header(cfg, lam, w))
    write_csv(out / f"{name}_peaks.csv", ["t", "psi_m", "psi_1"],
              zip(trace.times, trace.values, trace.order_values[1]), _header(cfg, lam, w))
    return fields, trace


_MAP_SCRIPT = (
    "rows = load('{name}_map.csv')\n"
    "ts = sorted({{float(r['t']) for r in rows}})\n"
    "xs = sorted({{float(r['x']) for r in rows}})\n"
    "grid = [[0.0] * len(xs) for _ in ts]\n"
    "ti = {{t: i for i, t in enumerate(ts)}}\nxi = {{x: i for i, x in enumerate(xs)}}\n"
    "for r in rows:\n"
    "    grid[ti[float(r['t'])]][xi[float(r['x'])]] = float(r['abs_psi'])\n"
    "peaks = load('{name}_peaks.csv')\n"
    "fig, (a, b) = plt.subplots(1, 2, figsize=(9, 4))\n"
    "a.imshow(grid, aspect='auto', origin='lower', extent=[xs[0], xs[-1], ts[0], ts[-1]])\n"
    "a.set_xlim(-500, 500)\na.set_xlabel('x')\na.set_ylabel('t')\n"
    "b.plot([float(r['t']) for r in peaks], [float(r['psi_m']) for r in peaks])\n"
    "b.set_xlabel('t')\nb.set_ylabel('psi_m')\n"
    "fig.savefig('{name}.png', dpi=150)\n"
)


def fig2(cfg: RunConfig, out: Path, threads: int = 1) -> str:
    lam = cfg["potential.lambda"]
    fields, trace = _packet_map(cfg, out, "fig2", lam)
    fam = cfg.family(lam)
    w, v0 = cfg["packet.w"], cfg["potential.v0"]
    prof = SpectrumProfile.bragg(w, fam.period)
    snaps = {round(float(t), 9) for t in cfg["figure.snapshots"]}
    stride = cfg["figure.profile_stride"]
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AccuracyWarning)
        for f in fields:
            if round(f.time, 9) not in snaps:
                continue
            x = f.x_grid[::stride]
            free = free_modulus(w, f.time, x, fam.period)
            asym = v0 * np.abs(asymptotic_psi1(prof, f.time, x, fam.period))
            rows.extend(zip([f.time] * x.size, x, np.abs(f.values[::stride]), free, asym))
    write_csv(out / "fig2_profiles.csv", ["t", "x", "abs_psi", "abs_free", "abs_psi1_asym"],
              rows, _header(cfg, lam, w))
    _write_script(out, "fig2", _MAP_SCRIPT.format(name="fig2") + (
        "prof = load('fig2_profiles.csv')\n"
        "fig, ax = plt.subplots(figsize=(6, 4))\n"
        "for t in sorted({float(r['t']) for r in prof}):\n"
        "    sel = [r for r in prof if float(r['t']) == t]\n"
        "    x = [float(r['x']) for r in sel]\n"
        "    ax.plot(x, [float(r['abs_psi']) for r in sel], '-', label=f't={t:g}')\n"
        "    ax.plot(x, [float(r['abs_free']) for r in sel], '--', color='gray')\n"
        "    ax.plot(x, [float(r['abs_psi1_asym']) for r in sel], ':', color='k')\n"
        "ax.set_xlim(-500, 500)\nax.legend()\nfig.savefig('fig2_profiles.png', dpi=150)\n"
    ))
    t, p1 = trace.times, trace.order_values[1]
    plateau = p1[(t >= 25 - 1e-9) & (t <= 40 + 1e-9)]
    msg = f"fig2: psi_m({t[-1]:g}) = {trace.values[-1]:.6g}"
    if plateau.size:
        msg += (f", order-1 peak over [25, 40] in [{plateau.min():.6g}, {plateau.max():.6g}]"
                f" (plateau {plateau_value(w, v0, fam.period):.6g})")
    return msg


def sweep_run(cfg: RunConfig, w: float, lam: float | None = None):
    """One w-sweep propagation on the enlarged sweep grid; returns the PeakTrace."""
    fam = cfg.family(lam)
    wf = init_gaussian(w, cfg["figure.sweep_length"], cfg["figure.sweep_points"], fam.period)
    dt = cfg["packet.dt"]
    n = int(round(cfg["figure.sweep_t_end"] / dt))
    _, trace = propagate(wf, fam, None, dt, n, cfg["packet.record_every"], track_orders=(1,))
    return trace


def fig3(cfg: RunConfig, out: Path, threads: int = 1) -> str:
    lam = cfg["potential.lambda"]
    ws = [float(w) for w in cfg["figure.sweep_w"]]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        traces = list(pool.map(lambda w: sweep_run(cfg, w, lam), ws))
    v0, a = cfg["potential.v0"], cfg["potential.a"]
    rows, onsets = [], []
    for w, tr in zip(ws, traces):
        rows.extend((w, t, m, p) for t, m, p in zip(tr.times, tr.values, tr.order_values[1]))
        plat = plateau_value(w, v0, a)
        onsets.append((w, plat, onset_time(tr.times, tr.order_values[1], plat)))
    write_csv(out / "fig3_peaks.csv", ["w", "t", "psi_m", "psi_1"], rows, _header(cfg, lam))
    write_csv(out / "fig3_onset.csv", ["w", "plateau", "onset_t"], onsets, _header(cfg, lam))
    _write_script(out, "fig3", (
        "rows = load('fig3_peaks.csv')\n"
        "fig, ax = plt.subplots(figsize=(5, 4))\n"
        "for i, w in enumerate(sorted({float(r['w']) for r in rows}), 1):\n"
        "    sel = [r for r in rows if float(r['w']) == w]\n"
        "    ax.plot([float(r['t']) for r in sel], [float(r['psi_m']) for r in sel], label=f'{i}: w={w:g}')\n"
        "ax.set_xlabel('t')\nax.set_ylabel('psi_m')\nax.legend()\nfig.savefig('fig3.png', dpi=150)\n"
    ))
    return "fig3: onset " + ", ".join(f"w={w:g}: t={o:g}" for w, _, o in onsets)


def _threshold_fig(cfg: RunConfig, out: Path, name: str, lam: float) -> str:
    _, trace = _packet_map(cfg, out, name, lam)
    _write_script(out, name, _MAP_SCRIPT.format(name=name))
    t_end = float(trace.times[-1])
    slope = late_slope(trace.times, trace.values, 25.0, t_end) if t_end > 25 else math.nan
    return (f"{name}: lambda={lam:g}, max psi_m = {trace.values.max():.6g} at t={trace.times[trace.values.argmax()]:g},"
            f" psi_m({t_end:g}) = {trace.values[-1]:.6g}, late slope {slope:.4g}")


def fig4(cfg: RunConfig, out: Path, threads: int = 1) -> str:
    return _threshold_fig(cfg, out, "fig4", cfg["figure.lambda_below"])


def fig5(cfg: RunConfig, out: Path, threads: int = 1) -> str:
    return _threshold_fig(cfg, out, "fig5", cfg["figure.lambda_above"])


RUNNERS = {"fig1b": fig1b, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}
