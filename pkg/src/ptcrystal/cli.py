"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import traceback

import numpy as np

from . import figures
from .bloch import band_structure, default_q_grid
from .config import AUTO, RunConfig, read_config_file
from .errors import ConfigError, NumericalError
from .io import write_csv
from .ladder import detect_secular, evolve_orders
from .packet import init_gaussian, late_slope, plateau_value, propagate
from .singularity import find_lambda_c, max_imag, resolvent_sweep, scan_singularities

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# flag dest -> config key, per subcommand
_FLAGS = {
    "bands": {"n_trunc": "bloch.n_trunc", "n_q": "bloch.n_q"},
    "singularities": {"n_trunc": "bloch.n_trunc", "kappa_tol": "singularity.kappa_tol"},
    "lambda-scan": {"lo": "singularity.lam_lo", "hi": "singularity.lam_hi",
                    "tol": "singularity.lam_tol", "n_trunc": "bloch.n_trunc"},
    "resolvent-probe": {"energy": "resolvent.energy", "eta": "resolvent.etas", "m0": "resolvent.m0",
                        "n0": "resolvent.n0", "n_quad": "resolvent.n_quad",
                        "n_trunc": "resolvent.n_trunc"},
    "evolve-orders": {"k": "ladder.k", "t_end": "ladder.t_end", "n_records": "ladder.n_records",
                      "method": "ladder.method", "n_trunc": "ladder.n_trunc"},
    "packet": {"w": "packet.w", "t_end": "packet.t_end", "dt": "packet.dt",
               "length": "packet.length", "points": "packet.points"},
    "figure": {},
}
_COMMON = {"v0": "potential.v0", "a": "potential.a", "lam": "potential.lambda",
           "out_dir": "run.out_dir", "threads": "run.threads"}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--out-dir", default=d, help="output directory for CSVs and plot scripts")
    p.add_argument("--threads", type=int, default=d, help="worker threads")
    p.add_argument("--config", default=d, help="key = value configuration file")
    p.add_argument("--show-config", action="store_true", default=d or False,
                   help="print the resolved configuration and exit")
    p.add_argument("--set", action="append", default=d, metavar="KEY=VALUE",
                   help="override any configuration key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptcrystal",
        description="Complex band structures, spectral singularities and Bragg scattering.",
    )
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    common.add_argument("--v0", type=float, help="lattice amplitude V0")
    common.add_argument("--a", type=float, help="lattice period")
    common.add_argument("--lambda", dest="lam", type=float, help="anti-Hermitian strength")

    p = sub.add_parser("bands", parents=[common], help="band structure -> bands.csv")
    p.add_argument("--n-trunc", type=int)
    p.add_argument("--n-q", type=int)

    p = sub.add_parser("singularities", parents=[common], help="defect classification -> defects.csv")
    p.add_argument("--n-trunc", type=int)
    p.add_argument("--kappa-tol", type=float)

    p = sub.add_parser("lambda-scan", parents=[common], help="symmetry-breaking threshold")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--n-trunc", type=int)

    p = sub.add_parser("resolvent-probe", parents=[common], help="projected resolvent -> resolvent.csv")
    p.add_argument("--energy", type=float)
    p.add_argument("--eta", type=float, action="append", help="repeatable")
    p.add_argument("--m0", type=int)
    p.add_argument("--n0", type=int)
    p.add_argument("--n-quad", type=int)
    p.add_argument("--n-trunc", type=int)

    p = sub.add_parser("evolve-orders", parents=[common], help="diffracted orders -> trace.csv")
    p.add_argument("--k", type=float, help="incident wave number (default -k_B/2)")
    p.add_argument("--t-end", type=float)
    p.add_argument("--n-records", type=int)
    p.add_argument("--method", choices=("expm", "rk"))
    p.add_argument("--n-trunc", type=int)

    p = sub.add_parser("packet", parents=[common], help="wave-packet run -> peaks.csv, field.csv")
    p.add_argument("--w", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--length", type=float)
    p.add_argument("--points", type=int)

    p = sub.add_parser("figure", parents=[common], help="figure data and plot script")
    p.add_argument("figure_id", choices=figures.FIGURES)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config))
    for item in getattr(args, "set", None) or ():
        if "=" not in item:
            raise ConfigError(f"config: --set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        cfg.set(key.strip(), val)
    mapping = dict(_COMMON)
    mapping.update(_FLAGS.get(args.command, {}))
    for dest, key in mapping.items():
        val = getattr(args, dest, None)
        if val is not None:
            cfg.set(key, tuple(val) if isinstance(val, list) else val)
    return cfg.validate()


def _bands(cfg, out, threads):
    fam = cfg.family()
    table = band_structure(fam, cfg["bloch.n_trunc"], default_q_grid(fam.period, cfg["bloch.n_q"]),
                           threads=threads, tol_resid=cfg["bloch.tol_resid"])
    write_csv(out / "bands.csv", ["q", "band_index", "re_E", "im_E", "kappa"],
              ((q, a, e.real, e.imag, k) for q, a, e, k in table.rows()))
    return (f"bands: {table.q.size} q-points x {table.energies.shape[1]} bands, "
            f"max|Im E| = {np.abs(table.energies.imag).max():.3e}")


def _singularities(cfg, out, threads):
    fam = cfg.family()
    rep = scan_singularities(fam, None, cfg["bloch.n_trunc"],
                             gap_tol=cfg["singularity.gap_tol_rel"] * fam.k_bragg**2,
                             kappa_tol=cfg["singularity.kappa_tol"])
    rows = ((rep.lam, p.q, p.energy.real, p.gap, p.kappa_min, p.classification)
            for p in rep.points if p.classification != "isolated")
    write_csv(out / "defects.csv", ["lambda", "q", "E_re", "gap", "kappa_min", "classification"], rows)
    energies = ", ".join(f"{e:.6g}" for e in rep.singular_energies) or "none"
    return f"singularities: lambda={rep.lam:g}, singular energies: {energies}"


def _lambda_scan(cfg, out, threads):
    fam = cfg.family()
    lo, hi = cfg["singularity.lam_lo"], cfg["singularity.lam_hi"]
    kw = dict(n_trunc=cfg["bloch.n_trunc"], n_q=cfg["singularity.n_q"], threads=threads)
    lam_c = find_lambda_c(fam, lam_lo=lo, lam_hi=hi, tol=cfg["singularity.lam_tol"],
                          im_tol=cfg["singularity.im_tol_rel"] * fam.k_bragg**2, **kw)
    grid = np.linspace(lo, hi, cfg["singularity.scan_points"])
    write_csv(out / "lambda_scan.csv", ["lambda", "max_im_E"],
              ((lam, max_imag(fam, lam, **kw)) for lam in grid))
    return f"lambda-scan: lambda_c = {lam_c:.4f} (bracket [{lo:g}, {hi:g}], tol {cfg['singularity.lam_tol']:g})"


def _resolvent(cfg, out, threads):
    fam = cfg.family()
    energy = cfg["resolvent.energy"]
    if energy == AUTO:
        energy = (0.5 * fam.k_bragg) ** 2
    etas = sorted(cfg["resolvent.etas"], reverse=True)
    res = resolvent_sweep(fam, etas, None, threads, n_trunc=cfg["resolvent.n_trunc"],
                          m0=cfg["resolvent.m0"], n0=cfg["resolvent.n0"], energy=energy,
                          n_quad=cfg["resolvent.n_quad"])
    write_csv(out / "resolvent.csv", ["eta", "re_G", "im_G", "abs_G"],
              ((eta, g.real, g.imag, abs(g)) for eta, g in res))
    msg = f"resolvent-probe: E={energy:.6g}, |G| = " + ", ".join(f"{abs(g):.6g}" for _, g in res)
    if len(res) > 1:
        msg += f"; last ratio {abs(res[-1][1]) / abs(res[-2][1]):.4g}"
    return msg


def _evolve(cfg, out, threads):
    fam = cfg.family()
    k = cfg["ladder.k"]
    if k == AUTO:
        k = -0.5 * fam.k_bragg
    tr = evolve_orders(fam, None, cfg["ladder.n_trunc"], k, cfg["ladder.t_end"],
                       cfg["ladder.n_records"], cfg["ladder.method"], cfg["ladder.rtol"])
    write_csv(out / "trace.csv", ["t", "l", "re_c", "im_c", "abs_c"],
              ((t, l, c.real, c.imag, abs(c)) for t, l, c in tr.rows()),
              [f"k={tr.k:.12g}, q={tr.q:.12g}, l0={tr.l0}, lambda={tr.lam:g}"])
    fit = detect_secular(tr, tr.l0 + 1)
    return (f"evolve-orders: order {tr.l0 + 1} slope {fit.slope:.6g}, r2 {fit.r2:.4f}, "
            f"secular={'yes' if fit.secular else 'no'}")


def _packet(cfg, out, threads):
    fam = cfg.family()
    w, dt = cfg["packet.w"], cfg["packet.dt"]
    orders = tuple(int(l) for l in cfg["packet.orders"])
    wf = init_gaussian(w, cfg["packet.length"], cfg["packet.points"], fam.period)
    n = int(round(cfg["packet.t_end"] / dt))
    field, tr = propagate(wf, fam, None, dt, n, cfg["packet.record_every"], orders)
    head = [f"t={field.time:g}, lambda={fam.lam:g}, V0={cfg['potential.v0']:g}, w={w:g}"]
    write_csv(out / "peaks.csv", ["t", "psi_m"], zip(tr.times, tr.values), head)
    write_csv(out / "orders.csv", ["t", "l", "peak"],
              ((t, l, tr.order_values[l][i]) for i, t in enumerate(tr.times) for l in orders), head)
    write_csv(out / "field.csv", ["x", "re_psi", "im_psi", "abs_psi"],
              ((x, v.real, v.imag, abs(v)) for x, v in zip(field.x_grid, field.values)), head)
    msg = f"packet: psi_m({field.time:g}) = {tr.values[-1]:.6g}"
    if 1 in tr.order_values and field.time > 25:
        t, p1 = tr.times, tr.order_values[1]
        sel = t >= 25 - 1e-9
        msg += (f", order-1 peak over [25, {field.time:g}] in [{p1[sel].min():.6g}, {p1[sel].max():.6g}]"
                f" vs plateau {plateau_value(w, cfg['potential.v0'], fam.period):.6g},"
                f" slope {late_slope(t, p1, 25, field.time):.3g}")
    return msg


COMMANDS = {
    "bands": _bands,
    "singularities": _singularities,
    "lambda-scan": _lambda_scan,
    "resolvent-probe": _resolvent,
    "evolve-orders": _evolve,
    "packet": _packet,
}


def _origin(exc: BaseException) -> str:
    """Name of the innermost package module in the traceback."""
    name = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("ptcrystal."):
            name = mod.split(".")[-1]
    return name


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.show_config:
            sys.stdout.write(cfg.dump())
            return 0
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("ptcrystal: error: a command is required", file=sys.stderr)
            return EXIT_CONFIG
        out = cfg.out_dir()
        threads = cfg["run.threads"]
        if args.command == "figure":
            summary = figures.RUNNERS[args.figure_id](cfg, out, threads)
        else:
            summary = COMMANDS[args.command](cfg, out, threads)
    except NumericalError as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"error [{_origin(exc)}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(summary)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
