"""Compare the compiled and pure-numpy kernel backends.

Run ``python benchmarks/bench_kernels.py``; prints one line per kernel with
the best-of-``--repeat`` wall time for each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from ptcrystal import kernels


def cases(size: int):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=size) + 1j * rng.normal(size=size)
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, size))
    n_nodes, dim = 512, 17
    diag = (np.linspace(-np.pi, np.pi, n_nodes)[:, None] + 2 * np.pi * np.arange(-8, 9)) ** 2
    h = np.diag((np.arange(-8, 9) * 2 * np.pi - np.pi) ** 2).astype(complex)
    h += np.diag(np.full(dim - 1, 0.2), -1)
    c0 = np.eye(dim, dtype=complex)[8]
    times = np.linspace(0, 5, 65)
    return {
        "apply_phase": lambda mod: mod.apply_phase(psi, phase),
        "max_abs": lambda mod: mod.max_abs(psi),
        "resolvent_nodes": lambda mod: mod.resolvent_nodes(diag, [1], [0.2], np.pi**2 + 1e-3j, 9, 8),
        "dp45_linear": lambda mod: mod.dp45_linear(h, c0, times, 1e-10, 1e-14),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=16384, help="field length for the pointwise kernels")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=3)
    args = p.parse_args(argv)

    names = kernels.available()
    if "cython" not in names:
        print("compiled kernels are not built; timing the numpy fallback only")
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names) + ("   speed-up" if len(names) > 1 else ""))
    for kname, fn in cases(args.size).items():
        best = []
        for bname in names:
            mod = kernels.load(bname)
            t = min(timeit.repeat(lambda: fn(mod), repeat=args.repeat, number=args.number)) / args.number
            best.append(t)
        line = f"{kname:<16}" + "".join(f"{t * 1e3:>10.3f}ms" for t in best)
        if len(best) > 1:
            line += f"   {best[1] / best[0]:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
