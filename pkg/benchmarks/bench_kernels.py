"""Compiled versus pure-Python kernels, plus one end-to-end engine run per backend.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--paths 20000]
"""

from __future__ import annotations

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

from xvaframe import kernels


def _cases(n_paths: int):
    rng = np.random.default_rng(0)
    fwd = np.ascontiguousarray(rng.uniform(60.0, 140.0, size=(n_paths, 104)))
    sd = np.ascontiguousarray(np.linspace(0.3, 0.0, 104))
    x = np.ascontiguousarray(rng.normal(size=(n_paths, 261)))
    wp, wn = rng.uniform(size=261), rng.uniform(size=261)
    return {
        "philox_normals": lambda k: k.philox_normals(1, 0, 0, n_paths, 260),
        "black_forward": lambda k: k.black_forward(fwd, 100.0, sd, True),
        "split_weighted_sum": lambda k: k.split_weighted_sum(x, wp, wn),
    }


def _engine(backend: str, n_paths: int) -> float:
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
    from fixtures import curve_set, ledger, stochastic_portfolio, three_set_hierarchy
    from xvaframe.xva import PerspectiveConfig, run_engine

    pf, h = stochastic_portfolio(), three_set_hierarchy(stochastic=True)
    fn = lambda: run_engine(pf, h, curve_set(), ledger(), PerspectiveConfig.accounting(), n_paths, 1, 1 / 52,
                            threads=1, backend=backend)
    return min(timeit.repeat(fn, number=1, repeat=2))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=20000)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the python backend is available")
    rows = []
    for name, fn in _cases(args.paths).items():
        t = {b: min(timeit.repeat(lambda: fn(kernels.get_backend(b)), number=1, repeat=args.repeat))
             for b in backends}
        rows.append((name, t))
    t = {b: _engine(b, args.paths) for b in backends}
    rows.append((f"run_engine ({args.paths} paths)", t))
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, t in rows:
        line = f"{name:<28}" + "".join(f"{t[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{t['python'] / t['compiled']:>11.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
