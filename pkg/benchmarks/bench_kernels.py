"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--samples N] [--repeat R] [--json PATH]

Times simplex projection (many small vectors, the SA inner step) and the SAA
grid evaluation (bisection per grid point on fixed banks) for every backend
that imports, and checks that the backends agree.
"""
from __future__ import annotations

import argparse
import json
import platform
import time

import numpy as np

from dmrisk import kernels
from dmrisk.dm import GammaMatrix, component_losses
from dmrisk.fixtures import example1_spec
from dmrisk.saa import PreparedBank, simplex_grid


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_projection(mods: dict, repeat: int) -> dict:
    rng = np.random.default_rng(0)
    vecs = rng.normal(size=(20_000, 16))
    out = {}
    for name, mod in mods.items():
        out[name] = _best(lambda: [mod.project_simplex(v) for v in vecs], repeat)
    ref = np.array([mods["python"].project_simplex(v) for v in vecs[:200]])
    for name, mod in mods.items():
        got = np.array([mod.project_simplex(v) for v in vecs[:200]])
        assert np.allclose(got, ref, atol=1e-12), name
    return out


def bench_saa_grid(mods: dict, samples: int, repeat: int) -> dict:
    spec = example1_spec()
    bank = component_losses(spec, samples, 1, columns=(0, 2))
    pb = PreparedBank(bank)
    grid = simplex_grid(2, 0.05)
    rows = []
    for g1 in grid:
        for g2 in grid:
            rows.append(pb.weights(GammaMatrix(np.column_stack([g1, g2])), spec.alpha))
    w = np.array(rows)
    lo, hi = pb.bracket
    eps = 0.5 / samples
    out, results = {}, {}
    for name, mod in mods.items():
        out[name] = _best(lambda: mod.saa_grid(pb.sorted, pb.suffix, w, 0.95, eps, lo, hi), repeat)
        results[name] = mod.saa_grid(pb.sorted, pb.suffix, w, 0.95, eps, lo, hi)
    ref = results["python"]
    for name, res in results.items():
        assert np.allclose(res[1], ref[1], rtol=1e-10), name
    out["grid_points"] = int(w.shape[0])
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000, help="bank size per component")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args(argv)

    mods = kernels.backends()
    result = {
        "backends": sorted(mods),
        "default": kernels.BACKEND,
        "python_version": platform.python_version(),
        "samples": args.samples,
        "project_simplex_s": bench_projection(mods, args.repeat),
        "saa_grid_s": bench_saa_grid(mods, args.samples, args.repeat),
    }
    for key in ("project_simplex_s", "saa_grid_s"):
        row = result[key]
        line = ", ".join(f"{n} {row[n]:.4f}s" for n in mods)
        if "cython" in row:
            line += f" (speed-up {row['python'] / row['cython']:.1f}x)"
        print(f"{key[:-2]:16s} {line}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
