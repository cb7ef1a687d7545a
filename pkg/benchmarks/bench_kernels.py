"""Compare the compiled kernels against the NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Each kernel is timed on the same inputs with both backends and the maximum
absolute difference between their outputs is reported. ``--end-to-end``
also times a short run of the lossless scenario in a subprocess per backend.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from aoisgd import _kernels_py
from aoisgd.coverage import disk_quadrature, pentagon_targets, sample_unit_disk

try:
    from aoisgd import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _inputs(seed: int = 0):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1, 1, size=(16, 2))
    pts = sample_unit_disk(256, rng)
    qp, qw = disk_quadrature(12, 24)
    targets = pentagon_targets(0.6, 5)
    C, S, L = 8, 2, 2
    lat = np.cumsum(np.full((L, L), 1.0 / L), axis=1)
    chan = np.cumsum(rng.dirichlet(np.ones(S), size=(L, S)), axis=2)
    chan[..., -1] = 1.0
    lat[:, -1] = 1.0
    u = rng.random((20000, C + 1))
    return {
        "markov_walk": lambda m: m.markov_walk(lat, chan, 0, np.zeros(C, dtype=np.int64), u),
        "error_prob_points": lambda m: m.error_prob_points(pos, pts, 1.0),
        "agent_objective_grad": lambda m: m.agent_objective_grad(pos, 3, 1.0, pts),
        "agent_penalty_grad": lambda m: m.agent_penalty_grad(pos, 3, 1.0, targets, 0.25),
        "objective_penalty_eval": lambda m: m.objective_penalty_eval(
            pos, qp, qw, [0.6, 1.0, 1.4], [0.3, 0.4, 0.3], targets, 0.25, True),
    }


def _flat(x):
    if isinstance(x, tuple):
        return np.concatenate([np.ravel(np.asarray(v, dtype=float)) for v in x])
    return np.ravel(np.asarray(x, dtype=float))


def bench(repeat: int = 5) -> list[dict]:
    rows = []
    for name, call in _inputs().items():
        row = {"kernel": name}
        for label, mod in (("python", _kernels_py), ("cython", _ckernels)):
            if mod is None:
                row[label] = float("nan")
                continue
            n, _ = timeit.Timer(lambda: call(mod)).autorange()
            row[label] = min(timeit.repeat(lambda: call(mod), number=n, repeat=repeat)) / n
        if _ckernels is not None:
            row["max_abs_diff"] = float(np.max(np.abs(_flat(call(_kernels_py))
                                                      - _flat(call(_ckernels)))))
        rows.append(row)
    return rows


def end_to_end() -> dict:
    code = ("import time; from aoisgd.scenario import load_scenario; from aoisgd.engine import run;"
            "sc = load_scenario('lossless-sanity'); t = time.perf_counter(); run(sc);"
            "print(time.perf_counter() - t)")
    out = {}
    for label, flag in (("python", "1"), ("cython", "0")):
        env = dict(os.environ, AOISGD_PURE_PYTHON=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        out[label] = float(res.stdout.strip())
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; timing the fallback only")
    print(f"{'kernel':<24}{'python (s)':>14}{'cython (s)':>14}{'speedup':>10}{'max |diff|':>12}")
    for r in bench(args.repeat):
        sp = r["python"] / r["cython"] if r["cython"] == r["cython"] else float("nan")
        print(f"{r['kernel']:<24}{r['python']:>14.3e}{r['cython']:>14.3e}{sp:>10.1f}"
              f"{r.get('max_abs_diff', float('nan')):>12.1e}")
    if args.end_to_end:
        e = end_to_end()
        print(f"lossless-sanity run: python {e['python']:.2f}s, cython {e['cython']:.2f}s, "
              f"speedup {e['python'] / e['cython']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
