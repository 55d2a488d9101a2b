"""Compare the compiled and pure-Python kernels on representative inputs.

Run with ``python benchmarks/bench_kernels.py [--repeat R] [--quick]``.  Each row
reports the best-of-R wall time per call for both backends, the speed-up, and
whether the two backends returned identical output.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from cbi._kernels import _pure
from cbi.jump_measures import JumpMeasure
from cbi.rng import make_rng

try:
    from cbi._kernels import _ext
except ImportError:  # pragma: no cover - depends on the build
    _ext = None


def _cases(quick: bool):
    size = 10_000 if quick else 200_000
    rng = make_rng(0)
    v = rng.standard_normal(size) * 1e3
    w = rng.standard_normal(size)
    incr = rng.standard_normal(size // 10)
    mu = JumpMeasure.exponential(3.0, 0.5)
    nu = JumpMeasure.atom(1.0, 1.0)
    n_path = 5 if quick else 20
    euler_args = (1.0, n_path, 200, 1.0, 0.1, 0.5, mu.total_mass(), mu.sampling_table(), nu.total_mass(), nu.sampling_table())
    return [
        ("neumaier_sum", lambda k: k.neumaier_sum(v)),
        ("centered_cross", lambda k: k.centered_cross(v, w)),
        ("affine_recursion", lambda k: k.affine_recursion(1.0, 0.99, 0.5, incr)),
        ("euler_thinning_path", lambda k: k.euler_thinning_path(*euler_args, make_rng(1))),
    ]


def _same(a, b) -> bool:
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller inputs")
    args = parser.parse_args(argv)
    if _ext is None:
        print("compiled kernels are not built; only the Python backend is available")
    header = f"{'kernel':<22}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}{'identical':>11}"
    print(header)
    print("-" * len(header))
    for name, call in _cases(args.quick):
        t_py = min(timeit.repeat(lambda: call(_pure), number=1, repeat=args.repeat)) * 1e3
        if _ext is None:
            print(f"{name:<22}{t_py:>14.3f}{'-':>14}{'-':>10}{'-':>11}")
            continue
        t_ext = min(timeit.repeat(lambda: call(_ext), number=1, repeat=args.repeat)) * 1e3
        same = _same(call(_pure), call(_ext))
        print(f"{name:<22}{t_py:>14.3f}{t_ext:>14.3f}{t_py / t_ext:>9.1f}x{str(same):>11}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
