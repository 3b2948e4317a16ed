"""Compiled vs pure-Python r-local maxima scan.

    python3 benchmarks/bench_localmax.py [--sizes 128 256 512] [--repeat 3]

Both backends are checked for identical output before timing.  The threshold
column uses ``m_N - 6``, the cutoff of the extremal point measure.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gffx import _localmax
from gffx.extremal import default_radius
from gffx.field import centering_mn, sample_field


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _localmax.HAVE_COMPILED:
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    from gffx._kernels import local_maxima_scan

    print(f"{'N':>5} {'r':>3} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'compiled, thr [s]':>18}")
    for N in args.sizes:
        h = sample_field(N, seed=N).values
        r = default_radius(N)
        thr = centering_mn(N) - 6.0
        a = _localmax.local_maxima_mask_python(h, r)
        b = local_maxima_scan(h, r, -np.inf)
        if not np.array_equal(a, b):
            raise SystemExit(f"backends disagree at N={N}")
        t_py = min(timeit.repeat(lambda: _localmax.local_maxima_mask_python(h, r), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: local_maxima_scan(h, r, -np.inf), number=1, repeat=args.repeat))
        t_ct = min(timeit.repeat(lambda: local_maxima_scan(h, r, thr), number=1, repeat=args.repeat))
        print(f"{N:>5} {r:>3} {t_py:>11.4f} {t_c:>13.4f} {t_py / t_c:>8.1f} {t_ct:>18.4f}")


if __name__ == "__main__":
    main()
