"""Compare the numba and numpy tree kernels.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse

from tfboost import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(bench.format_rows(bench.run(args.repeat, args.seed)), end="")


if __name__ == "__main__":
    main()
