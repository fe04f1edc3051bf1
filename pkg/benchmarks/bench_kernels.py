"""Compare the compiled and numpy relaxation kernels.

Runs a fixed number of sweeps with both backends on the same problems,
checks that the iterates agree and prints the time per node update.

    python benchmarks/bench_kernels.py [--sweeps N] [--h H]
"""

import argparse
import time

import numpy as np

from pucci_lab import Rectangle, build_grid
from pucci_lab import backend
from pucci_lab.operator import OperatorSpec
from pucci_lab.solver import SolveConfig, solve_dirichlet

CASES = [
    ("laplacian", OperatorSpec(0.0, 1.0, 1.0, "weighted_laplacian")),
    ("pucci+ alpha=0", OperatorSpec(0.0, 1.0, 2.0, "pucci_plus")),
    ("pucci- alpha=1", OperatorSpec(1.0, 1.0, 2.0, "pucci_minus")),
    ("pucci+ alpha=-.5 drift", OperatorSpec(-0.5, 1.0, 2.0, "pucci_plus", drift=lambda x, y: (0.5 * y, -0.5 * x))),
]


def run(spec, grid, impl, sweeps):
    # tolerances of zero are not allowed, so use tiny ones that are never reached
    cfg = SolveConfig(tol_res=1e-300, tol_step=1e-300, max_sweeps=sweeps)
    g = lambda x, y: 1.0 + 0.5 * np.sin(3 * x) * np.cos(2 * y)
    t0 = time.perf_counter()
    out = solve_dirichlet(spec, grid, -1.0, g, 0.0, cfg, impl=impl)
    return out, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--h", type=float, default=1 / 64)
    args = ap.parse_args()
    grid = build_grid(Rectangle(0, 1, 0, 1), args.h)
    n = grid.n_interior
    names = sorted(backend.BACKENDS)
    print(f"{n} interior nodes, {args.sweeps} sweeps; backends: {', '.join(names)}")
    print(f"{'case':<22}" + "".join(f"{nm + ' ns/node':>18}" for nm in names) + f"{'speedup':>10}{'max diff':>12}")
    for label, spec in CASES:
        times, fields = {}, {}
        for nm in names:
            out, dt = run(spec, grid, backend.get(nm), args.sweeps)
            times[nm] = dt / (n * out.sweeps) * 1e9
            fields[nm] = out.field.values
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        diff = np.max(np.abs(fields["python"] - fields["cython"])) if "cython" in fields else float("nan")
        print(f"{label:<22}" + "".join(f"{times[nm]:>18.1f}" for nm in names) + f"{speed:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
