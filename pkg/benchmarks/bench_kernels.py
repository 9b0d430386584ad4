"""Time one Trotter step with the compiled and the numpy executor.

    python3 benchmarks/bench_kernels.py [--nmax 2 4 6 8 10 12] [--steps 200]

Prints microseconds per step for each backend and the speed-up. Both
backends run the same factor program, so their states agree to roundoff;
the script checks that as well.
"""

import argparse
import time

import numpy as np

from tricavity import kernels
from tricavity.fock import build_space, fock_state
from tricavity.model import SystemParams, hamiltonian_terms
from tricavity.propagate import trotter4_propagator


def time_steps(prop, psi, steps, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        work = psi.copy()
        t0 = time.perf_counter()
        prop.step(work, steps)
        best = min(best, time.perf_counter() - t0)
    return best / steps, work


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--nmax", type=int, nargs="+", default=[2, 4, 6, 8, 10, 12])
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--g", type=float, default=0.85)
    args = parser.parse_args(argv)

    backends = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    params = SystemParams(g=args.g, j1=0.1, j2=0.1)
    print(f"{'n_max':>5} {'dim':>6} " + " ".join(f"{b + ' us':>12}" for b in backends)
          + f" {'speed-up':>9} {'max diff':>9}")
    for n_max in args.nmax:
        space = build_space(n_max)
        terms = hamiltonian_terms(space, params)
        psi = fock_state(space, (1, 0, 0)).copy_amplitudes()
        per_step, states = {}, {}
        for b in backends:
            prop = trotter4_propagator(terms, 0.01, backend=b)
            per_step[b], states[b] = time_steps(prop, psi, args.steps)
        speedup = per_step["python"] / per_step.get("compiled", per_step["python"])
        diff = np.abs(states["python"] - states[backends[-1]]).max()
        print(f"{n_max:>5} {space.dim:>6} "
              + " ".join(f"{1e6 * per_step[b]:>12.1f}" for b in backends)
              + f" {speedup:>9.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
