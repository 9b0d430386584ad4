"""Pure-numpy executor for factorised propagator programs.

Same calling convention as the compiled ``_kernels.run_program``; used when
the extension is not built or ``TRICAVITY_PURE_PYTHON=1`` is set.
"""

import numpy as np


def run_program(psi, ops, data, fib_idx, fib_table, xbuf, ybuf, nrep):
    if nrep <= 0:
        return
    if xbuf.shape[0] < psi.shape[0] or ybuf.shape[0] < psi.shape[0]:
        raise ValueError("work buffers shorter than the state")
    n = psi.shape[0]
    # decode once per call; the loop below only touches views
    steps = []
    for kind, off, m, fset in ops:
        if kind == 0:
            steps.append((0, data[off:off + n], None))
        else:
            fo, nf = fib_table[fset]
            idx = fib_idx[fo:fo + nf * m].reshape(nf, m)
            ut = data[off:off + m * m].reshape(m, m).T
            steps.append((1, ut, idx))
    for _ in range(nrep):
        for kind, arr, idx in steps:
            if kind == 0:
                psi += psi * arr
            else:
                x = psi[idx]
                psi[idx] = x + x @ arr
