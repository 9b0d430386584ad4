# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled executor for factorised propagator programs.

A program is a flat list of factors applied left to right to a state vector:

* kind 0, a diagonal phase: ``psi[i] += psi[i] * data[off + i]``
* kind 1, a dense ``m x m`` block ``K`` acting as ``x + K x`` on ``n_fib``
  disjoint fibres of the state. Fibre ``f`` collects the flat indices
  ``fib_idx[fo + f*m : fo + (f+1)*m]``.

Factors are stored as increments ``U - 1`` rather than ``U``.

The block product runs through BLAS ``zgemm`` on gathered fibres, so the only
work left in Python is one call per sampling interval.
"""

from scipy.linalg.cython_blas cimport zgemm

ctypedef double complex cplx


def run_program(cplx[::1] psi,
                Py_ssize_t[:, ::1] ops,
                cplx[::1] data,
                Py_ssize_t[::1] fib_idx,
                Py_ssize_t[:, ::1] fib_table,
                cplx[::1] xbuf,
                cplx[::1] ybuf,
                Py_ssize_t nrep):
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t nops = ops.shape[0]
    cdef Py_ssize_t r, o, i, f, k, off, fo, base
    cdef int m, nf
    cdef cplx one = 1.0
    cdef char tr = b'T'
    cdef char nt = b'N'

    if nrep <= 0:
        return
    if xbuf.shape[0] < n or ybuf.shape[0] < n:
        raise ValueError("work buffers shorter than the state")

    with nogil:
        for r in range(nrep):
            for o in range(nops):
                off = ops[o, 1]
                if ops[o, 0] == 0:
                    for i in range(n):
                        psi[i] = psi[i] + psi[i] * data[off + i]
                else:
                    m = <int>ops[o, 2]
                    fo = fib_table[ops[o, 3], 0]
                    nf = <int>fib_table[ops[o, 3], 1]
                    for f in range(nf):
                        base = fo + f * m
                        for k in range(m):
                            xbuf[f * m + k] = psi[fib_idx[base + k]]
                            ybuf[f * m + k] = xbuf[f * m + k]
                    # column-major view: X is m x nf, the row-major block is K^T;
                    # beta = 1 accumulates K X onto the copy of X
                    zgemm(&tr, &nt, &m, &nf, &m, &one, &data[off], &m,
                          &xbuf[0], &m, &one, &ybuf[0], &m)
                    for f in range(nf):
                        base = fo + f * m
                        for k in range(m):
                            psi[fib_idx[base + k]] = ybuf[f * m + k]
