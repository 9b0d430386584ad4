import numpy as np
import pytest

from tricavity import kernels
from tricavity._kernels_py import run_program as run_python

BACKENDS = ["python"] + (["compiled"] if kernels.compiled_available() else [])


def _program(rng, n=24, m=4):
    """One phase op and two block ops on disjoint fibre sets, plus the dense equivalent.

    Programs store each factor as its increment ``U - 1``.
    """
    phase = np.exp(1j * rng.normal(size=n))
    blocks = [np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))[0]
              for _ in range(2)]
    perms = [rng.permutation(n).reshape(-1, m) for _ in range(2)]
    data = np.concatenate([phase - 1] + [(b - np.eye(m)).ravel() for b in blocks])
    fib_idx = np.concatenate([p.ravel() for p in perms]).astype(np.intp)
    fib_table = np.array([[0, n // m], [n, n // m]], dtype=np.intp)
    ops = np.array([[0, 0, 0, 0], [1, n, m, 0], [1, n + m * m, m, 1]], dtype=np.intp)
    dense = np.diag(phase)
    for b, perm in zip(blocks, perms):
        step = np.zeros((n, n), complex)
        for fib in perm:
            step[np.ix_(fib, fib)] = b
        dense = step @ dense
    return ops, data, fib_idx, fib_table, dense


@pytest.mark.parametrize("backend", BACKENDS)
def test_program_matches_dense_product(backend, rng):
    ops, data, fib_idx, fib_table, dense = _program(rng)
    _, run = kernels.get_backend(backend)
    psi = rng.normal(size=24) + 1j * rng.normal(size=24)
    expected = np.linalg.matrix_power(dense, 3) @ psi
    buf = np.empty(24, complex), np.empty(24, complex)
    run(psi, ops, data, fib_idx, fib_table, *buf, 3)
    assert np.abs(psi - expected).max() < 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_zero_repetitions_and_short_buffers(backend, rng):
    ops, data, fib_idx, fib_table, _ = _program(rng)
    _, run = kernels.get_backend(backend)
    psi = np.ones(24, complex)
    run(psi, ops, data, fib_idx, fib_table, np.empty(24, complex), np.empty(24, complex), 0)
    assert np.all(psi == 1)
    with pytest.raises(ValueError):
        run(psi, ops, data, fib_idx, fib_table, np.empty(4, complex), np.empty(4, complex), 1)


def test_backend_selection():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.get_backend("python") == ("python", run_python)
    assert kernels.get_backend(None)[0] == kernels.BACKEND
    with pytest.raises(ValueError):
        kernels.get_backend("gpu")


def test_pure_python_environment_switch():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-c", "from tricavity import kernels; print(kernels.BACKEND)"],
                         env={"TRICAVITY_PURE_PYTHON": "1", "PATH": ""}, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
