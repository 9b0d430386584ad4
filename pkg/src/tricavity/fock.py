"""Truncated Hilbert space of three single-mode cavities and one qubit.

Index layout
------------
Basis states ``|n1 n2 n3> (x) |q>`` are stored row-major over ``(q, n1, n2, n3)``
with the qubit slowest::

    index = q * d**3 + n1 * d**2 + n2 * d + n3,    d = n_max + 1

``q = 0`` is the ground state ``|g>`` (the -1 eigenvector of sigma_z) and
``q = 1`` the excited state ``|e>``. Tensor axes are numbered ``0 = q``,
``1..3 = cavities``, matching ``state.reshape(space.shape)``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import math
import warnings

import numpy as np
import scipy.sparse as sp

from .errors import CutoffError, TruncationError

N_CAVITIES = 3
DENSE_LIMIT = 2000
COHERENT_TAIL_LIMIT = 1e-6
NORM_TOL = 1e-10

QUBIT_LEVELS = {"g": 0, "e": 1}


@dataclass(frozen=True)
class SpaceDescriptor:
    """Layout of the truncated space; see the module docstring for the index map."""

    n_max: int
    n_cavities: int = field(default=N_CAVITIES, init=False)

    @property
    def levels(self):
        return self.n_max + 1

    @property
    def dim(self):
        return 2 * self.levels ** 3

    @property
    def shape(self):
        d = self.levels
        return (2, d, d, d)

    def encode(self, n1, n2, n3, q):
        d = self.levels
        q = QUBIT_LEVELS.get(q, q)
        for n in (n1, n2, n3):
            if not 0 <= n <= self.n_max:
                raise CutoffError(f"occupation {n} outside 0..{self.n_max}")
        if q not in (0, 1):
            raise ValueError(f"qubit level must be 'g', 'e', 0 or 1, got {q!r}")
        return ((q * d + n1) * d + n2) * d + n3

    def decode(self, index):
        if not 0 <= index < self.dim:
            raise IndexError(f"index {index} outside 0..{self.dim - 1}")
        q, n1, n2, n3 = np.unravel_index(index, self.shape)
        return int(n1), int(n2), int(n3), int(q)

    @cached_property
    def _grids(self):
        grids = np.indices(self.shape).reshape(4, -1)
        grids.flags.writeable = False
        return grids

    def occupation(self, cavity):
        """Photon number of ``cavity`` (1..3) for every basis index."""
        _check_cavity(cavity)
        return self._grids[cavity]

    def qubit_level(self):
        """0 for ``|g>``, 1 for ``|e>`` at every basis index."""
        return self._grids[0]

    def total_photons(self):
        return self._grids[1] + self._grids[2] + self._grids[3]


def build_space(n_max):
    if isinstance(n_max, bool) or int(n_max) != n_max:
        raise CutoffError(f"n_max must be an integer, got {n_max!r}")
    if n_max < 1:
        raise CutoffError("n_max must be >= 1 to hold a single photon")
    return SpaceDescriptor(int(n_max))


def _check_cavity(cavity):
    if cavity not in (1, 2, 3):
        raise ValueError(f"cavity index must be 1, 2 or 3, got {cavity!r}")


def fibre_index(space, axes):
    """Flat indices grouped into fibres along ``axes``.

    Returns an ``(n_fibres, m)`` integer array; column ``k`` runs row-major over
    the listed axes, rows run over the remaining axes. Multiplying each row of
    ``psi[idx]`` by an ``m x m`` block applies that block on ``axes``.
    """
    axes = tuple(axes)
    if len(set(axes)) != len(axes) or not all(0 <= a < 4 for a in axes):
        raise ValueError(f"bad axes {axes}")
    flat = np.arange(space.dim, dtype=np.intp).reshape(space.shape)
    moved = np.moveaxis(flat, axes, range(4 - len(axes), 4))
    m = int(np.prod([space.shape[a] for a in axes]))
    return np.ascontiguousarray(moved.reshape(-1, m))


@dataclass(frozen=True)
class LocalFactor:
    """An operator that acts as ``block`` on a subset of tensor axes."""

    axes: tuple
    block: np.ndarray


def _materialize(matrix, dim):
    if dim <= DENSE_LIMIT:
        return matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    return sp.csr_matrix(matrix)


class Operator:
    """Operator on a ``SpaceDescriptor``.

    ``matrix`` is dense up to ``DENSE_LIMIT`` and CSR above. Operators built from
    a small block keep it in ``local``; diagonal operators keep ``diagonal``.
    Propagators use those to factorise exponentials cheaply.
    """

    __array_priority__ = 100

    def __init__(self, space, matrix, hermitian_hint=False, local=None, diagonal=None):
        if matrix.shape != (space.dim, space.dim):
            raise ValueError(f"matrix shape {matrix.shape} does not match dim {space.dim}")
        self.space = space
        self.matrix = _materialize(matrix, space.dim)
        self.hermitian_hint = bool(hermitian_hint)
        self.local = local
        self.diagonal = None if diagonal is None else np.asarray(diagonal)
        if self.hermitian_hint and self.hermiticity_error() >= 1e-12:
            raise ValueError("operator flagged Hermitian is not")

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def dense(self):
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def sparse(self):
        return sp.csr_matrix(self.matrix)

    def max_abs(self):
        if self.is_sparse:
            return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0
        return float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0

    def hermiticity_error(self):
        diff = self.matrix - self.matrix.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff)))

    def dag(self):
        local = None
        if self.local is not None:
            local = LocalFactor(self.local.axes, self.local.block.conj().T)
        diagonal = None if self.diagonal is None else self.diagonal.conj()
        return Operator(self.space, self.matrix.conj().T, self.hermitian_hint, local, diagonal)

    def apply(self, vector):
        return self.matrix @ np.asarray(vector)

    def expect(self, state):
        psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        return np.vdot(psi, self.matrix @ psi)

    def _wrap(self, matrix, local=None, diagonal=None):
        return Operator(self.space, matrix, local=local, diagonal=diagonal)

    def __add__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        _same_space(self, other)
        diagonal = None
        if self.diagonal is not None and other.diagonal is not None:
            diagonal = self.diagonal + other.diagonal
        local = None
        if self.local is not None and other.local is not None and self.local.axes == other.local.axes:
            local = LocalFactor(self.local.axes, self.local.block + other.local.block)
        return self._wrap(self.matrix + other.matrix, local, diagonal)

    def __sub__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        local = None if self.local is None else LocalFactor(self.local.axes, scalar * self.local.block)
        diagonal = None if self.diagonal is None else scalar * self.diagonal
        return self._wrap(scalar * self.matrix, local, diagonal)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _same_space(self, other)
            return self._wrap(self.matrix @ other.matrix)
        return self.matrix @ np.asarray(other)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Operator(dim={self.space.dim}, {kind}, hermitian_hint={self.hermitian_hint})"


def _same_space(a, b):
    if a.space != b.space:
        raise ValueError("operators live on different spaces")


def commutator(a, b):
    return a @ b - b @ a


def embed(space, block, axes, hermitian_hint=False):
    """Tensor-embed a small ``block`` acting on ``axes`` into the full space."""
    axes = tuple(axes)
    block = np.asarray(block, dtype=complex)
    idx = fibre_index(space, axes)
    m = idx.shape[1]
    if block.shape != (m, m):
        raise ValueError(f"block shape {block.shape} does not match axes of size {m}")
    rows_k, cols_k = np.nonzero(block)
    vals = np.tile(block[rows_k, cols_k], idx.shape[0])
    rows = idx[:, rows_k].ravel()
    cols = idx[:, cols_k].ravel()
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim)).tocsr()
    return Operator(space, matrix, hermitian_hint, local=LocalFactor(axes, block))


def diagonal_operator(space, values, hermitian_hint=True):
    values = np.asarray(values)
    return Operator(space, sp.diags(values).tocsr(), hermitian_hint, diagonal=values)


def ladder(levels):
    """Truncated annihilation operator on ``levels`` Fock states."""
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


SIGMA = {
    "sigma_x": np.array([[0, 1], [1, 0]], dtype=complex),
    "sigma_z": np.array([[-1, 0], [0, 1]], dtype=complex),
    # basis order (g, e)
    "sigma_plus": np.array([[0, 0], [1, 0]], dtype=complex),
    "sigma_minus": np.array([[0, 1], [0, 0]], dtype=complex),
}


def mode_op(space, cavity, kind):
    """Ladder or number operator on one cavity: 'annihilate', 'create' or 'number'."""
    _check_cavity(cavity)
    a = ladder(space.levels)
    if kind == "annihilate":
        return embed(space, a, (cavity,))
    if kind == "create":
        return embed(space, a.conj().T, (cavity,))
    if kind == "number":
        return diagonal_operator(space, space.occupation(cavity).astype(float))
    raise ValueError(f"unknown mode operator kind {kind!r}")


def qubit_op(space, kind):
    """Pauli or ladder operator on the qubit, identity on the cavities."""
    try:
        block = SIGMA[kind]
    except KeyError:
        raise ValueError(f"unknown qubit operator kind {kind!r}") from None
    if kind == "sigma_z":
        return diagonal_operator(space, 2.0 * space.qubit_level() - 1.0)
    return embed(space, block, (0,), hermitian_hint=kind == "sigma_x")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised amplitude vector over the layout of ``space``."""

    space: SpaceDescriptor
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} differs from 1 by more than {NORM_TOL}")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, space, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(space, amps / np.linalg.norm(amps))

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self):
        return self.amplitudes.reshape(self.space.shape)

    def copy_amplitudes(self):
        return np.array(self.amplitudes)


def fock_state(space, occupations, qubit="g"):
    n1, n2, n3 = occupations
    amps = np.zeros(space.dim, dtype=complex)
    amps[space.encode(n1, n2, n3, qubit)] = 1.0
    return StateVector(space, amps)


def _left_cavity_state(space, cavity_amps):
    amps = np.zeros(space.shape, dtype=complex)
    amps[0, :, 0, 0] = cavity_amps
    return StateVector(space, amps.ravel())


def coherent_amplitudes(levels, alpha):
    """Fock amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)`` for ``n < levels`` (not renormalised)."""
    n = np.arange(levels)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(levels, dtype=complex)
        out[0] = 1.0
        return out
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * log_fact)
    return mag * np.exp(1j * n * np.angle(alpha))


def coherent_tail_weight(levels, alpha):
    """Probability mass of ``|alpha>`` above the cutoff."""
    kept = np.sum(np.abs(coherent_amplitudes(levels, alpha)) ** 2)
    return max(0.0, 1.0 - float(kept))


def coherent_min_cutoff(alpha, limit=COHERENT_TAIL_LIMIT):
    """Smallest ``n_max`` whose tail weight for ``|alpha>`` is within ``limit``."""
    n = 1
    while coherent_tail_weight(n + 1, alpha) > limit:
        n += 1
    return n


def coherent_state_left(space, alpha, force=False):
    """Truncated, renormalised coherent state in cavity 1; vacuum elsewhere, qubit in |g>.

    Raises ``TruncationError`` when the weight above the cutoff exceeds 1e-6,
    unless ``force`` is set (then a warning is issued instead).
    """
    tail = coherent_tail_weight(space.levels, alpha)
    if tail > COHERENT_TAIL_LIMIT:
        msg = (f"coherent state alpha={alpha} loses weight {tail:.3e} above n_max={space.n_max}"
               f" (limit {COHERENT_TAIL_LIMIT:g})")
        if not force:
            raise TruncationError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    cav = coherent_amplitudes(space.levels, alpha)
    return _left_cavity_state(space, cav / np.linalg.norm(cav))


def superposition_amplitudes(levels, p, theta):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    cav = np.zeros(levels, dtype=complex)
    cav[0] = p
    cav[1] = np.exp(1j * theta) * math.sqrt(1.0 - p * p)
    return cav


def superposition_state_left(space, p, theta):
    """Cavity 1 in ``p|0> + e^{i theta} sqrt(1-p^2)|1>``; vacuum elsewhere, qubit in |g>."""
    return _left_cavity_state(space, superposition_amplitudes(space.levels, p, theta))
