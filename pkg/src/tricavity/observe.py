"""Observables: photon numbers, qubit excitation, reduced cavity states, transfer fidelity.

The fidelity is the overlap ``Tr[rho0 rho(t)]`` between the initial state of
the left cavity and the reduced state of the right cavity. It is not the
Uhlmann fidelity: for a mixed ``rho(t)`` it stays below 1 even when the
populations have moved completely, so ``purity`` is reported alongside it.
"""

from dataclasses import dataclass

import numpy as np

from .fock import StateVector
from .model import excitation_values, parity_values

DM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > DM_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > DM_TOL:
            raise ValueError(f"density matrix trace {np.trace(rho).real:.12f} is not 1")
        if np.linalg.eigvalsh(rho).min() < -DM_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        rho.flags.writeable = False
        object.__setattr__(self, "matrix", rho)

    @classmethod
    def pure(cls, amplitudes):
        v = np.asarray(amplitudes, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @property
    def levels(self):
        return self.matrix.shape[0]

    def purity(self):
        return float(np.real(np.vdot(self.matrix, self.matrix)))


def _amps(state):
    return state.amplitudes if isinstance(state, StateVector) else np.asarray(state)


def photon_number(state, cavity):
    """Mean photon number <a_i^dag a_i> of ``cavity``."""
    probs = np.abs(_amps(state)) ** 2
    return float(probs @ state.space.occupation(cavity))


def qubit_excitation(state):
    """Excited-state population <sigma_+ sigma_->."""
    probs = np.abs(_amps(state)) ** 2
    return float(probs @ state.space.qubit_level())


def total_excitations(state):
    probs = np.abs(_amps(state)) ** 2
    return float(probs @ excitation_values(state.space))


def _reduce(psi, space, cavity):
    tensor = np.moveaxis(np.asarray(psi).reshape(space.shape), cavity, 0)
    flat = tensor.reshape(space.levels, -1)
    rho = flat @ flat.conj().T
    return 0.5 * (rho + rho.conj().T)


def reduced_cavity_state(state, cavity):
    """Density matrix of one cavity after tracing out the other two and the qubit."""
    if cavity not in (1, 2, 3):
        raise ValueError(f"cavity index must be 1, 2 or 3, got {cavity!r}")
    return DensityMatrix(_reduce(state.amplitudes, state.space, cavity))


def transfer_fidelity(rho0, state, cavity=3):
    """``Tr[rho0 rho]`` with ``rho`` the reduced state of ``cavity`` (default: rightmost)."""
    rho = reduced_cavity_state(state, cavity)
    return _overlap(rho0, rho.matrix)


def _overlap(rho0, rho):
    m0 = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    if m0.shape != rho.shape:
        raise ValueError(f"rho0 has {m0.shape[0]} levels, cavity has {rho.shape[0]}")
    return float(np.real(np.sum(m0 * rho.T)))


@dataclass(frozen=True)
class Observable:
    """A recorded quantity: either diagonal in the Fock basis or a function of the raw state."""

    name: str
    diagonal: np.ndarray = None
    func: object = None

    def __post_init__(self):
        if (self.diagonal is None) == (self.func is None):
            raise ValueError("an observable needs exactly one of diagonal or func")


def leakage_values(space):
    """1 on basis states with any cavity at the cutoff, else 0."""
    top = space.n_max
    hit = (space.occupation(1) == top) | (space.occupation(2) == top) | (space.occupation(3) == top)
    return hit.astype(float)


STANDARD_COLUMNS = ("n1", "n2", "n3", "qubit_excitation", "n_total", "parity", "leakage", "norm")


def default_observables(space):
    """Registry recorded by every trajectory, in CSV column order."""
    return [
        Observable("n1", diagonal=space.occupation(1).astype(float)),
        Observable("n2", diagonal=space.occupation(2).astype(float)),
        Observable("n3", diagonal=space.occupation(3).astype(float)),
        Observable("qubit_excitation", diagonal=space.qubit_level().astype(float)),
        Observable("n_total", diagonal=excitation_values(space).astype(float)),
        Observable("parity", diagonal=parity_values(space).astype(float)),
        Observable("leakage", diagonal=leakage_values(space)),
        Observable("norm", diagonal=np.ones(space.dim)),
    ]


def energy_observable(hamiltonian):
    matrix = hamiltonian.matrix
    return Observable("energy", func=lambda psi: float(np.real(np.vdot(psi, matrix @ psi))))


def fidelity_observables(space, rho0, cavity=3):
    """Fidelity against ``rho0`` and purity of the reduced state of ``cavity``."""
    m0 = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)

    def fidelity(psi):
        return _overlap(m0, _reduce(psi, space, cavity))

    def purity(psi):
        rho = _reduce(psi, space, cavity)
        return float(np.real(np.vdot(rho, rho)))

    return [Observable("fidelity", func=fidelity), Observable("purity", func=purity)]
