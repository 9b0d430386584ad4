"""Hamiltonians of the three-cavity array with a qubit in the central cavity.

All energies are in units of the cavity frequency (``omega = 1``). The full
model is::

    H = sum_l n_l + (omega_q / 2) sigma_z + g sigma_x (a2 + a2^dag)
        - sum_{l=1,2} J_l (a_l^dag a_{l+1} + a_l^dag a_{l+1}^dag + h.c.)

The rotating-wave variants drop the counter-rotating parts of the qubit
coupling and/or of the hopping. The degenerate-qubit effective model has no
sigma_z term, coupling ``g/2`` and excitation-conserving hopping.
"""

from dataclasses import dataclass, replace
import enum

import numpy as np

from .fock import SIGMA, diagonal_operator, embed, ladder


class Variant(str, enum.Enum):
    FULL = "full"
    QUBIT_RWA = "qubit-rwa"
    FULL_RWA = "rwa"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SystemParams:
    omega_q: float = 1.0
    g: float = 0.0
    j1: float = 0.1
    j2: float = 0.1
    variant: Variant = Variant.FULL
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.omega != 1.0:
            raise ValueError("energies are measured in units of omega; omega must be 1")
        for name in ("g", "j1", "j2"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not np.isfinite(self.omega_q):
            raise ValueError("omega_q must be finite")

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {"omega": self.omega, "omega_q": self.omega_q, "g": self.g,
                "j1": self.j1, "j2": self.j2, "variant": self.variant.value}


def _flags(variant):
    """(qubit_rwa, hopping_rwa) for each variant."""
    return {
        Variant.FULL: (False, False),
        Variant.QUBIT_RWA: (True, False),
        Variant.FULL_RWA: (True, True),
    }[variant]


def free_term(space, omega_q, with_qubit=True):
    """Diagonal part: cavity energies plus (omega_q/2) sigma_z."""
    energy = space.total_photons().astype(float)
    if with_qubit:
        energy = energy + 0.5 * omega_q * (2.0 * space.qubit_level() - 1.0)
    return diagonal_operator(space, energy)


def qubit_cavity_block(levels, g, rwa):
    """Block on (qubit, cavity 2) in the row-major (q, n2) order."""
    a = ladder(levels)
    if rwa:
        return g * (np.kron(SIGMA["sigma_plus"], a) + np.kron(SIGMA["sigma_minus"], a.conj().T))
    return g * np.kron(SIGMA["sigma_x"], a + a.conj().T)


def hopping_block(levels, j, rwa):
    """Block on (cavity l, cavity l+1): -J (a_l^dag a_{l+1} [+ a_l^dag a_{l+1}^dag] + h.c.)."""
    a = ladder(levels)
    ad = a.conj().T
    h = np.kron(ad, a)
    if not rwa:
        h = h + np.kron(ad, ad)
    return -j * (h + h.conj().T)


def hamiltonian_terms(space, params):
    """Trotter splitting of the Hamiltonian selected by ``params.variant``.

    Returns ``[hop12, free, qubit_cavity, hop23]``. ``free`` is diagonal, the
    others carry their small block so exponentials never touch the full space.
    The hopping blocks are the largest, so they take the outer slot (merged
    between consecutive stages) and the central slot of the symmetric splitting.
    """
    d = space.levels
    if params.variant is Variant.DEGENERATE:
        coupling = qubit_cavity_block(d, 0.5 * params.g, rwa=False)
        hop_rwa = True
        free = free_term(space, 0.0, with_qubit=False)
    else:
        qubit_rwa, hop_rwa = _flags(params.variant)
        coupling = qubit_cavity_block(d, params.g, rwa=qubit_rwa)
        free = free_term(space, params.omega_q)
    return [
        embed(space, hopping_block(d, params.j1, hop_rwa), (1, 2), hermitian_hint=True),
        free,
        embed(space, coupling, (0, 2), hermitian_hint=True),
        embed(space, hopping_block(d, params.j2, hop_rwa), (2, 3), hermitian_hint=True),
    ]


def _sum(terms):
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    total.hermitian_hint = True
    return total


def hamiltonian_full(space, params):
    if params.variant is not Variant.FULL:
        params = params.with_(variant=Variant.FULL)
    return _sum(hamiltonian_terms(space, params))


def hamiltonian_rwa(space, params, qubit_rwa=True, hopping_rwa=True):
    """Rotating-wave Hamiltonian; at least one of the two approximations must be on."""
    if not (qubit_rwa or hopping_rwa):
        raise ValueError("hamiltonian_rwa needs qubit_rwa or hopping_rwa")
    d = space.levels
    terms = [
        free_term(space, params.omega_q),
        embed(space, qubit_cavity_block(d, params.g, qubit_rwa), (0, 2), hermitian_hint=True),
        embed(space, hopping_block(d, params.j1, hopping_rwa), (1, 2), hermitian_hint=True),
        embed(space, hopping_block(d, params.j2, hopping_rwa), (2, 3), hermitian_hint=True),
    ]
    return _sum(terms)


def hamiltonian_degenerate(space, params):
    if params.variant is not Variant.DEGENERATE:
        params = params.with_(variant=Variant.DEGENERATE)
    return _sum(hamiltonian_terms(space, params))


def hamiltonian(space, params):
    return _sum(hamiltonian_terms(space, params))


def parity_values(space):
    """Eigenvalues of sigma_z * exp(i pi N) on each basis index (+1 or -1)."""
    sz = 2 * space.qubit_level() - 1
    return sz * (1 - 2 * (space.total_photons() % 2))


def parity_operator(space):
    return diagonal_operator(space, parity_values(space).astype(float))


def excitation_values(space):
    """Total excitation number N_photons + sigma_+ sigma_- per basis index."""
    return space.total_photons() + space.qubit_level()


def excitation_operator(space):
    return diagonal_operator(space, excitation_values(space).astype(float))


def symmetry_sectors(space, params):
    """Index blocks left invariant by the Hamiltonian of ``params.variant``.

    Every variant conserves the Z2 parity; the fully rotating-wave model also
    conserves the excitation number, which gives finer blocks.
    """
    labels = excitation_values(space) if params.variant is Variant.FULL_RWA else parity_values(space)
    return [np.flatnonzero(labels == v) for v in np.unique(labels)]
