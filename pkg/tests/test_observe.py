import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracle
from tricavity.fock import StateVector, build_space, coherent_state_left, fock_state
from tricavity.observe import (DensityMatrix, default_observables, fidelity_observables,
                               photon_number, qubit_excitation, reduced_cavity_state,
                               total_excitations, transfer_fidelity, STANDARD_COLUMNS)


def test_photon_numbers():
    space = build_space(2)
    psi = fock_state(space, (1, 0, 0))
    assert photon_number(psi, 1) == 1.0
    assert photon_number(fock_state(space, (0, 0, 0)), 1) == 0.0
    assert photon_number(coherent_state_left(build_space(10), 1.0), 1) == pytest.approx(1, abs=1e-6)


def test_qubit_excitation():
    space = build_space(1)
    assert qubit_excitation(fock_state(space, (0, 0, 0), "e")) == 1.0
    assert qubit_excitation(fock_state(space, (1, 0, 0), "g")) == 0.0
    amps = (fock_state(space, (0, 0, 0), "g").amplitudes
            + fock_state(space, (0, 0, 0), "e").amplitudes) / math.sqrt(2)
    assert qubit_excitation(StateVector(space, amps)) == pytest.approx(0.5)


def test_total_excitations():
    space = build_space(1)
    assert total_excitations(fock_state(space, (1, 0, 0))) == 1.0
    assert total_excitations(fock_state(space, (0, 0, 0), "e")) == 1.0


@given(st.integers(0, 2**32 - 1))
def test_excitation_sum_rule(seed):
    space = build_space(2)
    psi = StateVector(space, oracle.random_state(space.dim, np.random.default_rng(seed)))
    parts = sum(photon_number(psi, c) for c in (1, 2, 3)) + qubit_excitation(psi)
    assert parts == pytest.approx(total_excitations(psi), abs=1e-12)


def test_reduced_states_of_product_state():
    space = build_space(2)
    psi = fock_state(space, (1, 0, 0))
    rho3 = reduced_cavity_state(psi, 3).matrix
    rho1 = reduced_cavity_state(psi, 1).matrix
    assert np.allclose(rho3, np.diag([1, 0, 0]))
    assert np.allclose(rho1, np.diag([0, 1, 0]))
    with pytest.raises(ValueError):
        reduced_cavity_state(psi, 0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]), st.sampled_from([1, 2]))
def test_partial_trace_matches_oracle(seed, cavity, n_max):
    space = build_space(n_max)
    amps = oracle.random_state(space.dim, np.random.default_rng(seed))
    rho = reduced_cavity_state(StateVector(space, amps), cavity).matrix
    ref = oracle.brute_partial_trace(amps, n_max, cavity)
    assert np.abs(rho - ref).max() < 1e-12
    assert abs(np.trace(ref) - 1) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_purity_bound_and_product_states(seed):
    rng = np.random.default_rng(seed)
    space = build_space(1)
    rho = reduced_cavity_state(StateVector(space, oracle.random_state(space.dim, rng)), 2)
    assert rho.purity() <= 1 + 1e-12
    # a product state leaves cavity 2 pure
    c2 = oracle.random_state(2, rng)
    rest = oracle.random_state(8, rng).reshape(2, 2, 2)  # (q, n1, n3)
    amps = np.einsum("b,qac->qabc", c2, rest).ravel()
    assert reduced_cavity_state(StateVector(space, amps), 2).purity() == pytest.approx(1, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_fidelity_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    space = build_space(2)
    psi = StateVector(space, oracle.random_state(space.dim, rng))
    w = rng.dirichlet(np.ones(3))
    vecs = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
    rho0 = DensityMatrix((vecs * w) @ vecs.conj().T)
    f = transfer_fidelity(rho0, psi)
    rho = reduced_cavity_state(psi, 3)
    assert -1e-12 <= f <= math.sqrt(rho0.purity() * rho.purity()) + 1e-12


def test_fidelity_examples():
    space = build_space(10)
    psi = coherent_state_left(space, 1.0)
    rho_alpha = reduced_cavity_state(psi, 1)
    assert transfer_fidelity(rho_alpha, psi) == pytest.approx(math.exp(-1), abs=1e-6)
    assert transfer_fidelity(reduced_cavity_state(psi, 3), psi) == pytest.approx(1.0)
    one = DensityMatrix.pure(np.eye(11)[1])
    assert transfer_fidelity(one, psi) == 0.0
    with pytest.raises(ValueError):
        transfer_fidelity(DensityMatrix.pure([1, 0]), psi)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    assert DensityMatrix.pure([1, 1j]).purity() == pytest.approx(1)


def test_observable_registries():
    space = build_space(2)
    names = [o.name for o in default_observables(space)]
    assert tuple(names) == STANDARD_COLUMNS
    psi = fock_state(space, (1, 0, 0)).amplitudes
    fid, pur = fidelity_observables(space, DensityMatrix.pure([1, 0, 0]))
    assert fid.func(psi) == 1.0 and pur.func(psi) == pytest.approx(1.0)
