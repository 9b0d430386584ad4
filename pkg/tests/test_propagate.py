import math

import numpy as np
import pytest

import oracle
from tricavity import kernels
from tricavity.errors import ConvergenceError
from tricavity.fock import StateVector, build_space, diagonal_operator, embed, fock_state
from tricavity.model import (SystemParams, excitation_values, hamiltonian, hamiltonian_terms,
                             parity_values, symmetry_sectors)
from tricavity.observe import Observable, energy_observable
from tricavity.propagate import (SUZUKI_P, Scenario, Trajectory, converge_cutoff, evolve,
                                 exact_propagator, simulate, suzuki4_sequence,
                                 trotter4_propagator, write_trajectory)

USC = SystemParams(g=0.5, j1=0.1, j2=0.1)


def _psi0(space):
    return fock_state(space, (1, 0, 0))


def test_exact_diagonal_phases():
    space = build_space(1)
    E = np.linspace(-1, 2, space.dim)
    prop = exact_propagator(diagonal_operator(space, E), 0.3)
    psi = np.ones(space.dim, complex) / 4
    assert np.allclose(prop.step(psi.copy()), psi * np.exp(-1j * E * 0.3), atol=1e-14)


def test_exact_zero_dt_is_identity():
    space = build_space(2)
    prop = exact_propagator(hamiltonian(space, USC), 0.0)
    assert np.abs(prop.unitary() - np.eye(space.dim)).max() < 1e-12


def test_vacuum_rabi_oscillation():
    space = build_space(1)
    g = 0.05
    prop = exact_propagator(hamiltonian(space, SystemParams(g=g, j1=0, j2=0, variant="rwa")), 0.1)
    e = space.encode(0, 0, 0, "e")
    psi0 = fock_state(space, (0, 0, 0), "e").amplitudes
    for t in (0.0, 3.0, math.pi / (2 * g), math.pi / g):
        p_e = abs(prop.advance(psi0, t)[e]) ** 2
        assert p_e == pytest.approx(math.cos(g * t) ** 2, abs=1e-12)


def test_exact_dimension_guard():
    with pytest.raises(ValueError):
        exact_propagator(hamiltonian(build_space(13), USC), 0.01)


def test_exact_requires_hermitian():
    space = build_space(1)
    from tricavity.fock import Operator

    with pytest.raises(ValueError):
        exact_propagator(Operator(space, np.triu(np.ones((16, 16)))), 0.1)


def test_repeated_steps_match_single_advance():
    space = build_space(2)
    prop = exact_propagator(hamiltonian(space, USC), 0.05)
    psi = _psi0(space).copy_amplitudes()
    stepped = prop.step(psi.copy(), 400)
    assert np.abs(stepped - prop.advance(psi, 20.0)).max() < 1e-11


def test_sector_propagator_matches_full(rng):
    space = build_space(2)
    H = hamiltonian(space, USC)
    psi = oracle.random_state(space.dim, rng)
    full = exact_propagator(H, 0.1).advance(psi, 7.3)
    blocked = exact_propagator(H, 0.1, sectors=symmetry_sectors(space, USC)).advance(psi, 7.3)
    assert np.abs(full - blocked).max() < 1e-12


def test_support_skips_empty_sectors():
    space = build_space(2)
    psi0 = _psi0(space).amplitudes
    prop = exact_propagator(hamiltonian(space, USC), 0.1, symmetry_sectors(space, USC), psi0)
    assert len(prop.blocks) == 1
    with pytest.raises(ValueError):
        prop.advance(fock_state(space, (0, 0, 0)).amplitudes, 1.0)


def test_exact_matches_series_oracle_on_random_hermitian(rng):
    H = oracle.random_hermitian(60, rng, scale=0.5)
    space = None  # raw matrix check through the spectral path used by the propagator
    psi = oracle.random_state(60, rng)
    E, V = np.linalg.eigh(H)
    spectral = V @ (np.exp(-1j * E * 2.5) * (V.conj().T @ psi))
    assert np.abs(spectral - oracle.series_expm_apply(H, psi, 2.5)).max() < 1e-10
    assert space is None


@pytest.mark.parametrize("variant", ["full", "rwa", "degenerate"])
def test_exact_matches_series_oracle_on_model(variant):
    space = build_space(2)
    params = SystemParams(g=0.7, j1=0.1, j2=0.15, variant=variant)
    psi = _psi0(space).amplitudes
    ref = oracle.series_expm_apply(oracle.brute_hamiltonian(
        2, 1.0, 0.7, 0.1, 0.15, qubit_rwa=variant == "rwa", hopping_rwa=variant == "rwa",
        degenerate=variant == "degenerate"), psi, 5.0)
    got = exact_propagator(hamiltonian(space, params), 0.01).advance(psi, 5.0)
    assert np.abs(ref - got).max() < 1e-10


def test_suzuki_sequence_weights():
    seq = suzuki4_sequence(4)
    total = {}
    for term, c in seq:
        total[term] = total.get(term, 0) + c
    assert all(abs(v - 1) < 1e-14 for v in total.values())
    assert all(seq[i][0] != seq[i + 1][0] for i in range(len(seq) - 1))
    assert SUZUKI_P == pytest.approx(1 / (4 - 4 ** (1 / 3)))


def test_trotter_factors_unitary():
    space = build_space(3)
    prop = trotter4_propagator(hamiltonian_terms(space, USC), 0.01)
    for U in prop.factors:
        if U.ndim == 1:
            assert np.abs(np.abs(U) - 1).max() < 1e-12
        else:
            assert np.abs(U.conj().T @ U - np.eye(len(U))).max() < 1e-12


def test_trotter_rejects_terms_not_summing_to_h():
    space = build_space(1)
    terms = hamiltonian_terms(space, USC)
    with pytest.raises(ValueError):
        trotter4_propagator(terms[:3], 0.01, hamiltonian=hamiltonian(space, USC))
    trotter4_propagator(terms, 0.01, hamiltonian=hamiltonian(space, USC))


def test_commuting_terms_exact_for_any_dt(rng):
    space = build_space(2)
    d1 = diagonal_operator(space, rng.normal(size=space.dim))
    d2 = diagonal_operator(space, rng.normal(size=space.dim))
    psi = oracle.random_state(space.dim, rng)
    prop = trotter4_propagator([d1, d2], 0.7)
    exact = exact_propagator(d1 + d2, 0.7)
    assert np.abs(prop.step(psi.copy(), 5) - exact.step(psi.copy(), 5)).max() < 1e-12


def test_non_local_term_falls_back_to_full_block(rng):
    space = build_space(1)
    H = hamiltonian(space, USC)
    from tricavity.fock import Operator

    dense = Operator(space, H.dense(), hermitian_hint=True)
    psi = oracle.random_state(space.dim, rng)
    got = trotter4_propagator([dense], 0.1).step(psi.copy(), 10)
    assert np.abs(got - exact_propagator(H, 0.1).step(psi.copy(), 10)).max() < 1e-12


def _trotter_error(n_max, params, dt, t_end, backend=None):
    space = build_space(n_max)
    psi0 = _psi0(space).copy_amplitudes()
    exact = exact_propagator(hamiltonian(space, params), dt).advance(psi0, t_end)
    prop = trotter4_propagator(hamiltonian_terms(space, params), dt, backend=backend)
    return np.linalg.norm(prop.advance(psi0, t_end) - exact)


def test_trotter_fourth_order():
    errs = [_trotter_error(6, USC, dt, 10.0) for dt in (0.2, 0.1, 0.05)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(12 <= r <= 20 for r in ratios), ratios
    order = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(errs), 1)[0]
    assert 3.5 <= order <= 4.5


def test_trotter_matches_exact_at_default_dt():
    assert _trotter_error(8, USC, 0.01, 10.0) < 1e-6


@pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernel not built")
def test_backends_agree(rng):
    space = build_space(4)
    terms = hamiltonian_terms(space, USC)
    psi = oracle.random_state(space.dim, rng)
    a = trotter4_propagator(terms, 0.02, backend="compiled").step(psi.copy(), 50)
    b = trotter4_propagator(terms, 0.02, backend="python").step(psi.copy(), 50)
    assert np.abs(a - b).max() < 1e-13


def test_trotter_step_checks_layout():
    space = build_space(1)
    prop = trotter4_propagator(hamiltonian_terms(space, USC), 0.01)
    with pytest.raises(TypeError):
        prop.step(np.zeros(space.dim))


def test_norm_drift_over_many_steps():
    space = build_space(2)
    prop = trotter4_propagator(hamiltonian_terms(space, USC), 0.01)
    psi = _psi0(space).copy_amplitudes()
    prop.step(psi, 10_000)
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_evolve_grid_and_t_end_zero():
    space = build_space(2)
    prop = trotter4_propagator(hamiltonian_terms(space, USC), 0.01)
    traj = evolve(_psi0(space), prop, 0.0, 0.1)
    assert len(traj.times) == 1 and traj["n1"][0] == 1.0
    traj = evolve(_psi0(space), prop, 1.0, 0.1)
    assert np.allclose(np.diff(traj.times), 0.1) and len(traj.times) == 11
    with pytest.raises(ValueError):
        evolve(_psi0(space), prop, 1.0, 0.015)


def test_evolve_stop_and_snapshots():
    space = build_space(2)
    prop = exact_propagator(hamiltonian(space, SystemParams(j1=0.1, j2=0.1, variant="rwa")), 0.1)
    traj = evolve(_psi0(space), prop, 100.0, 0.1, stop=lambda row: row["n3"] > row["n1"],
                  snapshots=True)
    assert traj.stopped_early and traj["n3"][-1] > traj["n1"][-1]
    assert traj.snapshots.shape == (len(traj.times), space.dim)
    assert 11.0 < traj.times[-1] < 11.3


def test_exact_and_trotter_trajectories_agree():
    scen = Scenario(t_end=20.0)
    a = simulate(USC, scen, 3)
    b = simulate(USC, Scenario(t_end=20.0, method="exact"), 3)
    for col in ("n1", "n2", "n3"):
        assert np.abs(a[col] - b[col]).max() < 1e-8


def test_conserved_quantities_under_exact_propagation():
    space = build_space(4)
    psi = StateVector.normalized(space, fock_state(space, (1, 0, 0)).amplitudes
                                 + fock_state(space, (0, 1, 1)).amplitudes)
    for params, charge in ((USC, parity_values(space)),
                           (USC.with_(variant="rwa"), excitation_values(space))):
        H = hamiltonian(space, params)
        obs = [Observable("charge", diagonal=charge.astype(float)), energy_observable(H)]
        traj = evolve(psi, exact_propagator(H, 0.1), 200.0, 1.0, obs)
        assert np.abs(traj["charge"] - traj["charge"][0]).max() < 1e-8
        assert np.abs(traj["energy"] - traj["energy"][0]).max() < 1e-8


def test_trotter_energy_drift_small():
    space = build_space(4)
    H = hamiltonian(space, USC)
    prop = trotter4_propagator(hamiltonian_terms(space, USC), 0.01)
    traj = evolve(_psi0(space), prop, 50.0, 1.0, [energy_observable(H)])
    assert np.abs(traj["energy"] - traj["energy"][0]).max() < 1e-8


def test_trajectory_csv_roundtrip(tmp_path):
    traj = simulate(USC, Scenario(t_end=2.0), 2)
    csv_path, json_path = write_trajectory(traj, tmp_path, "run")
    back = Trajectory.read_csv(csv_path)
    assert np.array_equal(back.times, traj.times)
    for col in traj.columns:
        assert np.array_equal(back[col], traj[col])
    import json

    meta = json.load(open(json_path))
    assert meta["params"]["g"] == 0.5 and meta["splitting"]["order"] == 4


def test_initial_states_in_scenario():
    traj = simulate(SystemParams(g=0, j1=0, j2=0), Scenario(initial="superposition", p=0.2,
                                                            theta=0.63, t_end=1.0), 2)
    assert traj["n1"][0] == pytest.approx(0.96)
    with pytest.raises(ValueError):
        simulate(USC, Scenario(initial="cat", t_end=1.0), 2)
    with pytest.raises(ValueError):
        simulate(USC, Scenario(method="krylov", t_end=1.0), 2)


def test_converge_cutoff_sc():
    params = SystemParams(g=0.01, j1=0.01, j2=0.01)
    n, diag = converge_cutoff(params, Scenario(t_end=50.0), 2, 1e-8)
    assert n <= 4 and diag["max_photon_diff"] < 1e-8
    # without counter-rotating terms one excitation never reaches n = 2
    n, diag = converge_cutoff(params.with_(variant="rwa"), Scenario(t_end=50.0), 2, 1e-8)
    assert n == 2 and diag["leakage"] == 0.0


def test_converge_cutoff_infinite_tolerance():
    n, diag = converge_cutoff(USC, Scenario(t_end=1.0), 5, float("inf"))
    assert n == 5 and diag["history"] == []
    with pytest.raises(ValueError):
        converge_cutoff(USC, Scenario(t_end=1.0), 5, 0.0)


def test_converge_cutoff_failure_reports_diagnostics():
    with pytest.raises(ConvergenceError) as info:
        converge_cutoff(SystemParams(g=0.9), Scenario(t_end=20.0), 2, 1e-12, n_max_limit=6)
    assert len(info.value.diagnostics["history"]) == 2


@pytest.mark.slow
def test_converge_cutoff_usc():
    n, diag = converge_cutoff(SystemParams(g=0.9), Scenario(t_end=20.0, dt=0.05), 8, 1e-3)
    assert diag["leakage"] < 1e-3
    assert diag["max_photon_diff"] < 1e-3
    assert n == 14
    assert [h["n_max"] for h in diag["history"]] == [8, 10, 12, 14]


@pytest.mark.parametrize("backend", ["python"] + (["compiled"] if kernels.compiled_available() else []))
def test_norm_drift_stays_at_roundoff(backend):
    space = build_space(2)
    prop = trotter4_propagator(hamiltonian_terms(space, SystemParams(g=0.9, j1=0.1, j2=0.1)),
                               0.01, backend=backend)
    psi = fock_state(space, (1, 0, 0)).amplitudes.copy()
    prop.step(psi, 100_000)
    assert abs(np.vdot(psi, psi).real - 1.0) < 1e-12
