"""Time evolution: exact spectral propagator and fourth-order Suzuki-Trotter.

The exact propagator diagonalises the Hamiltonian (block by block when
symmetry sectors are supplied) and serves as the reference below
``EXACT_DIM_LIMIT``. The Trotter propagator exponentiates every split term
once, through its small block, and replays the resulting factor program with
the compiled kernel.
"""

from dataclasses import dataclass, field, asdict
import csv
import json
import math
import os

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import kernels
from .errors import ConvergenceError
from .fock import build_space, coherent_state_left, fibre_index, fock_state, superposition_state_left
from .model import hamiltonian, hamiltonian_terms, symmetry_sectors
from .observe import STANDARD_COLUMNS, default_observables

EXACT_DIM_LIMIT = 5000
SUZUKI_P = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))
DEFAULT_DT = 0.01
DEFAULT_DT_SAMPLE = 0.1
N_MAX_LIMIT = 16


def _dense_block(H, idx=None):
    m = H.matrix
    if idx is None:
        return m.toarray() if H.is_sparse else np.asarray(m)
    sub = m[idx][:, idx]
    return sub.toarray() if H.is_sparse else np.asarray(sub)


class ExactPropagator:
    """``exp(-i H t)`` through the spectral decomposition of ``H``.

    With ``sectors`` (index blocks invariant under ``H``) each block is
    diagonalised on its own. With ``support``, blocks on which that state has
    no weight are skipped; evolving a state outside the kept blocks is an error.
    """

    method = "exact"

    def __init__(self, H, dt, sectors=None, support=None):
        if H.space.dim > EXACT_DIM_LIMIT:
            raise ValueError(f"dim {H.space.dim} exceeds exact-propagator guard {EXACT_DIM_LIMIT}")
        if H.hermiticity_error() > 1e-12:
            raise ValueError("exact propagator needs a Hermitian operator")
        self.space = H.space
        self.dt = float(dt)
        if sectors is None:
            sectors = [np.arange(H.space.dim)]
        covered = np.zeros(H.space.dim, dtype=bool)
        self.blocks = []
        for idx in sectors:
            idx = np.asarray(idx, dtype=np.intp)
            covered[idx] = True
            if support is not None and np.max(np.abs(np.asarray(support)[idx]), initial=0.0) == 0.0:
                continue
            try:
                E, V = np.linalg.eigh(_dense_block(H, idx))
            except np.linalg.LinAlgError as exc:
                raise RuntimeError(f"eigendecomposition failed: {exc}") from exc
            self.blocks.append((idx, E, V))
        if not covered.all():
            raise ValueError("sectors do not cover the space")
        self._kept = np.zeros(H.space.dim, dtype=bool)
        for idx, _, _ in self.blocks:
            self._kept[idx] = True

    @property
    def eigenvalues(self):
        return np.sort(np.concatenate([E for _, E, _ in self.blocks]))

    def _check(self, psi):
        if not self._kept.all() and np.any(np.asarray(psi)[~self._kept] != 0):
            raise ValueError("state has weight in a sector that was not diagonalised")

    def advance(self, psi, t):
        """Return ``exp(-i H t) psi`` as a new array."""
        psi = np.asarray(psi, dtype=complex)
        self._check(psi)
        out = np.zeros_like(psi)
        for idx, E, V in self.blocks:
            c = V.conj().T @ psi[idx]
            out[idx] = V @ (np.exp(-1j * E * t) * c)
        return out

    def step(self, psi, n=1):
        """Advance ``psi`` in place by ``n`` steps of ``dt``."""
        psi[:] = self.advance(psi, n * self.dt)
        return psi

    def unitary(self, t=None):
        """Dense ``exp(-i H t)`` (default ``t = dt``); intended for small spaces."""
        t = self.dt if t is None else t
        U = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        for idx, E, V in self.blocks:
            U[np.ix_(idx, idx)] = (V * np.exp(-1j * E * t)) @ V.conj().T
        return U

    @property
    def factors(self):
        return [self.unitary()]

    def states_at(self, psi0, times, chunk=None):
        """Yield ``(times_chunk, states)`` with ``states[:, k] = psi(times_chunk[k])``."""
        psi0 = np.asarray(psi0, dtype=complex)
        self._check(psi0)
        times = np.asarray(times, dtype=float)
        if chunk is None:
            chunk = max(1, int(4_000_000 // self.space.dim))
        coeffs = [(idx, E, V, V.conj().T @ psi0[idx]) for idx, E, V in self.blocks]
        for start in range(0, len(times), chunk):
            tt = times[start:start + chunk]
            out = np.zeros((self.space.dim, len(tt)), dtype=complex)
            for idx, E, V, c in coeffs:
                out[idx] = V @ (c[:, None] * np.exp(-1j * np.outer(E, tt)))
            yield tt, out


def exact_propagator(H, dt, sectors=None, support=None):
    return ExactPropagator(H, dt, sectors=sectors, support=support)


def suzuki4_sequence(n_terms):
    """(term, coefficient) list of one fourth-order step, adjacent repeats merged.

    Each second-order stage is the symmetric splitting
    ``T0(c/2) ... T_{n-2}(c/2) T_{n-1}(c) T_{n-2}(c/2) ... T0(c/2)``,
    composed with weights ``p, p, 1-4p, p, p``.
    """
    p = SUZUKI_P
    raw = []
    for c in (p, p, 1.0 - 4.0 * p, p, p):
        head = [(i, c / 2) for i in range(n_terms - 1)]
        raw += head + [(n_terms - 1, c)] + head[::-1]
    merged = []
    for term, coeff in raw:
        if merged and merged[-1][0] == term:
            merged[-1] = (term, merged[-1][1] + coeff)
        else:
            merged.append((term, coeff))
    return merged


class _Program:
    """Flat factor list in the layout expected by ``kernels.run_program``."""

    def __init__(self, dim):
        self.dim = dim
        self.ops = []
        self.data = []
        self.data_len = 0
        self.fibres = {}
        self.fib_chunks = []
        self.fib_len = 0
        self.fib_table = []

    def fibre_set(self, key, idx):
        if key not in self.fibres:
            self.fibres[key] = len(self.fib_table)
            self.fib_table.append((self.fib_len, idx.shape[0]))
            self.fib_chunks.append(idx.ravel())
            self.fib_len += idx.size
        return self.fibres[key]

    def add_data(self, arr):
        off = self.data_len
        self.data.append(np.ascontiguousarray(arr, dtype=complex).ravel())
        self.data_len += arr.size
        return off

    def freeze(self, sequence):
        """Arrays for one op sequence of ``(kind, data_offset, m, fibre_set)`` rows."""
        ops = np.array(sequence, dtype=np.intp).reshape(-1, 4)
        return ops

    def arrays(self):
        data = np.concatenate(self.data) if self.data else np.zeros(0, complex)
        fib = np.concatenate(self.fib_chunks) if self.fib_chunks else np.zeros(0, np.intp)
        table = np.array(self.fib_table, dtype=np.intp).reshape(-1, 2)
        return data, fib.astype(np.intp), table


def _expm1_phase(x):
    """``exp(-i x) - 1`` accurate to relative roundoff for small ``x``."""
    return -2.0 * np.sin(0.5 * x) ** 2 - 1j * np.sin(x)


class TrotterPropagator:
    """Fourth-order Suzuki composition of the exponentials of ``terms``.

    Diagonal terms become phase vectors, local terms are exponentiated on their
    block; any other term is diagonalised on the full space (small spaces only).
    """

    method = "trotter4"

    def __init__(self, terms, dt, hamiltonian=None, backend=None):
        if not terms:
            raise ValueError("need at least one term")
        self.space = terms[0].space
        self.dt = float(dt)
        self.n_terms = len(terms)
        if hamiltonian is not None:
            total = terms[0]
            for term in terms[1:]:
                total = total + term
            err = (total - hamiltonian).max_abs()
            if err > 1e-10:
                raise ValueError(f"terms do not sum to the Hamiltonian (max deviation {err:.3e})")
        self.backend, self._run = kernels.get_backend(backend)
        self.sequence = suzuki4_sequence(len(terms))
        self._build(terms)

    def _factor(self, term, tau):
        """Increment ``exp(-i tau term) - 1`` as ``[(kind, array, axes, columns)]`` pieces.

        Local blocks are split into the connected components of their coupling
        graph; each component is exponentiated and applied on its own columns.
        Working with the increment, computed without forming the exponential,
        keeps its rounding error proportional to its size. Forming ``U`` first
        leaves a norm bias of a few ulps per factor, which accumulates linearly.
        """
        if term.diagonal is not None:
            return [("phase", _expm1_phase(tau * np.asarray(term.diagonal, dtype=float)),
                     None, None)]
        if term.local is not None:
            axes, block = term.local.axes, term.local.block
        else:
            if self.space.dim > EXACT_DIM_LIMIT:
                raise ValueError("non-local Trotter term too large to exponentiate")
            axes, block = (0, 1, 2, 3), _dense_block(term)
        n_comp, labels = connected_components(sp.csr_matrix(np.abs(block) > 0), directed=False)
        pieces = []
        for c in range(n_comp):
            cols = np.flatnonzero(labels == c)
            sub = block[np.ix_(cols, cols)]
            if not np.any(sub):
                continue  # zero generator: identity factor
            E, V = np.linalg.eigh(sub)
            K = (V * _expm1_phase(tau * E)) @ V.conj().T
            pieces.append(("local", K, axes, cols))
        return pieces

    def _build(self, terms):
        prog = _Program(self.space.dim)
        cache = {}
        self.factors = []

        def op_for(term_index, coeff):
            key = (term_index, round(coeff, 15))
            if key not in cache:
                entries = []
                for kind, arr, axes, cols in self._factor(terms[term_index], coeff * self.dt):
                    self.factors.append(arr + 1.0 if kind == "phase"
                                        else arr + np.eye(arr.shape[0]))
                    off = prog.add_data(arr)
                    if kind == "phase":
                        entries.append((0, off, 0, 0))
                    else:
                        fkey = (axes, tuple(cols))
                        if fkey not in prog.fibres:
                            idx = fibre_index(self.space, axes)[:, cols]
                            prog.fibre_set(fkey, np.ascontiguousarray(idx))
                        entries.append((1, off, arr.shape[0], prog.fibres[fkey]))
                cache[key] = entries
            return cache[key]

        seq = self.sequence
        if len(seq) == 1:
            head, body, tail = [], op_for(*seq[0]), []
        else:
            # consecutive steps share the outer factor: first(k+1) merges with last(k)
            first, last = seq[0], seq[-1]
            middle = [e for s in seq[1:-1] for e in op_for(*s)]
            head = op_for(*first)
            body = middle + op_for(first[0], first[1] + last[1])
            tail = middle + op_for(*last)
        self._head = prog.freeze(head)
        self._body = prog.freeze(body)
        self._tail = prog.freeze(tail)
        self._data, self._fib, self._table = prog.arrays()
        self._xbuf = np.empty(self.space.dim, dtype=complex)
        self._ybuf = np.empty(self.space.dim, dtype=complex)

    @property
    def factors_per_step(self):
        """Kernel operations per step (component blocks counted separately)."""
        return len(self._body)

    def step(self, psi, n=1):
        """Advance the contiguous complex array ``psi`` in place by ``n`` steps."""
        if n <= 0:
            return psi
        if psi.dtype != np.complex128 or not psi.flags.c_contiguous:
            raise TypeError("psi must be a contiguous complex128 array")
        args = (self._data, self._fib, self._table, self._xbuf, self._ybuf)
        if len(self._head) == 0:
            self._run(psi, self._body, *args, n)
            return psi
        self._run(psi, self._head, *args, 1)
        self._run(psi, self._body, *args, n - 1)
        self._run(psi, self._tail, *args, 1)
        return psi

    def advance(self, psi, t):
        n = _steps_for(t, self.dt)
        out = np.array(psi, dtype=complex)
        return self.step(out, n)


def trotter4_propagator(terms, dt, hamiltonian=None, backend=None):
    return TrotterPropagator(terms, dt, hamiltonian=hamiltonian, backend=backend)


def _steps_for(interval, dt):
    ratio = interval / dt
    n = int(round(ratio))
    if n < 0 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"interval {interval} is not an integer multiple of dt={dt}")
    return n


@dataclass
class Trajectory:
    """Observables sampled on a uniform time grid.

    ``records`` maps column names to arrays aligned with ``times``.
    ``stopped_early`` is set when a stop predicate ended the run before ``t_end``.
    """

    times: np.ndarray
    records: dict
    meta: dict = field(default_factory=dict)
    snapshots: np.ndarray = None
    stopped_early: bool = False

    def __getitem__(self, name):
        return self.records[name]

    @property
    def columns(self):
        return list(self.records)

    @property
    def dt_sample(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else float("nan")

    def to_csv(self, path):
        names = self.columns
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + names)
            cols = [self.times] + [self.records[n] for n in names]
            for row in zip(*cols):
                writer.writerow([repr(float(v)) for v in row])

    def write_sidecar(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.meta), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        records = {name: body[:, i + 1] for i, name in enumerate(header[1:])}
        return cls(body[:, 0], records)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def evolve(state0, prop, t_end, dt_sample, observables=None, stop=None, snapshots=False, meta=None):
    """Evolve ``state0`` with ``prop`` and record observables every ``dt_sample``.

    ``stop(row)`` is called with the dict of values at each sample; when it
    returns True the trajectory ends at that sample.
    """
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    steps_per_sample = _steps_for(dt_sample, prop.dt)
    if steps_per_sample == 0:
        raise ValueError("dt_sample must be positive")
    space = state0.space
    if observables is None:
        observables = default_observables(space)
    n_samples = int(math.floor(t_end / dt_sample + 1e-9)) + 1
    times = np.arange(n_samples) * dt_sample

    names = [ob.name for ob in observables]
    if len(set(names)) != len(names):
        raise ValueError("duplicate observable names")
    diag = [ob for ob in observables if ob.diagonal is not None]
    diag_matrix = np.array([ob.diagonal for ob in diag]) if diag else np.zeros((0, space.dim))
    funcs = [ob for ob in observables if ob.func is not None]

    def measure(states):
        """states: dim x k block -> dict name -> array of length k."""
        probs = np.abs(states) ** 2
        vals = diag_matrix @ probs
        out = {ob.name: vals[i] for i, ob in enumerate(diag)}
        for ob in funcs:
            out[ob.name] = np.array([ob.func(states[:, k]) for k in range(states.shape[1])])
        return out

    blocks = []
    snaps = [] if snapshots else None
    stopped = False

    def consume(block_vals, states):
        nonlocal stopped
        k = states.shape[1]
        cut = k
        if stop is not None:
            for i in range(k):
                if stop({name: block_vals[name][i] for name in names}):
                    cut = i + 1
                    stopped = True
                    break
        blocks.append({name: block_vals[name][:cut] for name in names})
        if snaps is not None:
            snaps.append(states[:, :cut].T.copy())
        return cut

    if isinstance(prop, ExactPropagator):
        for tt, states in prop.states_at(state0.amplitudes, times):
            consume(measure(states), states)
            if stopped:
                break
    else:
        psi = np.array(state0.amplitudes, dtype=complex)
        for k in range(n_samples):
            if k:
                prop.step(psi, steps_per_sample)
            column = psi[:, None]
            consume(measure(column), column)
            if stopped:
                break

    records = {name: np.concatenate([b[name] for b in blocks]) for name in names}
    n_kept = len(records[names[0]]) if names else n_samples
    traj_meta = {"dt": prop.dt, "dt_sample": dt_sample, "t_end": t_end,
                 "method": prop.method, "n_max": space.n_max, "dim": space.dim}
    if isinstance(prop, TrotterPropagator):
        traj_meta["splitting"] = {"order": 4, "p": SUZUKI_P, "n_terms": prop.n_terms,
                                  "backend": prop.backend}
    traj_meta.update(meta or {})
    return Trajectory(times[:n_kept], records, traj_meta,
                      np.concatenate(snaps) if snaps else None, stopped)


@dataclass(frozen=True)
class Scenario:
    """Initial state plus numerical settings for one simulation."""

    initial: str = "single_photon"
    alpha: complex = 1.0
    p: float = 0.0
    theta: float = 0.0
    t_end: float = 100.0
    dt: float = DEFAULT_DT
    dt_sample: float = DEFAULT_DT_SAMPLE
    method: str = "trotter4"
    force_truncation: bool = False

    def as_dict(self):
        d = asdict(self)
        d["alpha"] = {"re": complex(self.alpha).real, "im": complex(self.alpha).imag}
        return d


def initial_state(space, scenario):
    if scenario.initial == "single_photon":
        return fock_state(space, (1, 0, 0), "g")
    if scenario.initial == "coherent":
        return coherent_state_left(space, scenario.alpha, force=scenario.force_truncation)
    if scenario.initial == "superposition":
        return superposition_state_left(space, scenario.p, scenario.theta)
    raise ValueError(f"unknown initial state {scenario.initial!r}")


def make_propagator(space, params, method="trotter4", dt=DEFAULT_DT, support=None, backend=None):
    if method == "trotter4":
        return trotter4_propagator(hamiltonian_terms(space, params), dt, backend=backend)
    if method == "exact":
        H = hamiltonian(space, params)
        return exact_propagator(H, dt, sectors=symmetry_sectors(space, params), support=support)
    raise ValueError(f"unknown propagation method {method!r}")


def simulate(params, scenario, n_max, observables=None, stop=None, snapshots=False, backend=None,
             extra_observables=None):
    """Build space, Hamiltonian, propagator and initial state, then ``evolve``."""
    space = build_space(n_max)
    psi0 = initial_state(space, scenario)
    prop = make_propagator(space, params, scenario.method, scenario.dt,
                           support=psi0.amplitudes, backend=backend)
    if observables is None:
        observables = default_observables(space)
    if extra_observables:
        observables = list(observables) + list(extra_observables(space))
    meta = {"params": params.as_dict(), "scenario": scenario.as_dict()}
    return evolve(psi0, prop, scenario.t_end, scenario.dt_sample, observables, stop,
                  snapshots, meta)


def converge_cutoff(params, scenario, n_max_start, tol, n_max_limit=N_MAX_LIMIT, backend=None):
    """Raise the cutoff in steps of 2 until photon-number trajectories agree within ``tol``.

    Returns ``(n_max, diagnostics)``. ``n_max`` is the smaller cutoff of the
    first agreeing pair; ``diagnostics['leakage']`` is the largest population
    found at the cutoff level along that trajectory.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    history = []
    diagnostics = {"tol": tol, "n_max_start": n_max_start, "history": history}
    if math.isinf(tol):
        diagnostics["n_max"] = n_max_start
        return n_max_start, diagnostics
    n = n_max_start
    lower = simulate(params, scenario, n, backend=backend)
    while n + 2 <= n_max_limit:
        upper = simulate(params, scenario, n + 2, backend=backend)
        diff = max(float(np.max(np.abs(lower[c] - upper[c]))) for c in ("n1", "n2", "n3"))
        leak = float(np.max(lower["leakage"]))
        history.append({"n_max": n, "compared_with": n + 2, "max_photon_diff": diff,
                        "leakage": leak})
        if diff < tol:
            diagnostics.update(n_max=n, max_photon_diff=diff, leakage=leak)
            return n, diagnostics
        n, lower = n + 2, upper
    raise ConvergenceError(
        f"photon numbers not converged to {tol:g} below n_max={n_max_limit}", diagnostics)


STANDARD_CSV_COLUMNS = ("t",) + STANDARD_COLUMNS


def write_trajectory(traj, directory, stem):
    """Write ``stem.csv`` and ``stem.json``; return the two paths."""
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, stem + ".csv")
    json_path = os.path.join(directory, stem + ".json")
    traj.to_csv(csv_path)
    traj.write_sidecar(json_path)
    return csv_path, json_path
