"""Photon transfer in a three-cavity array with a qubit in the central cavity."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, CutoffError, DegenerateSeriesError,  # noqa: E402
                     GridBoundaryError, TricavityError, TruncationError)
from .fock import (Operator, SpaceDescriptor, StateVector, build_space, coherent_state_left,  # noqa: E402
                   fock_state, mode_op, qubit_op, superposition_state_left)
from .model import (SystemParams, Variant, hamiltonian, hamiltonian_degenerate,  # noqa: E402
                    hamiltonian_full, hamiltonian_rwa, hamiltonian_terms)
from .observe import (DensityMatrix, photon_number, qubit_excitation,  # noqa: E402
                      reduced_cavity_state, total_excitations, transfer_fidelity)
from .propagate import (Scenario, Trajectory, converge_cutoff, evolve,  # noqa: E402
                        exact_propagator, simulate, trotter4_propagator)
from .analytic import (ScSolution, SingleExcitationAmplitudes, degenerate_delta_n,  # noqa: E402
                       rwa_amplitude, rwa_delta, rwa_inversion_time, single_excitation_evolution)
from .analysis import (amplitude_scan, box_count, estimate_gc, fit_dimension,  # noqa: E402
                       inversion_time, scan_inversion_vs_g)
