"""Closed-form results in the rotating-wave (strong-coupling) regime and the degenerate-qubit case.

Single-excitation dynamics at resonance live in the basis
``{|000>|e>, |100>|g>, |010>|g>, |001>|g>}`` with amplitudes
``(alpha, beta, gamma, delta)``. In the interaction picture the block is a star
centred on ``|010>|g>`` with couplings ``g``, ``-J1`` and ``-J2``.

Functions returning an inversion time use ``None`` for "no inversion".
"""

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class ScSolution:
    g: float
    j1: float
    j2: float

    @property
    def lam(self):
        return math.sqrt(self.g ** 2 + self.j1 ** 2 + self.j2 ** 2)

    @property
    def amplitude_t(self):
        return rwa_amplitude(self.g, self.j1, self.j2)

    @property
    def crossover_gt(self):
        return crossover_parameter(self.g, self.j1, self.j2)


@dataclass(frozen=True)
class SingleExcitationAmplitudes:
    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def as_array(self):
        return np.array([self.alpha, self.beta, self.gamma, self.delta])

    def norm(self):
        return float(np.linalg.norm(self.as_array()))


def _lambda(g, j1, j2):
    return math.sqrt(g * g + j1 * j1 + j2 * j2)


def rwa_amplitude(g, j1, j2):
    """Transfer amplitude T = 2 J1 J2 / (g^2 + J1^2 + J2^2)."""
    lam2 = g * g + j1 * j1 + j2 * j2
    if lam2 == 0:
        raise ValueError("rwa_amplitude is undefined when all couplings vanish")
    return 2.0 * j1 * j2 / lam2


def rwa_delta(g, j1, j2, t):
    """Right-cavity amplitude delta(t) = T (cos(lambda t) - 1) / 2 at resonance."""
    return 0.5 * rwa_amplitude(g, j1, j2) * (np.cos(_lambda(g, j1, j2) * np.asarray(t)) - 1.0)


def crossover_parameter(g, j1, j2):
    """g_t = g / sqrt(J1^2 + J2^2); the RWA fails for g_t > 1."""
    return g / math.hypot(j1, j2)


def rwa_inversion_time(g, j1, j2):
    """arccos(1 - lambda^2 / (J1^2 + J2^2)) / lambda, or None when no inversion occurs.

    The expression is the first zero of N1 - N3 for homogeneous hopping
    (J1 = J2). Inversion requires g <= sqrt(J1^2 + J2^2).
    """
    s = j1 * j1 + j2 * j2
    if s == 0:
        return None
    lam = _lambda(g, j1, j2)
    arg = 1.0 - lam * lam / s
    if arg < -1.0 - 1e-12:
        return None
    return math.acos(max(-1.0, arg)) / lam


def degenerate_delta_n(j, t):
    """N1 - N3 = cos(sqrt(2) J t) for the degenerate-qubit model with J1 = J2 = J."""
    return np.cos(math.sqrt(2.0) * j * np.asarray(t))


def single_excitation_block(g, j1, j2):
    """Interaction-picture Hamiltonian of the one-excitation sector at resonance."""
    h = np.zeros((4, 4))
    h[0, 2] = h[2, 0] = g
    h[1, 2] = h[2, 1] = -j1
    h[2, 3] = h[3, 2] = -j2
    return h


def single_excitation_evolution(g, j1, j2, t):
    """Amplitudes (alpha, beta, gamma, delta) at time ``t`` from |100>|g>, by 4x4 spectral solution."""
    E, V = np.linalg.eigh(single_excitation_block(g, j1, j2))
    c0 = V.conj().T @ np.array([0.0, 1.0, 0.0, 0.0])
    amps = V @ (np.exp(-1j * E * t) * c0)
    return SingleExcitationAmplitudes(*amps)


def dark_state(g, j):
    """|E> = (g |100>|g> + J |000>|e>) / sqrt(g^2 + J^2) in the 4-state basis."""
    v = np.array([j, g, 0.0, 0.0])
    return v / np.linalg.norm(v)


def amplitude_argmax_j2(g, j1):
    """J2 maximising T at fixed g, J1: sqrt(g^2 + J1^2)."""
    return math.hypot(g, j1)
