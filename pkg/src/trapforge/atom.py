"""9Be+ ground-state hyperfine physics.

Level structure of the 2s ^2S_1/2 manifold (I = 3/2, J = 1/2, 8 levels) in
a static field, magnetic-dipole matrix elements, AC Zeeman shifts of
hyperfine transitions in an oscillating near-field, Ramsey fringe
simulation, and the sideband-rate estimate for a gradient-driven
two-qubit gate.

Internally everything is SI; energies are returned in Hz.  States are
labeled (F, m_F) by adiabatic continuation from zero field.  Since the
hyperfine constant of 9Be+ is negative, the F = 2 manifold lies *below*
F = 1.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import constants as ct

__all__ = [
    "HyperfineModel",
    "TransitionSpec",
    "ModeSpec",
    "HyperfineLevels",
    "breit_rabi_levels",
    "dipole_matrix_elements",
    "ac_zeeman_shift",
    "zeeman_shift_map",
    "simulate_ramsey",
    "ramsey_phase_scan_shift",
    "ms_gate_time",
    "ResonantDriveError",
]


class ResonantDriveError(ValueError):
    """Drive frequency collides with a coupled transition."""


def _spin_matrices(j):
    """Angular momentum matrices (Jx, Jy, Jz) for spin j, m = +j..-j."""
    m = np.arange(j, -j - 1, -1)
    dim = m.size
    jz = np.diag(m)
    jp = np.zeros((dim, dim))
    for k in range(1, dim):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jm = jp.T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz


# 8-dimensional product basis |m_I> x |m_J>, I = 3/2, J = 1/2
_IX, _IY, _IZ = _spin_matrices(1.5)
_JX, _JY, _JZ = _spin_matrices(0.5)
_EYE_I = np.eye(4)
_EYE_J = np.eye(2)

IX = np.kron(_IX, _EYE_J)
IY = np.kron(_IY, _EYE_J)
IZ = np.kron(_IZ, _EYE_J)
JX = np.kron(_EYE_I, _JX)
JY = np.kron(_EYE_I, _JY)
JZ = np.kron(_EYE_I, _JZ)
IDOTJ = IX @ JX + IY @ JY + IZ @ JZ

# all (F, m_F) labels of the manifold
LEVELS = [(2, m) for m in range(-2, 3)] + [(1, m) for m in range(-1, 2)]


@dataclass(frozen=True)
class HyperfineModel:
    """2S_1/2 hyperfine manifold of a single 9Be+ ion in a static field.

    Parameters
    ----------
    b0 : float
        Static field magnitude (T).
    direction : tuple of float
        Unit vector of the quantization field in trap coordinates
        (x lateral, y axial, z height).
    a_hfs, g_j, g_i : float
        Hyperfine constant (Hz) and g-factors; defaults are the pinned
        9Be+ literature values.
    """

    b0: float
    direction: tuple = ct.B0_DIRECTION
    a_hfs: float = ct.BE9_HYPERFINE_A
    g_j: float = ct.BE9_G_J
    g_i: float = ct.BE9_G_I

    def __post_init__(self):
        if self.b0 < 0:
            raise ValueError("static field magnitude must be >= 0")
        n = np.linalg.norm(self.direction)
        if not np.isclose(n, 1.0, atol=1e-9):
            object.__setattr__(self, "direction",
                               tuple(np.asarray(self.direction) / n))

    def hamiltonian(self, b0=None):
        """8x8 Hamiltonian (J) in the |m_I, m_J> basis quantized along B0."""
        if b0 is None:
            b0 = self.b0
        h = ct.H * self.a_hfs * IDOTJ
        h = h + ct.MU_B * b0 * (self.g_j * JZ + self.g_i * IZ)
        return h


@dataclass(frozen=True)
class TransitionSpec:
    """A hyperfine transition, labeled by adiabatic (F, m_F) pairs."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        for st in (self.lower, self.upper):
            if tuple(st) not in LEVELS:
                raise ValueError(f"state {st} not in the 8-level manifold")
        if abs(self.delta_m) > 1:
            raise ValueError("|delta m_F| must be <= 1 for a dipole transition")

    @property
    def delta_m(self):
        return self.upper[1] - self.lower[1]


QUBIT = TransitionSpec(lower=(2, 1), upper=(1, 1))
PROBE_00 = TransitionSpec(lower=(2, 0), upper=(1, 0))


@dataclass(frozen=True)
class ModeSpec:
    """A motional mode used for spin-motion coupling estimates."""

    omega_m: float
    mass: float = ct.BE9_ION_MASS

    def __post_init__(self):
        if self.omega_m <= 0 or self.mass <= 0:
            raise ValueError("mode frequency and mass must be positive")

    @property
    def x_wp(self):
        """Ground-state wavepacket size sqrt(hbar / (2 m omega)) in m."""
        return np.sqrt(ct.HBAR / (2.0 * self.mass * self.omega_m))


class HyperfineLevels:
    """Diagonalized manifold with adiabatic (F, m_F) labels."""

    def __init__(self, model: HyperfineModel):
        self.model = model
        h = model.hamiltonian()
        energies, states = np.linalg.eigh(h)
        # m_F is conserved; label each eigenstate by its m_F block and by
        # energy order within the block (branches of a 2x2 block never
        # cross, so order at any field matches the order at B = 0)
        mf_diag = np.diag(IZ + JZ)
        labels = {}
        for mf in range(-2, 3):
            mask = np.array([np.isclose(
                states[:, k] @ (mf_diag * states[:, k]),
                mf * (states[:, k] @ states[:, k]), atol=1e-6)
                for k in range(8)])
            block = [k for k in range(8) if mask[k]]
            block.sort(key=lambda k: energies[k])
            if len(block) == 1:
                labels[(2, mf)] = block[0]
            else:
                # A < 0: the F = 2 branch is the lower one
                labels[(2, mf)] = block[0]
                labels[(1, mf)] = block[1]
        self._energies = energies / ct.H
        self._states = states
        self._labels = labels

    def energy(self, level):
        """Level energy in Hz."""
        return self._energies[self._labels[tuple(level)]]

    def state(self, level):
        """Eigenvector in the |m_I, m_J> basis (quantized along B0)."""
        return self._states[:, self._labels[tuple(level)]].copy()

    @property
    def energies(self):
        """Dict {(F, m_F): energy in Hz}."""
        return {lvl: self._energies[k] for lvl, k in self._labels.items()}

    def transition_frequency(self, transition: TransitionSpec):
        """|E_upper - E_lower| / h in Hz."""
        return abs(self.energy(transition.upper) - self.energy(transition.lower))


def breit_rabi_levels(model: HyperfineModel) -> HyperfineLevels:
    """Diagonalize the 8-level manifold at the model's static field."""
    return HyperfineLevels(model)


def _moment_operator(model):
    """Vector magnetic-moment operator (J/T), components in the B0 frame."""
    mx = ct.MU_B * (model.g_j * JX + model.g_i * IX)
    my = ct.MU_B * (model.g_j * JY + model.g_i * IY)
    mz = ct.MU_B * (model.g_j * JZ + model.g_i * IZ)
    return mx, my, mz


def _b0_frame(direction):
    """Orthonormal triad (e1, e2, n) with n along the static field."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    seed = np.array([0.0, 0.0, 1.0])
    if abs(n @ seed) > 0.9:
        seed = np.array([1.0, 0.0, 0.0])
    e1 = seed - (seed @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2, n


def dipole_matrix_elements(model: HyperfineModel, transition: TransitionSpec,
                           polarization: str) -> float:
    """Magnitude of the magnetic-dipole matrix element (J/T).

    ``polarization`` is one of ``pi``, ``sigma+``, ``sigma-``, the
    spherical component relative to the static field axis.  The sigma
    operators are (mu_x +- i mu_y)/2, so the fully stretched element
    saturates at mu_B g_J / 2 in the high-field limit.
    """
    levels = breit_rabi_levels(model)
    mx, my, mz = _moment_operator(model)
    ops = {
        "pi": mz,
        "sigma+": 0.5 * (mx + 1j * my),
        "sigma-": 0.5 * (mx - 1j * my),
    }
    if polarization not in ops:
        raise ValueError("polarization must be 'pi', 'sigma+' or 'sigma-'")
    upper = levels.state(transition.upper)
    lower = levels.state(transition.lower)
    return abs(np.conj(upper) @ (ops[polarization] @ lower))


def _level_shifts(model, field, drive_frequency, wanted,
                  counter_rotating=True, guard_hz=1e3):
    """Second-order (quasi-energy) shift of the ``wanted`` levels, in Hz.

    ``field`` is the complex magnetic phasor (T) in trap coordinates; the
    physical field is Re[field * exp(-i w t)].  The resonance guard only
    watches transitions that couple to a wanted level; a resonant pair
    elsewhere in the manifold does not invalidate these shifts.
    """
    levels = breit_rabi_levels(model)
    e1, e2, n = _b0_frame(model.direction)
    b = np.asarray(field, dtype=complex)
    bp = np.array([b @ e1, b @ e2, b @ n])
    mx, my, mz = _moment_operator(model)
    coupling = 0.5 * (mx * bp[0] + my * bp[1] + mz * bp[2])
    # rotate into the eigenbasis
    u = np.column_stack([levels.state(lvl) for lvl in LEVELS])
    energies = np.array([levels.energy(lvl) for lvl in LEVELS])
    a = np.conj(u.T) @ coupling @ u            # co-rotating part, J
    ad = np.conj(u.T) @ coupling.conj().T @ u  # counter-rotating part
    wd = drive_frequency
    index = {lvl: k for k, lvl in enumerate(LEVELS)}
    # couplings below this fraction of the largest are treated as zero so
    # that symmetry-forbidden partners cannot trip the resonance guard
    floor = 1e-12 * max(np.abs(a).max(), np.abs(ad).max(), 1e-300)

    shifts = {}
    for lvl in wanted:
        i = index[tuple(lvl)]
        total = 0.0
        for j in range(len(LEVELS)):
            if j == i:
                continue
            dij = energies[i] - energies[j]
            co = abs(a[j, i]) ** 2
            cr = abs(ad[j, i]) ** 2
            if co > floor ** 2:
                if abs(dij + wd) < guard_hz:
                    raise ResonantDriveError(
                        f"drive within {guard_hz:g} Hz of the "
                        f"{LEVELS[j]} <-> {LEVELS[i]} transition")
                total += co / (ct.H ** 2) / (dij + wd)
            if counter_rotating and cr > floor ** 2:
                if abs(dij - wd) < guard_hz:
                    raise ResonantDriveError(
                        f"drive within {guard_hz:g} Hz of the "
                        f"{LEVELS[j]} <-> {LEVELS[i]} transition")
                total += cr / (ct.H ** 2) / (dij - wd)
        shifts[tuple(lvl)] = total
    return shifts


def ac_zeeman_shift(model: HyperfineModel, transition: TransitionSpec,
                    field, drive_frequency: float,
                    counter_rotating: bool = True) -> float:
    """AC Zeeman shift (Hz) of a transition in an oscillating field.

    The complex 3-vector ``field`` (T) is the phasor of the near-field at
    the ion in trap coordinates.  Both rotating and counter-rotating terms
    are kept unless ``counter_rotating`` is disabled.  Returns the signed
    change of the transition frequency
    ``(E_upper - E_lower)/h``.
    """
    if np.linalg.norm(np.asarray(field, dtype=complex)) == 0.0:
        return 0.0
    shifts = _level_shifts(model, field, drive_frequency,
                           (transition.upper, transition.lower),
                           counter_rotating)
    return shifts[tuple(transition.upper)] - shifts[tuple(transition.lower)]


def zeeman_shift_map(model: HyperfineModel, transition: TransitionSpec,
                     field_map, drive_frequency: float,
                     counter_rotating: bool = True):
    """Absolute AC Zeeman shift (Hz) for every node of a field map.

    Returns an array shaped like the map grid.  The conventional 3 dB
    power step between probe datasets doubles every value since the shift
    is quadratic in the field (linear in power).
    """
    samples = field_map.samples.reshape(-1, 3)
    out = np.empty(samples.shape[0])
    for k, b in enumerate(samples):
        out[k] = abs(ac_zeeman_shift(model, transition, b, drive_frequency,
                                     counter_rotating))
    return out.reshape(field_map.shape)


def simulate_ramsey(shift_hz: float, probe_time: float,
                    pulse_phase: float = 0.0) -> float:
    """Excited-state probability after an ideal Ramsey sequence.

    Two perfect pi/2 pulses separated by ``probe_time`` with a transition
    frequency shift ``shift_hz`` applied in between and a phase offset
    ``pulse_phase`` (rad) on the second pulse.
    """
    if probe_time < 0:
        raise ValueError("probe time must be >= 0")
    return 0.5 * (1.0 + np.cos(2.0 * np.pi * shift_hz * probe_time
                               - pulse_phase))


def ramsey_phase_scan_shift(phases, probabilities, probe_time: float) -> float:
    """Recover the frequency shift from a Ramsey phase scan.

    Fits P(phase) = (1 + cos(theta - phase))/2 by linear least squares in
    (cos theta, sin theta) and returns theta / (2 pi t).  Unambiguous for
    accumulated phase below one cycle.
    """
    phases = np.asarray(phases, dtype=float)
    probs = np.asarray(probabilities, dtype=float)
    rhs = 2.0 * probs - 1.0
    design = np.column_stack([np.cos(phases), np.sin(phases)])
    (c, s), *_ = np.linalg.lstsq(design, rhs, rcond=None)
    theta = np.arctan2(s, c)
    return theta / (2.0 * np.pi * probe_time)


def ms_gate_time(gradient: float, mode: ModeSpec, model: HyperfineModel,
                 transition: TransitionSpec = QUBIT,
                 loops: int = 1) -> float:
    """Minimum two-qubit gate time for a gradient-driven sideband (s).

    The sideband Rabi rate is ``mu_t * B' * x_wp / hbar`` with ``mu_t``
    the transition moment of the addressed carrier.  The default
    single-loop convention gives ``tau = pi / Omega_SB``; other loop
    counts scale linearly.
    """
    if gradient <= 0:
        raise ValueError("field gradient must be positive")
    pol = {0: "pi", 1: "sigma+", -1: "sigma-"}[transition.delta_m]
    mu_t = dipole_matrix_elements(model, transition, pol)
    if mu_t == 0:
        raise ValueError("transition moment vanishes; no sideband coupling")
    omega_sb = mu_t * gradient * mode.x_wp / ct.HBAR
    return loops * np.pi / omega_sb
