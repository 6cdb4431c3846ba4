"""Ground-state spin triplet dynamics: Rabi rates, evolution, fidelities.

Basis ordering everywhere is {|+1>, |0>, |-1>}.  The normative Rabi rates
are the closed forms in :func:`rabi_frequency`; the full Hamiltonian
integrator exists as an independent check of those rates and of the
rotating-wave evolution path.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .device import PhysicalConstants
from .errors import ValidationError

# Spin-1 operators (hbar = 1) in the {+1, 0, -1} basis.
_SQRT2 = math.sqrt(2.0)
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)

_ANTI_XZ = SX @ SZ + SZ @ SX
_ANTI_YZ = SY @ SZ + SZ @ SY
_ANTI_XY = SX @ SY + SY @ SX
_Y2_MINUS_X2 = SY @ SY - SX @ SX

HERMITICITY_TOL = 1e-12


class Transition(enum.Enum):
    PLUS_MINUS = "plus_minus"        # |+1> <-> |-1>, double-quantum
    SINGLE_QUANTUM = "single_quantum"  # |+-1> <-> |0>


@dataclass(frozen=True)
class SpinState:
    """Density matrix of the NV ground-state triplet."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (3, 3):
            raise ValidationError(f"rho must be 3x3, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
            raise ValidationError("rho is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ValidationError(f"tr(rho) = {np.trace(rho).real} != 1")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
            raise ValidationError("rho has a negative eigenvalue")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_ket(cls, ket) -> "SpinState":
        ket = np.asarray(ket, dtype=complex)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho))

    def two_level(self, transition: Transition) -> np.ndarray:
        """2x2 restriction of rho onto the driven transition subspace."""
        idx = [0, 2] if transition is Transition.PLUS_MINUS else [0, 1]
        return self.rho[np.ix_(idx, idx)]


@dataclass(frozen=True)
class DriveConfig:
    """One resonant-drive segment in the NV frame."""

    transition: Transition = Transition.PLUS_MINUS
    e_nv: tuple[float, float, float] = (0.0, 0.0, 0.0)  # (E_par, E_mu1, E_mu2) V/m
    omega: float = 2.0e9      # carrier frequency, Hz
    phase: float = 0.0        # rad
    duration: float = 0.0     # s
    b_bias: float = 0.0       # T, static field along the NV axis

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("drive duration must be >= 0")
        if not all(math.isfinite(x) for x in self.e_nv):
            raise ValidationError("drive amplitudes must be finite")

    @property
    def e_perp(self) -> float:
        return math.hypot(self.e_nv[1], self.e_nv[2])


def rabi_frequency(drive: DriveConfig, constants: PhysicalConstants) -> float:
    """Rabi frequency (Hz) of the driven transition.

    Double-quantum: Omega = d_perp * |E_perp|.
    Single-quantum: Omega = d_perp' * |E_perp| / sqrt(2).
    """
    e_perp = drive.e_perp
    if drive.transition is Transition.PLUS_MINUS:
        return constants.d_perp * e_perp
    return constants.d_perp_prime * e_perp / _SQRT2


def hamiltonian(drive: DriveConfig, constants: PhysicalConstants, t: float) -> np.ndarray:
    """Instantaneous H(t)/h (Hz) for the oscillating NV-frame drive field.

    The transverse term with the large susceptibility couples |+1> <-> |-1>;
    the primed susceptibility couples |+-1> <-> |0>.
    """
    e_par, e_mu1, e_mu2 = drive.e_nv
    osc = math.cos(2.0 * math.pi * drive.omega * t + drive.phase)
    h = constants.gamma * drive.b_bias * SZ
    h = h + constants.d_par * e_par * osc * (SZ @ SZ)
    h = h + constants.d_perp * osc * (e_mu1 * _Y2_MINUS_X2 + e_mu2 * _ANTI_XY)
    h = h + constants.d_perp_prime * osc * (e_mu1 * _ANTI_XZ + e_mu2 * _ANTI_YZ)
    return h


def _rwa_unitary(drive: DriveConfig, constants: PhysicalConstants) -> np.ndarray:
    """Analytic two-level rotation in the driven subspace (3x3 embedding)."""
    omega_r = rabi_frequency(drive, constants)
    theta = 2.0 * math.pi * omega_r * drive.duration  # rotation angle
    axis = math.cos(drive.phase), math.sin(drive.phase)
    u2 = np.array(
        [
            [math.cos(theta / 2), -1j * (axis[0] - 1j * axis[1]) * math.sin(theta / 2)],
            [-1j * (axis[0] + 1j * axis[1]) * math.sin(theta / 2), math.cos(theta / 2)],
        ],
        dtype=complex,
    )
    u = np.eye(3, dtype=complex)
    idx = [0, 2] if drive.transition is Transition.PLUS_MINUS else [0, 1]
    u[np.ix_(idx, idx)] = u2
    return u


def evolve(
    state: SpinState,
    drive: DriveConfig,
    constants: PhysicalConstants,
    method: str = "integrate",
    dt: float | None = None,
) -> SpinState:
    """Evolve ``state`` under the drive for its full duration.

    ``method="integrate"`` integrates the von Neumann equation with the
    oscillating field (fixed-step RK4); ``method="rwa"`` applies the analytic
    two-level rotation.
    """
    if method == "rwa":
        u = _rwa_unitary(drive, constants)
        return SpinState(u @ state.rho @ u.conj().T)
    if method != "integrate":
        raise ValidationError(f"unknown evolution method {method!r}")

    omega_r = rabi_frequency(drive, constants)
    f_max = max(drive.omega, omega_r, constants.gamma * abs(drive.b_bias), 1.0)
    dt_max = 1.0 / (50.0 * f_max)
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise ValidationError(f"integration step {dt} exceeds 1/(50*max frequency) = {dt_max}")

    n_steps = max(1, math.ceil(drive.duration / dt))
    dt = drive.duration / n_steps if drive.duration > 0 else 0.0
    rho = state.rho.copy()
    two_pi = 2.0 * math.pi

    def deriv(r, t):
        h = hamiltonian(drive, constants, t)
        return -1j * two_pi * (h @ r - r @ h)

    t = 0.0
    for _ in range(n_steps):
        k1 = deriv(rho, t)
        k2 = deriv(rho + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = deriv(rho + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = deriv(rho + dt * k3, t + dt)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < -1e-6:
        raise NumericalError(
            f"integration diverged: eigenvalue {vals.min():.3g} far below zero"
        )
    if vals.min() < 0.0:
        # integration drift only; project back onto the physical cone
        rho = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
    rho = rho / np.trace(rho).real
    return SpinState(rho)


def apply_dephasing(
    state: SpinState, t: float, t2_star: float, gaussian: bool = False
) -> SpinState:
    """Damp off-diagonal elements; exponential by default, Gaussian optional."""
    if gaussian:
        lam = math.exp(-((t / t2_star) ** 2))
    else:
        lam = math.exp(-t / t2_star)
    rho = state.rho.copy()
    off = ~np.eye(3, dtype=bool)
    rho[off] *= lam
    return SpinState(rho)


def dephasing_pi_fidelity(omega_r: float, t2_star: float) -> float:
    """Equator-state pi-pulse fidelity under inhomogeneous dephasing.

    F = (1 + exp(-1/(2 * Omega_R * T2*))) / 2.
    """
    if omega_r <= 0 or t2_star <= 0:
        raise ValidationError("omega_r and t2_star must be positive")
    return 0.5 * (1.0 + math.exp(-1.0 / (2.0 * omega_r * t2_star)))


def average_gate_fidelity(
    omega_r: float, t2_star: float, n_samples: int = 100_000, seed: int = 0
) -> float:
    """Monte Carlo pi-rotation fidelity averaged over Haar-uniform pure states.

    Dephasing shrinks the transverse Bloch components by
    exp(-t_pi/T2*) with t_pi = 1/(2*Omega_R); poles are unaffected.
    """
    if n_samples < 1000:
        raise ValidationError("n_samples must be >= 1e3")
    lam = math.exp(-1.0 / (2.0 * omega_r * t2_star))
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=n_samples)  # uniform on the sphere
    fidelities = 1.0 - 0.5 * (1.0 - lam) * (1.0 - z**2)
    return float(np.mean(fidelities))


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = _check_density(rho)
    sigma = _check_density(sigma)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    sqrt_rho = (vecs * np.sqrt(vals)) @ vecs.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    eigs = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sum(np.sqrt(eigs)) ** 2)
    return min(f, 1.0)


def _check_density(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"density matrix must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > 1e-8:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(m).real - 1.0) > 1e-8:
        raise ValidationError("density matrix trace != 1")
    return m


class Averaging(enum.Enum):
    EQUATOR = "equator"
    BLOCH_AVERAGE = "bloch_average"


def crosstalk_fidelity(
    residual_rabi: float,
    target_rabi: float,
    averaging: Averaging = Averaging.EQUATOR,
) -> float:
    """Fidelity of a neighbor qubit against identity during the target pi-pulse.

    The neighbor picks up a rotation of angle pi * (residual/target Rabi).
    The rotation axis relative to the initial state is not controlled, so the
    worst-case (axis orthogonal to the Bloch vector) is reported for the
    equator state (|+1> + |-1>)/sqrt(2); the Bloch average integrates the
    same rotation over Haar-uniform initial states.
    """
    if target_rabi <= 0:
        raise ValidationError("target Rabi frequency must be positive")
    theta = math.pi * residual_rabi / target_rabi
    c2 = math.cos(theta / 2.0) ** 2
    if averaging is Averaging.EQUATOR:
        return c2
    return (2.0 * c2 + 1.0) / 3.0


def crosstalk_fidelity_from_drive(
    residual_drive: DriveConfig,
    t_pi: float,
    constants: PhysicalConstants,
    averaging: Averaging = Averaging.EQUATOR,
) -> float:
    """Same as :func:`crosstalk_fidelity` but from a residual field drive.

    ``t_pi`` must be the target qubit's pi time 1/(2*Omega_target).
    """
    omega_res = rabi_frequency(residual_drive, constants)
    omega_tar = 1.0 / (2.0 * t_pi)
    return crosstalk_fidelity(omega_res, omega_tar, averaging)


STATE_EQUATOR = SpinState.from_ket([1.0, 0.0, 1.0])
