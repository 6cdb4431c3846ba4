"""Voltage programming: cross-talk elimination, arbitrary drive synthesis,
and DC Stark-shift frequency-channel allocation.

All solvers are direct (LU with partial pivoting plus one step of iterative
refinement); a minimum-norm least-squares fallback covers rectangular
reduced systems.  Dense is fine at the array sizes involved.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .device import PhysicalConstants
from .errors import NumericalError, ValidationError
from .fields import Components, GMatrix
from .spin import Averaging, crosstalk_fidelity

MAX_CONDITION = 1e12
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class DriveTarget:
    """Per-site desired transverse AC field, V/m amplitude in (mu1, mu2)."""

    n_sites: int
    fields: dict[int, tuple[float, float]]  # site -> (E_mu1, E_mu2)

    def __post_init__(self):
        for site in self.fields:
            if not 0 <= site < self.n_sites:
                raise ValidationError(f"target site {site} outside 0..{self.n_sites - 1}")

    @property
    def target_sites(self) -> list[int]:
        return sorted(self.fields)

    def rhs(self) -> np.ndarray:
        """Stacked (E_mu1, E_mu2) right-hand side, zero at non-target sites."""
        e = np.zeros(2 * self.n_sites)
        for site, (e_mu1, e_mu2) in self.fields.items():
            e[2 * site] = e_mu1
            e[2 * site + 1] = e_mu2
        return e

    @classmethod
    def single_site(cls, n_sites: int, site: int, e_mu1: float, e_mu2: float = 0.0):
        return cls(n_sites=n_sites, fields={site: (e_mu1, e_mu2)})


DEFAULT_CHANNELS = {
    "ch0": -400e9,  # parking detuning, into the bandgap
    "ch1": -40e9,
    "ch2": -80e9,
    "ch3": -120e9,
}


@dataclass(frozen=True)
class ChannelPlan:
    """Stark-shift frequency channels and the site -> channel assignment.

    Shifts are negative-going: the perpendicular Stark term only lowers the
    optical transition frequency, so all channel values are <= 0 Hz.
    """

    assignment: dict[int, str]
    channels: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CHANNELS))
    linewidth: float = 100e6  # Hz

    def __post_init__(self):
        values = sorted(self.channels.values())
        for lo, hi in zip(values, values[1:]):
            if hi - lo < 100.0 * self.linewidth:
                raise ValidationError(
                    f"channel spacing {hi - lo:.3g} Hz below 100x linewidth"
                )
        for site, name in self.assignment.items():
            if name not in self.channels:
                raise ValidationError(f"site {site} assigned to unknown channel {name!r}")

    def shift_for_site(self, site: int) -> float:
        return self.channels[self.assignment[site]]


def _check_square_system(g: GMatrix) -> np.ndarray:
    m = g.matrix
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"G must be square for inversion, got {m.shape}")
    if g.condition_number > MAX_CONDITION:
        raise NumericalError(
            f"G condition number {g.condition_number:.3g} exceeds {MAX_CONDITION:.0g}"
        )
    return m


def _name_deficient_rows(m: np.ndarray, row_labels: list[str]) -> list[str]:
    _, s, vt = np.linalg.svd(m.T)  # left null space of m = right null space of m.T
    tol = max(m.shape) * np.finfo(float).eps * (s[0] if len(s) else 1.0)
    null = vt[np.sum(s > tol) :]
    names = set()
    for vec in null:
        names.add(row_labels[int(np.argmax(np.abs(vec)))])
    return sorted(names)


def _solve_refined(m: np.ndarray, rhs: np.ndarray, row_labels: list[str]) -> np.ndarray:
    try:
        lu, piv = scipy.linalg.lu_factor(m)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"singular G matrix: {exc}") from exc
    v = scipy.linalg.lu_solve((lu, piv), rhs)
    if not np.all(np.isfinite(v)):
        rows = _name_deficient_rows(m, row_labels)
        raise NumericalError(f"singular G matrix; deficient rows: {rows}")
    # one step of iterative refinement
    v = v + scipy.linalg.lu_solve((lu, piv), rhs - m @ v)
    return v


def _check_voltage_bound(voltages: np.ndarray, voltage_limit: float | None, strict: bool):
    if voltage_limit is None:
        return
    worst = float(np.max(np.abs(voltages))) if len(voltages) else 0.0
    if worst > voltage_limit:
        msg = f"solution voltage {worst:.3g} V exceeds breakdown-derived bound {voltage_limit:.3g} V"
        if strict:
            raise NumericalError(msg)
        warnings.warn(msg, stacklevel=3)


def synthesize_drive(
    g: GMatrix,
    target: DriveTarget,
    *,
    voltage_limit: float | None = None,
    strict: bool = False,
) -> np.ndarray:
    """Voltages realizing an arbitrary per-site transverse field pattern."""
    if g.components is not Components.PERP2:
        raise ValidationError("drive synthesis requires a Perp2 G matrix")
    m = _check_square_system(g)
    rhs = target.rhs()
    if rhs.shape[0] != m.shape[0]:
        raise ValidationError(
            f"target covers {rhs.shape[0] // 2} sites but G has {m.shape[0] // 2}"
        )
    v = _solve_refined(m, rhs, g.row_labels)
    _check_voltage_bound(v, voltage_limit, strict)
    return v


def eliminate_crosstalk(
    g: GMatrix,
    target: DriveTarget,
    *,
    voltage_limit: float | None = None,
    strict: bool = False,
) -> np.ndarray:
    """Cross-talk-eliminating voltages: requested field on the target sites,
    zero transverse field everywhere else (V = G^-1 E_tar)."""
    return synthesize_drive(g, target, voltage_limit=voltage_limit, strict=strict)


def solution_residual(g: GMatrix, voltages: np.ndarray, rhs: np.ndarray) -> float:
    """Relative residual ||G V - E_tar|| / ||E_tar||."""
    norm = np.linalg.norm(rhs)
    if norm == 0:
        return float(np.linalg.norm(g.matrix @ voltages))
    return float(np.linalg.norm(g.matrix @ voltages - rhs) / norm)


def achieved_crosstalk_fidelity(
    g: GMatrix,
    voltages: np.ndarray,
    target: DriveTarget,
    averaging: Averaging = Averaging.EQUATOR,
) -> dict[int, float]:
    """Cross-talk fidelity at every non-target site for the achieved fields.

    The target pi-pulse duration cancels: only the residual-to-target Rabi
    ratio (equivalently, the transverse-field ratio) enters.
    """
    achieved = g.matrix @ voltages
    per_site = achieved.reshape(-1, 2)
    target_amp = max(
        math.hypot(*per_site[site]) for site in target.target_sites
    )
    if target_amp <= 0:
        raise ValidationError("target field amplitude is zero")
    out = {}
    for site in range(target.n_sites):
        if site in target.fields:
            continue
        residual_amp = math.hypot(*per_site[site])
        out[site] = crosstalk_fidelity(residual_amp, target_amp, averaging)
    return out


def stark_shift(e_nv, constants: PhysicalConstants) -> float:
    """DC Stark shift (Hz) of the optical transition for an NV-frame field.

    h * dnu = dmu_par * E_par - (sqrt(2)/2) * mu_perp * |E_perp|.
    """
    e_par, e_mu1, e_mu2 = (float(x) for x in e_nv)
    if not all(math.isfinite(x) for x in (e_par, e_mu1, e_mu2)):
        raise ValidationError("field components must be finite")
    e_perp = math.hypot(e_mu1, e_mu2)
    return (
        constants.delta_mu_par * e_par - (_SQRT2 / 2.0) * constants.mu_perp_opt * e_perp
    ) / constants.h


def shift_to_e_mu1(shift: float, constants: PhysicalConstants) -> float:
    """|E_mu1| producing a requested (negative-going) shift with E_par = E_mu2 = 0."""
    if shift > 0:
        raise ValidationError(
            f"requested shift {shift:.3g} Hz is positive; the perpendicular "
            "Stark term only shifts downward"
        )
    return -shift * constants.h * _SQRT2 / constants.mu_perp_opt


def allocate_channels(
    g3: GMatrix,
    plan: ChannelPlan,
    constants: PhysicalConstants,
    *,
    residual_tol: float = 0.01,
    voltage_limit: float | None = None,
    strict: bool = False,
) -> np.ndarray:
    """Antisymmetric (V_t = -V_b) voltages placing each site in its channel.

    The antisymmetric reduction nulls E_par and E_mu2; the remaining N
    degrees of freedom set each site's |E_mu1| to the value implied by its
    channel's Stark shift.
    """
    if g3.components is not Components.FULL3:
        raise ValidationError("channel allocation requires a Full3 G matrix")
    m = g3.matrix
    n_sites = m.shape[0] // 3
    if m.shape[1] != 2 * n_sites:
        raise ValidationError(
            f"expected {2 * n_sites} electrode columns (top/bottom), got {m.shape[1]}"
        )
    if set(plan.assignment) != set(range(n_sites)):
        raise ValidationError("channel plan must assign every site exactly once")

    shifts = np.array([plan.shift_for_site(k) for k in range(n_sites)])
    e_mu1_mag = np.array([shift_to_e_mu1(s, constants) for s in shifts])
    breakdown = min(constants.E_bd_diamond, constants.E_bd_hfo2)
    if np.max(e_mu1_mag, initial=0.0) > breakdown:
        raise NumericalError(
            f"infeasible plan: required field {np.max(e_mu1_mag):.3g} V/m "
            f"exceeds the breakdown bound {breakdown:.3g} V/m"
        )

    # antisymmetric reduction: u_k = V_top_k = -V_bottom_k
    reduced = m[:, 0::2] - m[:, 1::2]      # 3N x N
    m_mu1 = reduced[1::3, :]               # E_mu1 rows, N x N
    if np.linalg.cond(m_mu1) > MAX_CONDITION:
        raise NumericalError("reduced E_mu1 system is singular")
    u, *_ = np.linalg.lstsq(m_mu1, e_mu1_mag, rcond=None)
    u = u + np.linalg.lstsq(m_mu1, e_mu1_mag - m_mu1 @ u, rcond=None)[0]

    achieved = reduced @ u
    e_par, e_mu1, e_mu2 = achieved[0::3], achieved[1::3], achieved[2::3]
    ref = float(np.max(np.abs(e_mu1), initial=0.0))
    if ref > 0:
        worst = max(np.max(np.abs(e_par)), np.max(np.abs(e_mu2))) / ref
        if worst > residual_tol:
            raise NumericalError(
                f"zeroed components reach {worst:.3g} of |E_mu1|, above "
                f"tolerance {residual_tol}"
            )

    voltages = np.zeros(2 * n_sites)
    voltages[0::2] = u
    voltages[1::2] = -u
    _check_voltage_bound(voltages, voltage_limit, strict)
    return voltages


def achieved_shifts(g3: GMatrix, voltages: np.ndarray, constants: PhysicalConstants) -> np.ndarray:
    """Stark shift per site for a voltage pattern applied through a Full3 G."""
    achieved = (g3.matrix @ voltages).reshape(-1, 3)
    return np.array([stark_shift(row, constants) for row in achieved])
