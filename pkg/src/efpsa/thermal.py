"""Lumped-circuit cryogenic heat-load model for electric- versus
magnetic-field spin control.

The device is a capacitor C with parallel leakage R behind a wire
resistance R_w at the end of a short transmission line.  The wire
capacitance C_w is carried for validation only: it is omitted from the
computed impedance because R_w << 1/(omega*C_w) in the regime of interest,
and a warning fires when that stops holding.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .device import PhysicalConstants
from .errors import ValidationError


@dataclass(frozen=True)
class CircuitParams:
    C: float = 2.8e-17    # F, device capacitance
    R: float = 1e20       # ohm, parallel leakage resistance
    R_w: float = 1e-2     # ohm, wire resistance
    C_w: float = 1e-15    # F, wire capacitance (validation only)
    Z0: float = 50.0      # ohm, line impedance
    Lambda: float = 1e-6  # m, voltage-to-field characteristic length
    l1: float = 1.0       # m, room-temperature line length
    l2: float = 1e-3      # m, low-temperature line length

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValidationError(f"circuit parameter {name} must be positive")


def device_impedance(p: CircuitParams, omega: float) -> complex:
    """Z_C = R(1 - j*omega*C*R)/(1 + omega^2 C^2 R^2) + R_w."""
    if omega <= 0:
        raise ValidationError("omega must be positive")
    wcr = omega * p.C * p.R
    if p.R_w * omega * p.C_w > 0.1:
        warnings.warn(
            "R_w << 1/(omega*C_w) no longer holds; the omitted wire "
            "capacitance is not negligible",
            stacklevel=2,
        )
    return p.R * (1.0 - 1j * wcr) / (1.0 + wcr * wcr) + p.R_w


def efpsa_impedance(p: CircuitParams, omega: float, signal_velocity: float = 2e8) -> complex:
    """Low-temperature impedance seen through the length-l2 line segment.

    Short-line limit: Z_LT -> Z_C; a warning fires when beta*l2 is not small.
    """
    z_c = device_impedance(p, omega)
    beta = omega / signal_velocity
    if beta * p.l2 > 0.1:
        warnings.warn(f"beta*l2 = {beta * p.l2:.3g} is not small", stacklevel=2)
    t = cmath.tan(beta * p.l2 + 0j)
    return p.Z0 * (z_c + 1j * p.Z0 * t) / (p.Z0 + 1j * z_c * t)


def voltage_at_device(p: CircuitParams, u_source: float, omega: float) -> complex:
    """Potential across the near-open device: U_e = 2 Z_C U / (Z_C + Z0)."""
    z_c = device_impedance(p, omega)
    return 2.0 * z_c * u_source / (z_c + p.Z0)


def drive_voltage(p: CircuitParams, omega_r: float, d_perp: float) -> float:
    """Device voltage needed for Rabi frequency omega_r: U_e = Omega_R*Lambda/d_perp."""
    return omega_r * p.Lambda / d_perp


def heat_electric(p: CircuitParams, omega_r: float, omega: float, d_perp: float) -> float:
    """Energy per pi-pulse dissipated at the cold stage, electric drive.

    J_E = (1 + omega^2 C^2 R_w R)/R * Lambda^2 Omega_R / (2 d_perp^2).
    """
    if omega_r <= 0:
        raise ValidationError("omega_r must be positive")
    factor = (1.0 + omega**2 * p.C**2 * p.R_w * p.R) / p.R
    return factor * p.Lambda**2 * omega_r / (2.0 * d_perp**2)


def heat_magnetic(p: CircuitParams, omega_r: float, d: float, gamma: float) -> float:
    """Energy per pi-pulse for wire-based magnetic drive at distance d.

    J_B = 2 pi^2 / (mu0^2 gamma^2) * d^2 R_w Omega_R.
    """
    mu0 = 1.25663706212e-6
    return 2.0 * math.pi**2 / (mu0**2 * gamma**2) * d**2 * p.R_w * omega_r


def dissipation_ratio(p: CircuitParams, omega: float, d_perp: float, gamma: float) -> float:
    """J_E/J_B with the characteristic length equal to the wire distance.

    mu0^2 gamma^2/(4 pi^2 d_perp^2) * (1 + omega^2 C^2 R_w R)/(R_w R).
    """
    mu0 = 1.25663706212e-6
    return (
        mu0**2 * gamma**2 / (4.0 * math.pi**2 * d_perp**2)
        * (1.0 + omega**2 * p.C**2 * p.R_w * p.R) / (p.R_w * p.R)
    )


def heat_sweep(
    p: CircuitParams,
    omega_r: float,
    constants: PhysicalConstants,
    omegas: np.ndarray,
    transition: str = "plus_minus",
) -> dict[str, np.ndarray]:
    """Sweep table of J_E, J_B and their ratio over drive frequencies.

    The single-quantum transition substitutes d_perp'/sqrt(2) for d_perp;
    that substitution is the only change.
    """
    if transition == "plus_minus":
        d_eff = constants.d_perp
    elif transition == "single_quantum":
        d_eff = constants.d_perp_prime / math.sqrt(2.0)
    else:
        raise ValidationError(f"unknown transition {transition!r}")
    omegas = np.asarray(omegas, dtype=float)
    j_e = np.array([heat_electric(p, omega_r, w, d_eff) for w in omegas])
    j_b = heat_magnetic(p, omega_r, p.Lambda, constants.gamma)
    ratio = np.array(
        [dissipation_ratio(p, w, d_eff, constants.gamma) for w in omegas]
    )
    return {
        "omega_rad_s": omegas,
        "J_E_joule": j_e,
        "J_B_joule": np.full_like(omegas, j_b),
        "ratio": ratio,
    }
