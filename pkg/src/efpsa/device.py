"""Device registry: physical constants, geometry, coordinate frames, config loading.

Every other module reads parameters only through :class:`DeviceModel`.

Note on the spin-electric susceptibilities: several published numbers assign
0.35 Hz cm/V to the transverse coupling and 17 Hz cm/V to the parallel one,
but the transition rates this toolkit must reproduce (1.7 MHz double-quantum
Rabi at 1e7 V/m, ~0.1 GHz at breakdown) are only consistent with the reverse
assignment.  We therefore default to d_perp = 17 Hz cm/V and
d_par = 0.35 Hz cm/V; both are overridable from the config.
"""

from __future__ import annotations

import math
import sys
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

DEBYE = 3.33564e-30  # C*m per Debye

# Susceptibilities are stored in SI (Hz per V/m); 1 Hz cm/V = 1e-2 Hz m/V.
_HZ_CM_PER_V = 1e-2


@dataclass(frozen=True)
class PhysicalConstants:
    """Spin, optical and material constants, all SI."""

    d_perp: float = 17.0 * _HZ_CM_PER_V        # Hz/(V/m), |+1> <-> |-1> drive
    d_par: float = 0.35 * _HZ_CM_PER_V         # Hz/(V/m), axial shift
    d_perp_prime: float = 17.0 / 50.0 * _HZ_CM_PER_V  # Hz/(V/m), |+-1> <-> |0> drive
    gamma: float = 2.8e10                      # Hz/T electron gyromagnetic ratio
    mu0: float = 1.25663706212e-6              # T*m/A
    h: float = 6.62607015e-34                  # J*s
    delta_mu_par: float = 1.5 * DEBYE          # C*m, parallel optical dipole difference
    mu_perp_opt: float = 2.1 * DEBYE           # C*m, perpendicular optical dipole
    T2_star: float = 10e-6                     # s
    DW: float = 0.03                           # Debye-Waller factor
    E_bd_diamond: float = 2e9                  # V/m
    E_bd_hfo2: float = 1.6e9                   # V/m

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"constant {name} must be strictly positive, got {value}")
        if self.d_perp_prime > self.d_perp:
            raise ValidationError(
                f"d_perp_prime ({self.d_perp_prime}) must not exceed d_perp ({self.d_perp})"
            )


@dataclass(frozen=True)
class DeviceGeometry:
    """Electrode/waveguide geometry and NV site layout, all lengths in meters."""

    a: float = 0.183e-6          # electrode spacing
    h_wg: float = 0.364e-6       # diamond waveguide thickness
    w_wg: float = 0.091e-6       # diamond waveguide width
    l_fin: float = 0.500e-6      # fin length
    w_fin: float = 0.091e-6      # fin width
    h_fin: float = 0.273e-6      # fin thickness
    n_sites: int = 10
    nv_displacements: np.ndarray | None = None  # (n_sites, 3) per-site offsets
    nv_axis: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
    )

    def __post_init__(self):
        for name in ("a", "h_wg", "w_wg", "l_fin", "w_fin", "h_fin"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"dimension {name} must be strictly positive, got {value}")
        if self.n_sites < 1:
            raise ValidationError(f"n_sites must be >= 1, got {self.n_sites}")
        if self.nv_displacements is not None:
            disp = np.asarray(self.nv_displacements, dtype=float)
            if disp.shape != (self.n_sites, 3):
                raise ValidationError(
                    f"nv_displacements must have shape ({self.n_sites}, 3), got {disp.shape}"
                )
            worst = np.max(np.linalg.norm(disp, axis=1)) / self.a
            if worst > 0.25:
                warnings.warn(
                    f"NV displacement reaches {worst:.2f} of the electrode spacing; "
                    "the small-displacement assumption is questionable",
                    stacklevel=2,
                )
            object.__setattr__(self, "nv_displacements", disp)
        axis = np.asarray(self.nv_axis, dtype=float)
        object.__setattr__(self, "nv_axis", axis / np.linalg.norm(axis))

    @property
    def nv_positions(self) -> np.ndarray:
        """Site positions k*a*z_hat plus per-site displacements, shape (n_sites, 3)."""
        pos = np.zeros((self.n_sites, 3))
        pos[:, 2] = self.a * np.arange(self.n_sites)
        if self.nv_displacements is not None:
            pos = pos + self.nv_displacements
        return pos


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class FrameTransform:
    """Orthonormal transform between the lab frame and the NV frame.

    Lab basis (crystal indices): x=[001], y=[-110], z=[110].
    NV basis: z'=[111], mu1=[1-10], mu2 = z' x mu1 = [-1-12]/sqrt(6).

    The mu2 direction completes a right-handed orthonormal triad; the
    crystallographic label often quoted for the second transition dipole is
    not orthogonal to [111] and is normalized here.
    """

    def __init__(self):
        self.lab_basis = np.array([_unit([0, 0, 1]), _unit([-1, 1, 0]), _unit([1, 1, 0])])
        z_nv = _unit([1, 1, 1])
        mu1 = _unit([1, -1, 0])
        mu2 = np.cross(z_nv, mu1)
        self.nv_basis = np.array([z_nv, mu1, mu2])
        # rows: (par, mu1, mu2); columns: lab (x, y, z) components
        self.matrix = self.nv_basis @ self.lab_basis.T

    def lab_to_nv(self, e_lab) -> tuple[float, float, float]:
        """Project a lab-frame vector onto (parallel, mu1, mu2) NV components."""
        e_lab = np.asarray(e_lab, dtype=float)
        if not np.all(np.isfinite(e_lab)):
            raise ValidationError("field components must be finite")
        e_par, e_mu1, e_mu2 = self.matrix @ e_lab
        return float(e_par), float(e_mu1), float(e_mu2)

    def nv_to_lab(self, e_nv) -> np.ndarray:
        """Inverse of :meth:`lab_to_nv`; the transform is orthogonal."""
        return self.matrix.T @ np.asarray(e_nv, dtype=float)

    def lab_to_nv_many(self, e_lab: np.ndarray) -> np.ndarray:
        """Vectorized projection, (n, 3) lab vectors -> (n, 3) NV components."""
        return np.asarray(e_lab, dtype=float) @ self.matrix.T


@dataclass(frozen=True)
class DeviceModel:
    """Immutable bundle of constants, geometry and frame; safe to share."""

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    geometry: DeviceGeometry = field(default_factory=DeviceGeometry)
    frame: FrameTransform = field(default_factory=FrameTransform)

    def lab_to_nv(self, e_lab):
        return self.frame.lab_to_nv(e_lab)

    def nv_to_lab(self, e_nv):
        return self.frame.nv_to_lab(e_nv)


_CONSTANT_KEYS = set(PhysicalConstants.__dataclass_fields__)
_GEOMETRY_KEYS = {"a", "h_wg", "w_wg", "l_fin", "w_fin", "h_fin", "n_sites",
                  "nv_displacements", "nv_axis"}


def load_device(config_text: str = "") -> DeviceModel:
    """Build a DeviceModel from a flat key/value config (TOML syntax, SI units).

    Unknown keys are rejected; omitted keys fall back to the defaults above.
    """
    try:
        data = _toml.loads(config_text)
    except _toml.TOMLDecodeError as exc:
        raise ValidationError(f"config parse failure: {exc}") from exc

    unknown = set(data) - _CONSTANT_KEYS - _GEOMETRY_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")

    const_kwargs = {k: data[k] for k in data if k in _CONSTANT_KEYS}
    geom_kwargs = {k: data[k] for k in data if k in _GEOMETRY_KEYS}
    if "nv_displacements" in geom_kwargs:
        geom_kwargs["nv_displacements"] = np.asarray(geom_kwargs["nv_displacements"], dtype=float)
    if "nv_axis" in geom_kwargs:
        geom_kwargs["nv_axis"] = np.asarray(geom_kwargs["nv_axis"], dtype=float)

    constants = PhysicalConstants(**const_kwargs)
    geometry = DeviceGeometry(**geom_kwargs)
    return DeviceModel(constants=constants, geometry=geometry)


def with_overrides(model: DeviceModel, **kwargs) -> DeviceModel:
    """Return a copy of ``model`` with selected geometry/constant fields replaced."""
    const_kwargs = {k: v for k, v in kwargs.items() if k in _CONSTANT_KEYS}
    geom_kwargs = {k: v for k, v in kwargs.items() if k in _GEOMETRY_KEYS}
    constants = replace(model.constants, **const_kwargs) if const_kwargs else model.constants
    geometry = replace(model.geometry, **geom_kwargs) if geom_kwargs else model.geometry
    return DeviceModel(constants=constants, geometry=geometry, frame=model.frame)
