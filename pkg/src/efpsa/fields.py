"""Quasi-static field distributions from electrode voltages.

Three sources of per-electrode unit-voltage responses:

* an analytic surrogate (finite lines of charge with first-order image
  screening from grounded neighbors, plus a fin-confinement transform),
* imported rectilinear field maps from an external electrostatics solver,
* reference magnetic geometries (Biot-Savart) for the localization
  scaling-law comparison.

All responses are linear in voltage and are superposed exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .device import DeviceGeometry, FrameTransform
from .errors import NumericalError, ValidationError

# Calibrated surrogate defaults: the electrode standoff and image strength are
# chosen so the single-pair drive reproduces the reported neighbor cross-talk
# levels of the fin and bare-electrode devices (see README).
DEFAULT_ELECTRODE_OFFSET = 0.18e-6   # m, electrode line distance from the NV row
DEFAULT_IMAGE_STRENGTH = 0.01        # induced-charge fraction on grounded neighbors
DEFAULT_FIN_CONFINEMENT = 1.7


def _line_charge_field(points: np.ndarray, x_half: float, y0: float, z0: float) -> np.ndarray:
    """Field of a uniform finite line charge along x at (y0, z0), unit total charge.

    Closed form, Coulomb constant dropped (absolute scale is applied by the
    caller's calibration).  ``points`` has shape (n, 3).
    """
    lam = 1.0 / (2.0 * x_half)
    u1 = -x_half - points[:, 0]
    u2 = x_half - points[:, 0]
    dy = points[:, 1] - y0
    dz = points[:, 2] - z0
    rho2 = dy * dy + dz * dz
    rho = np.sqrt(rho2)
    r1 = np.sqrt(u1 * u1 + rho2)
    r2 = np.sqrt(u2 * u2 + rho2)
    e_x = lam * (1.0 / r1 - 1.0 / r2)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_rho = lam / rho * (u2 / r2 - u1 / r1)
        frac_y = np.where(rho > 0, dy / rho, 0.0)
        frac_z = np.where(rho > 0, dz / rho, 0.0)
        e_rho = np.where(rho > 0, e_rho, 0.0)
    return np.stack([e_x, e_rho * frac_y, e_rho * frac_z], axis=1)


@dataclass
class FieldBasisSet:
    """Per-electrode unit-voltage field responses, V/m per volt."""

    responses: list[Callable[[np.ndarray], np.ndarray]]
    labels: list[str]
    provenance: str  # "surrogate" | "imported"

    @property
    def n_electrodes(self) -> int:
        return len(self.responses)

    def evaluate(self, electrode: int, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.responses[electrode](points)

    def superpose(self, voltages, points) -> np.ndarray:
        return superpose(self, voltages, points)


def superpose(basis: FieldBasisSet, voltages, points) -> np.ndarray:
    """Exact linear superposition sum_j V_j * basis_j(points), shape (n, 3)."""
    voltages = np.asarray(voltages, dtype=float)
    if voltages.shape != (basis.n_electrodes,):
        raise ValidationError(
            f"expected {basis.n_electrodes} voltages, got shape {voltages.shape}"
        )
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros((points.shape[0], 3))
    for v, resp in zip(voltages, basis.responses):
        if v != 0.0:
            total += v * resp(points)
    return total


def surrogate_basis(
    geometry: DeviceGeometry,
    fin_confinement: float = DEFAULT_FIN_CONFINEMENT,
    *,
    electrode_offset: float | None = None,
    image_strength: float = DEFAULT_IMAGE_STRENGTH,
) -> FieldBasisSet:
    """Analytic surrogate basis for the electrode array.

    Each electrode is a finite line of charge along x at its physical
    location.  Grounded nearest neighbors screen it with a single image
    charge of fractional strength ``image_strength``.  ``fin_confinement``
    multiplies the field on the fin axis and sharpens the lateral (x, z)
    decay by the same factor; 1.0 recovers the bare-electrode model.
    """
    if fin_confinement < 1.0:
        raise ValidationError("fin_confinement must be >= 1")
    if geometry.a <= 0:
        raise ValidationError("degenerate geometry: zero electrode spacing")
    d_e = DEFAULT_ELECTRODE_OFFSET if electrode_offset is None else electrode_offset
    a = geometry.a
    x_half = geometry.l_fin / 2.0
    n_sites = geometry.n_sites
    kappa = image_strength
    c = fin_confinement

    # Absolute calibration: a unit potential difference across one bare pair
    # produces 1/(2*d_e) V/m on its fin axis (parallel-plate scale).
    probe = np.array([[0.0, 0.0, 0.0]])
    raw = _line_charge_field(probe, x_half, +d_e, 0.0) * 0.5
    raw -= _line_charge_field(probe, x_half, -d_e, 0.0) * 0.5
    scale = (1.0 / (2.0 * d_e)) / np.linalg.norm(raw[0])

    def make_response(site: int, y0: float) -> Callable[[np.ndarray], np.ndarray]:
        z0 = site * a
        neighbors = [s for s in (site - 1, site + 1) if 0 <= s < n_sites]

        def response(points: np.ndarray) -> np.ndarray:
            # fin-confinement: evaluate at laterally stretched coordinates
            # about this electrode's fin axis, amplitude multiplied by c
            p = np.array(points, dtype=float, copy=True)
            p[:, 0] *= c
            p[:, 2] = z0 + c * (p[:, 2] - z0)
            e = _line_charge_field(p, x_half, y0, z0)
            for s in neighbors:
                e -= kappa * _line_charge_field(p, x_half, y0, s * a)
            return c * scale * e

        return response

    responses = []
    labels = []
    for k in range(n_sites):
        for side, y0 in (("t", +d_e), ("b", -d_e)):
            responses.append(make_response(k, y0))
            labels.append(f"e{k}{side}")
    return FieldBasisSet(responses=responses, labels=labels, provenance="surrogate")


# ---------------------------------------------------------------------------
# field-map import

_MAP_MAGIC = "# efpsa field map v1"


def write_field_map(path, label: str, axes: Sequence[np.ndarray], e_grid: np.ndarray) -> None:
    """Write a rectilinear unit-voltage field map (the documented format).

    ``e_grid`` has shape (nx, ny, nz, 3) in V/m per volt; rows of the CSV
    body run x-fastest.
    """
    x, y, z = (np.asarray(ax, dtype=float) for ax in axes)
    nx, ny, nz = len(x), len(y), len(z)
    if e_grid.shape != (nx, ny, nz, 3):
        raise ValidationError(f"grid shape {e_grid.shape} != ({nx}, {ny}, {nz}, 3)")
    lines = [
        _MAP_MAGIC,
        f"electrode: {label}",
        "units: V/m per V",
        f"nx: {nx}",
        f"ny: {ny}",
        f"nz: {nz}",
        "x_m: " + " ".join(f"{v:.12e}" for v in x),
        "y_m: " + " ".join(f"{v:.12e}" for v in y),
        "z_m: " + " ".join(f"{v:.12e}" for v in z),
        "data: csv",
    ]
    body = e_grid.transpose(2, 1, 0, 3).reshape(-1, 3)  # x index fastest
    for row in body:
        lines.append(f"{row[0]:.12e},{row[1]:.12e},{row[2]:.12e}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_map_file(path) -> tuple[str, list[np.ndarray], np.ndarray]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != _MAP_MAGIC:
        raise ValidationError(f"{path}: missing magic header line {_MAP_MAGIC!r}")
    header: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(text[1:], start=1):
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
        if key.strip() == "data":
            body_start = i + 1
            break
    for required in ("electrode", "units", "nx", "ny", "nz", "x_m", "y_m", "z_m", "data"):
        if required not in header:
            raise ValidationError(f"{path}: header is missing the {required!r} block")
    nx, ny, nz = (int(header[k]) for k in ("nx", "ny", "nz"))
    axes = []
    for name, n in (("x_m", nx), ("y_m", ny), ("z_m", nz)):
        ax = np.array([float(v) for v in header[name].split()])
        if len(ax) != n:
            raise ValidationError(f"{path}: axis {name} has {len(ax)} values, expected {n}")
        if not np.all(np.diff(ax) > 0):
            raise ValidationError(f"{path}: axis {name} is not strictly increasing")
        axes.append(ax)
    n_rows = nx * ny * nz
    rows = text[body_start : body_start + n_rows]
    if len(rows) < n_rows:
        raise ValidationError(
            f"{path}: data block truncated, got {len(rows)} of {n_rows} rows"
        )
    data = np.array([[float(v) for v in row.split(",")] for row in rows])
    if data.shape != (n_rows, 3):
        raise ValidationError(f"{path}: data rows must have 3 columns")
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: data block contains NaN or infinite values")
    e_grid = data.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)
    return header["electrode"], axes, e_grid


def import_field_map(paths) -> FieldBasisSet:
    """Load per-electrode unit-voltage responses from field-map files.

    One file per electrode; queries use trilinear interpolation and error
    outside the grid hull.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    responses = []
    labels = []
    for path in paths:
        label, axes, e_grid = _parse_map_file(path)
        interp = RegularGridInterpolator(
            tuple(axes), e_grid, method="linear", bounds_error=True
        )

        def response(points: np.ndarray, _interp=interp, _path=str(path)) -> np.ndarray:
            try:
                return _interp(points)
            except ValueError as exc:
                raise ValidationError(f"{_path}: query outside the field-map hull") from exc

        responses.append(response)
        labels.append(label)
    return FieldBasisSet(responses=responses, labels=labels, provenance="imported")


# ---------------------------------------------------------------------------
# linear response matrix

class Components(enum.Enum):
    PERP2 = "perp2"   # rows (E_mu1, E_mu2) per site
    FULL3 = "full3"   # rows (E_par, E_mu1, E_mu2) per site


@dataclass
class GMatrix:
    """Linear map E = G * V from electrode voltages to NV-frame components."""

    matrix: np.ndarray
    row_labels: list[str]
    col_labels: list[str]
    components: Components
    condition_number: float = field(init=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise NumericalError("G matrix contains non-finite entries")
        s = np.linalg.svd(self.matrix, compute_uv=False)
        smin = s[min(self.matrix.shape) - 1]
        self.condition_number = float(s[0] / smin) if smin > 0 else math.inf


def assemble_g(
    basis: FieldBasisSet,
    nv_positions: np.ndarray,
    components: Components = Components.PERP2,
    frame: FrameTransform | None = None,
) -> GMatrix:
    """Assemble G by projecting each electrode's response at every NV site."""
    frame = frame or FrameTransform()
    nv_positions = np.atleast_2d(np.asarray(nv_positions, dtype=float))
    n_sites = nv_positions.shape[0]
    comp_rows = (1, 2) if components is Components.PERP2 else (0, 1, 2)
    comp_names = {0: "par", 1: "mu1", 2: "mu2"}
    matrix = np.zeros((len(comp_rows) * n_sites, basis.n_electrodes))
    for j in range(basis.n_electrodes):
        e_lab = basis.evaluate(j, nv_positions)
        e_nv = frame.lab_to_nv_many(e_lab)  # columns (par, mu1, mu2)
        for i, comp in enumerate(comp_rows):
            matrix[i :: len(comp_rows), j] = e_nv[:, comp]
    row_labels = [
        f"s{k}:{comp_names[comp]}" for k in range(n_sites) for comp in comp_rows
    ]
    return GMatrix(
        matrix=matrix,
        row_labels=row_labels,
        col_labels=list(basis.labels),
        components=components,
    )


# ---------------------------------------------------------------------------
# reference geometries for the field-localization scaling laws

class ProfileKind(enum.Enum):
    SINGLE_LINE = "single-line"
    TWO_LINES = "two-lines"
    LOOP = "loop"
    LOOP_WITH_FEEDS = "loop-with-feeds"
    ELECTRODE_PAIR = "electrode-pair"
    EFPSA_ARRAY = "efpsa-array"


_STANDOFF = 250e-9       # m, NV to nearest structure, all geometries
_NORM_R = 500e-9         # m, normalization distance
_WIRE_HALF = 5e-3        # m, half-length of straight reference wires
_FEED_GAP = 500e-9       # m, separation of the loop feed pair


def _segment_b(points: np.ndarray, a: np.ndarray, b: np.ndarray, current: float) -> np.ndarray:
    """Exact Biot-Savart field of a straight segment (mu0*I/4pi dropped)."""
    u = b - a
    length = np.linalg.norm(u)
    u = u / length
    rel = points - a
    t = rel @ u
    closest = a + np.outer(t, u)
    rvec = points - closest
    rho = np.linalg.norm(rvec, axis=1)
    s1 = -t
    s2 = length - t
    with np.errstate(invalid="ignore", divide="ignore"):
        mag = (s2 / np.sqrt(s2 * s2 + rho * rho) - s1 / np.sqrt(s1 * s1 + rho * rho)) / rho
        direction = np.cross(np.tile(u, (len(points), 1)), rvec / rho[:, None])
    out = current * mag[:, None] * direction
    out[rho == 0] = 0.0
    return out


def _magnetic_field(kind: ProfileKind, points: np.ndarray) -> np.ndarray:
    s = _STANDOFF
    if kind is ProfileKind.SINGLE_LINE:
        # wire along x through the origin; profile distance is from the wire
        return _segment_b(points, np.array([-_WIRE_HALF, 0, 0]), np.array([_WIRE_HALF, 0, 0]), 1.0)
    if kind is ProfileKind.TWO_LINES:
        b = _segment_b(points, np.array([-_WIRE_HALF, s, 0]), np.array([_WIRE_HALF, s, 0]), 1.0)
        b += _segment_b(points, np.array([-_WIRE_HALF, -s, 0]), np.array([_WIRE_HALF, -s, 0]), -1.0)
        return b
    if kind in (ProfileKind.LOOP, ProfileKind.LOOP_WITH_FEEDS):
        n_seg = 720
        phi = np.linspace(0.0, 2.0 * math.pi, n_seg + 1)
        ring = np.stack([s * np.cos(phi), s * np.sin(phi), np.zeros_like(phi)], axis=1)
        b = np.zeros_like(points)
        for i in range(n_seg):
            b += _segment_b(points, ring[i], ring[i + 1], 1.0)
        if kind is ProfileKind.LOOP_WITH_FEEDS:
            g = _FEED_GAP / 2.0
            far = s + _WIRE_HALF
            b += _segment_b(points, np.array([g, far, 0.0]), np.array([g, s, 0.0]), 1.0)
            b += _segment_b(points, np.array([-g, s, 0.0]), np.array([-g, far, 0.0]), 1.0)
        return b
    raise ValidationError(f"not a magnetic profile kind: {kind}")


def appendix_c_profile(kind: ProfileKind, r) -> np.ndarray:
    """Normalized field-magnitude profile at distance(s) ``r`` from the structure.

    Magnetic kinds use exact Biot-Savart for straight segments and a fine
    polygonal loop; electric kinds use the surrogate basis with the common
    250 nm standoff.  Profiles are normalized to 1 at r = 500 nm.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 50e-9):
        raise ValidationError("profile distance must be >= 50 nm")
    query = np.concatenate([r, [_NORM_R]])
    points = np.zeros((len(query), 3))
    points[:, 2] = query

    if kind in (ProfileKind.ELECTRODE_PAIR, ProfileKind.EFPSA_ARRAY):
        n_sites = 1 if kind is ProfileKind.ELECTRODE_PAIR else 11
        geometry = DeviceGeometry(n_sites=n_sites)
        basis = surrogate_basis(
            geometry, fin_confinement=1.0, electrode_offset=_STANDOFF
        )
        center = n_sites // 2
        voltages = np.zeros(basis.n_electrodes)
        voltages[2 * center] = +0.5
        voltages[2 * center + 1] = -0.5
        pts = points.copy()
        pts[:, 2] += center * geometry.a
        mag = np.linalg.norm(superpose(basis, voltages, pts), axis=1)
    else:
        mag = np.linalg.norm(_magnetic_field(kind, points), axis=1)
    return mag[:-1] / mag[-1]


def loglog_slope(r: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of log(value) versus log(r)."""
    return float(np.polyfit(np.log(r), np.log(values), 1)[0])
