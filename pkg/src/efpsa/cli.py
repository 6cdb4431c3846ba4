"""Command-line front end: figure-data reproduction, parameter sweeps,
config/field-map ingestion, CSV emission with embedded run manifests, and
figure rendering alongside the delimited output.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.  Failures
print a single machine-parsable line ``error: <class>: <message>``.
"""

from __future__ import annotations

import functools
import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import control, fields, repeater, thermal
from .device import DeviceModel, load_device
from .errors import NumericalError, ValidationError
from .manifest import RunManifest, write_csv
from .optics import OpticalInterface
from .spin import Averaging, average_gate_fidelity, dephasing_pi_fidelity

_PROFILE_KINDS = {k.value: k for k in fields.ProfileKind}
_EXPECTED_SLOPES = {
    "single-line": -1.0,
    "two-lines": -2.0,
    "loop": -3.0,
    "loop-with-feeds": -2.0,
    "electrode-pair": -3.0,
    "efpsa-array": -3.0,
}


def _cap_threads() -> None:
    cap = os.environ.get("EFPSA_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: validation: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"error: numerical: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _parse_sweep(spec: str, default_points: int) -> tuple[float, float, int]:
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ValidationError(f"sweep must be 'lo:hi' or 'lo:hi:points', got {spec!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        n = int(parts[2]) if len(parts) == 3 else default_points
    except ValueError as exc:
        raise ValidationError(f"bad sweep {spec!r}: {exc}") from exc
    if not 0 < lo < hi:
        raise ValidationError(f"sweep bounds must satisfy 0 < lo < hi, got {spec!r}")
    if n < 2:
        raise ValidationError("sweep needs at least 2 points")
    return lo, hi, n


class _Ctx:
    """Resolved global options shared by the subcommands."""

    def __init__(self, config, gmatrix, field_map, out, seed, strict, no_plots):
        self.config_path = config
        self.gmatrix_path = gmatrix
        self.field_map_paths = list(field_map)
        self.out_dir = Path(out)
        self.seed = seed
        self.strict = strict
        self.no_plots = no_plots

    def model(self, manifest: RunManifest) -> DeviceModel:
        if self.config_path is None:
            return load_device()
        manifest.add_input("config", self.config_path)
        return load_device(Path(self.config_path).read_text())

    def basis(self, model: DeviceModel, manifest: RunManifest) -> fields.FieldBasisSet:
        if self.field_map_paths:
            for p in self.field_map_paths:
                manifest.add_input(Path(p).name, p)
            return fields.import_field_map(self.field_map_paths)
        return fields.surrogate_basis(model.geometry)

    def manifest(self, subcommand: str, parameters: dict) -> RunManifest:
        return RunManifest(subcommand=subcommand, parameters=parameters, seed=self.seed)

    def emit(self, manifest, name, columns, rows) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(self.out_dir / name, manifest, columns, rows)

    def figure(self, name, series, **kwargs) -> None:
        if self.no_plots:
            return
        from .plotting import line_figure

        self.out_dir.mkdir(parents=True, exist_ok=True)
        line_figure(self.out_dir / name, series, **kwargs)


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="Device config file (flat TOML, SI units).")
@click.option("--gmatrix", type=click.Path(exists=True), default=None,
              help="Previously exported G-matrix CSV.")
@click.option("--field-map", type=click.Path(exists=True), multiple=True,
              help="Imported field-map file (repeatable, one per electrode).")
@click.option("--out", type=click.Path(), default=".", help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict", is_flag=True, help="Escalate advisory bounds to errors.")
@click.option("--no-plots", is_flag=True, help="Skip figure rendering.")
@click.version_option(package_name="efpsa")
@click.pass_context
def main(ctx, config, gmatrix, field_map, out, seed, strict, no_plots):
    """Design-evaluation toolkit for electrode-programmed spin arrays."""
    _cap_threads()
    ctx.obj = _Ctx(config, gmatrix, field_map, out, seed, strict, no_plots)


# ---------------------------------------------------------------------------
# G-matrix persistence (delimited, so reruns stay byte-identical)

def _save_gmatrix_csv(ctx: _Ctx, manifest: RunManifest, name: str, g: fields.GMatrix):
    columns = ["row_label"] + list(g.col_labels)
    rows = [[label] + [float(v) for v in g.matrix[i]]
            for i, label in enumerate(g.row_labels)]
    manifest.parameters["components"] = g.components.value
    manifest.parameters["condition_number"] = g.condition_number
    ctx.emit(manifest, name, columns, rows)


def _load_gmatrix_csv(path) -> fields.GMatrix:
    components = None
    header = None
    data = []
    row_labels = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if line.startswith("# param.components:"):
                components = line.split(":", 1)[1].strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        cells = line.split(",")
        row_labels.append(cells[0])
        data.append([float(c) for c in cells[1:]])
    if header is None or not data:
        raise ValidationError(f"{path}: not a G-matrix CSV")
    if components is None:
        raise ValidationError(f"{path}: missing '# param.components' header")
    return fields.GMatrix(
        matrix=np.array(data),
        row_labels=row_labels,
        col_labels=header[1:],
        components=fields.Components(components),
    )


def _resolve_gmatrix(ctx: _Ctx, manifest: RunManifest, model: DeviceModel,
                     components: fields.Components) -> fields.GMatrix:
    if ctx.gmatrix_path is not None:
        manifest.add_input("gmatrix", ctx.gmatrix_path)
        g = _load_gmatrix_csv(ctx.gmatrix_path)
        if g.components is not components:
            raise ValidationError(
                f"G matrix has components {g.components.value!r}, "
                f"this operation needs {components.value!r}"
            )
        return g
    basis = ctx.basis(model, manifest)
    return fields.assemble_g(basis, model.geometry.nv_positions, components, model.frame)


def _breakdown_voltage_limit(basis: fields.FieldBasisSet, model: DeviceModel) -> float:
    """Voltage above which the strongest basis response exceeds the weaker of
    the two material breakdown fields near any electrode surface."""
    c = model.constants
    geometry = model.geometry
    breakdown = min(c.E_bd_diamond, c.E_bd_hfo2)
    probes = []
    for k in range(geometry.n_sites):
        for y in (+20e-9, -20e-9):
            probes.append([0.0, fields.DEFAULT_ELECTRODE_OFFSET + y, k * geometry.a])
            probes.append([0.0, -fields.DEFAULT_ELECTRODE_OFFSET + y, k * geometry.a])
    probes = np.array(probes)
    per_volt = max(
        float(np.max(np.linalg.norm(basis.evaluate(j, probes), axis=1)))
        for j in range(basis.n_electrodes)
    )
    return breakdown / per_volt


# ---------------------------------------------------------------------------
# subcommands

@main.command("gate-fidelity")
@click.option("--omega-sweep", default="1e5:1e7", show_default=True,
              help="Rabi-frequency sweep in Hz, 'lo:hi[:points]' (log-spaced).")
@click.option("--points", type=int, default=25, show_default=True)
@click.option("--samples", type=int, default=100_000, show_default=True)
@click.pass_obj
@_handled
def cmd_gate_fidelity(ctx: _Ctx, omega_sweep, points, samples):
    """Pi-pulse fidelity under dephasing versus Rabi frequency."""
    lo, hi, n = _parse_sweep(omega_sweep, points)
    manifest = ctx.manifest("gate-fidelity", {
        "omega_sweep_hz": omega_sweep, "points": n, "samples": samples,
    })
    model = ctx.model(manifest)
    t2 = model.constants.T2_star
    manifest.parameters["t2_star_s"] = t2
    manifest.outputs = ["gate_fidelity.csv"] + ([] if ctx.no_plots else ["gate_fidelity.png"])
    omegas = np.logspace(math.log10(lo), math.log10(hi), n)
    rows = [
        [w, dephasing_pi_fidelity(w, t2), average_gate_fidelity(w, t2, samples, ctx.seed)]
        for w in omegas
    ]
    ctx.emit(manifest, "gate_fidelity.csv",
             ["omega_rabi_hz", "fidelity_equator", "fidelity_haar_avg"], rows)
    arr = np.array(rows)
    ctx.figure("gate_fidelity.png",
               [("equator", arr[:, 0], arr[:, 1]), ("Haar average", arr[:, 0], arr[:, 2])],
               xlabel="Rabi frequency (Hz)", ylabel="pi-pulse fidelity",
               title="Gate fidelity vs drive strength", logx=True)


@main.command("field-profile")
@click.option("--kind", required=True,
              type=click.Choice(sorted(_PROFILE_KINDS) + ["all"]))
@click.option("--rmin", type=float, default=0.5e-6, show_default=True, help="m")
@click.option("--rmax", type=float, default=50e-6, show_default=True, help="m")
@click.option("--points", type=int, default=60, show_default=True)
@click.pass_obj
@_handled
def cmd_field_profile(ctx: _Ctx, kind, rmin, rmax, points):
    """Normalized far-field localization profile for a reference structure."""
    if not 0 < rmin < rmax:
        raise ValidationError("need 0 < rmin < rmax")
    kinds = sorted(_PROFILE_KINDS) if kind == "all" else [kind]
    manifest = ctx.manifest("field-profile", {
        "kind": kind, "rmin_m": rmin, "rmax_m": rmax, "points": points,
    })
    manifest.outputs = ["field_profile.csv"] + ([] if ctx.no_plots else ["field_profile.png"])
    r = np.logspace(math.log10(rmin), math.log10(rmax), points)
    profiles = {k: fields.appendix_c_profile(_PROFILE_KINDS[k], r) for k in kinds}
    columns = ["r_m"] + [f"{k}_norm" for k in kinds]
    rows = [[r[i]] + [float(profiles[k][i]) for k in kinds] for i in range(len(r))]
    ctx.emit(manifest, "field_profile.csv", columns, rows)
    ctx.figure("field_profile.png",
               [(k, r, profiles[k]) for k in kinds],
               xlabel="distance (m)", ylabel="field magnitude (normalized at 500 nm)",
               title="Field localization", logx=True, logy=True)


@main.command("export-map")
@click.option("--electrode", default=None,
              help="Electrode label (e.g. e5t); default exports all.")
@click.option("--grid", default="9:5:41", show_default=True,
              help="nx:ny:nz sample counts over the array bounding box.")
@click.pass_obj
@_handled
def cmd_export_map(ctx: _Ctx, electrode, grid):
    """Sample the surrogate basis onto a grid and write field-map files."""
    try:
        nx, ny, nz = (int(v) for v in grid.split(":"))
    except ValueError as exc:
        raise ValidationError(f"bad grid {grid!r}: {exc}") from exc
    manifest = ctx.manifest("export-map", {"electrode": electrode or "all", "grid": grid})
    model = ctx.model(manifest)
    geometry = model.geometry
    basis = fields.surrogate_basis(geometry)
    labels = basis.labels if electrode is None else [electrode]
    if electrode is not None and electrode not in basis.labels:
        raise ValidationError(f"unknown electrode {electrode!r}")
    a = geometry.a
    axes = [
        np.linspace(-geometry.l_fin, geometry.l_fin, nx),
        np.linspace(-0.1e-6, 0.1e-6, ny),
        np.linspace(-a, geometry.n_sites * a, nz),
    ]
    xs, ys, zs = np.meshgrid(*axes, indexing="ij")
    points = np.column_stack([xs.ravel(order="F"), ys.ravel(order="F"), zs.ravel(order="F")])
    manifest.outputs = [f"map_{label}.txt" for label in labels]
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    for label in labels:
        e = basis.evaluate(basis.labels.index(label), points)
        grid_e = e.reshape(nx, ny, nz, 3, order="F")
        fields.write_field_map(ctx.out_dir / f"map_{label}.txt", label, axes, grid_e)
    click.echo(f"wrote {len(labels)} field map(s) to {ctx.out_dir}")


@main.command("gmatrix")
@click.option("--components", "comp", default="perp2", show_default=True,
              type=click.Choice(["perp2", "full3"]))
@click.pass_obj
@_handled
def cmd_gmatrix(ctx: _Ctx, comp):
    """Assemble the voltage-to-field response matrix and export it as CSV."""
    components = fields.Components(comp)
    manifest = ctx.manifest("gmatrix", {})
    model = ctx.model(manifest)
    basis = ctx.basis(model, manifest)
    g = fields.assemble_g(basis, model.geometry.nv_positions, components, model.frame)
    manifest.outputs = ["gmatrix.csv"]
    _save_gmatrix_csv(ctx, manifest, "gmatrix.csv", g)
    click.echo(f"condition number: {g.condition_number:.6g}")


@main.command("synthesize")
@click.option("--target", "target_path", type=click.Path(exists=True), default=None,
              help="JSON drive target: {\"n_sites\": N, \"fields\": {site: [E_mu1, E_mu2]}}.")
@click.option("--channels", "channels_path", type=click.Path(exists=True), default=None,
              help="JSON channel plan: {site: channel_name}.")
@click.pass_obj
@_handled
def cmd_synthesize(ctx: _Ctx, target_path, channels_path):
    """Solve for electrode voltages: AC drive targets or Stark channel plans."""
    if (target_path is None) == (channels_path is None):
        raise ValidationError("exactly one of --target / --channels is required")
    manifest = ctx.manifest("synthesize", {})
    model = ctx.model(manifest)
    basis = ctx.basis(model, manifest)
    limit = _breakdown_voltage_limit(basis, model)
    manifest.parameters["voltage_limit_v"] = limit

    if target_path is not None:
        manifest.add_input("target", target_path)
        spec = json.loads(Path(target_path).read_text())
        try:
            target = control.DriveTarget(
                n_sites=int(spec["n_sites"]),
                fields={int(k): (float(v[0]), float(v[1]))
                        for k, v in spec["fields"].items()},
            )
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise ValidationError(f"bad drive-target JSON: {exc}") from exc
        g = _resolve_gmatrix(ctx, manifest, model, fields.Components.PERP2)
        v = control.eliminate_crosstalk(g, target, voltage_limit=limit, strict=ctx.strict)
        residual = control.solution_residual(g, v, target.rhs())
        fid = control.achieved_crosstalk_fidelity(g, v, target)
        manifest.parameters["mode"] = "drive-target"
    else:
        manifest.add_input("channels", channels_path)
        raw = json.loads(Path(channels_path).read_text())
        plan = control.ChannelPlan(assignment={int(k): str(v) for k, v in raw.items()})
        g = _resolve_gmatrix(ctx, manifest, model, fields.Components.FULL3)
        v = control.allocate_channels(g, plan, model.constants,
                                      voltage_limit=limit, strict=ctx.strict)
        shifts = control.achieved_shifts(g, v, model.constants)
        residual = float(np.max(np.abs(
            shifts - [plan.shift_for_site(k) for k in range(len(shifts))]
        )))
        fid = None
        manifest.parameters["mode"] = "channel-plan"

    manifest.parameters["residual"] = residual
    manifest.outputs = ["voltages.csv"]
    rows = [[label, float(val)] for label, val in zip(g.col_labels, v)]
    ctx.emit(manifest, "voltages.csv", ["electrode", "voltage_v"], rows)
    click.echo(f"residual: {residual:.3e}")
    if fid is not None:
        click.echo(f"min crosstalk fidelity: {min(fid.values()):.6f}")


@main.command("heat-budget")
@click.option("--rabi", type=float, default=2e6, show_default=True, help="Hz")
@click.option("--omega-sweep", default="1e6:2e9", show_default=True,
              help="drive frequency sweep in Hz, 'lo:hi[:points]' (log-spaced)")
@click.option("--points", type=int, default=200, show_default=True)
@click.option("--transition", default="plus_minus", show_default=True,
              type=click.Choice(["plus_minus", "single_quantum"]))
@click.pass_obj
@_handled
def cmd_heat_budget(ctx: _Ctx, rabi, omega_sweep, points, transition):
    """Per-pulse heat load of electric vs magnetic drive over frequency."""
    lo, hi, n = _parse_sweep(omega_sweep, points)
    manifest = ctx.manifest("heat-budget", {
        "rabi_hz": rabi, "omega_sweep_hz": omega_sweep, "points": n,
        "transition": transition,
    })
    model = ctx.model(manifest)
    params = thermal.CircuitParams()
    omegas = 2.0 * math.pi * np.logspace(math.log10(lo), math.log10(hi), n)
    table = thermal.heat_sweep(params, rabi, model.constants, omegas, transition)
    manifest.outputs = ["heat_budget.csv"] + ([] if ctx.no_plots else ["heat_budget.png"])
    columns = ["omega_rad_s", "J_E_joule", "J_B_joule", "ratio"]
    rows = list(zip(*(table[c].tolist() for c in columns)))
    ctx.emit(manifest, "heat_budget.csv", columns, rows)
    ctx.figure("heat_budget.png",
               [("electric", table["omega_rad_s"], table["J_E_joule"]),
                ("magnetic", table["omega_rad_s"], table["J_B_joule"])],
               xlabel="drive frequency (rad/s)", ylabel="energy per pi-pulse (J)",
               title="Cryogenic heat budget", logx=True, logy=True)


def _n_grid(n_max: int, points: int) -> np.ndarray:
    grid = np.unique(np.round(np.logspace(0, math.log10(n_max), points)).astype(int))
    return grid[grid >= 1]


@main.command("rates")
@click.option("--arch", required=True, type=click.Choice(["efpsa", "mzi", "hybrid"]))
@click.option("--L", "length_km", type=float, default=1.0, show_default=True, help="km")
@click.option("--nmax", "--Nmax", type=int, default=5000, show_default=True)
@click.option("--points", type=int, default=120, show_default=True)
@click.pass_obj
@_handled
def cmd_rates(ctx: _Ctx, arch, length_km, nmax, points):
    """Closed-form entanglement rate versus qubit number for one architecture."""
    if nmax < 1:
        raise ValidationError("--nmax must be >= 1")
    manifest = ctx.manifest("rates", {"arch": arch, "L_km": length_km, "nmax": nmax,
                                      "points": points})
    lp = repeater.LinkParams(L=length_km)
    optics = OpticalInterface()
    curve = repeater.rate_curve(arch, _n_grid(nmax, points), lp, optics)
    manifest.outputs = ["rates.csv"] + ([] if ctx.no_plots else ["rates.png"])
    rows = [[int(n), float(r), flag]
            for n, r, flag in zip(curve.n_qubits, curve.rate, curve.limit)]
    ctx.emit(manifest, "rates.csv", ["n_qubits", "rate_ebit_per_s", "limit"], rows)
    ctx.figure("rates.png", [(arch, curve.n_qubits, curve.rate)],
               xlabel="number of qubits", ylabel="entanglement rate (ebit/s)",
               title=f"{arch} rate at L = {length_km:g} km", logx=True, logy=True)


@main.command("schemes")
@click.option("--pdet-sweep", default="1e-4:1", show_default=True,
              help="detection-probability sweep 'lo:hi[:points]' (log-spaced)")
@click.option("--points", type=int, default=60, show_default=True)
@click.option("--fidelity", type=float, default=0.99, show_default=True)
@click.pass_obj
@_handled
def cmd_schemes(ctx: _Ctx, pdet_sweep, points, fidelity):
    """Success probability of the heralding schemes at a fidelity target."""
    lo, hi, n = _parse_sweep(pdet_sweep, points)
    if hi > 1.0:
        raise ValidationError("p_det sweep upper bound must be <= 1")
    manifest = ctx.manifest("schemes", {"pdet_sweep": pdet_sweep, "points": n,
                                        "fidelity": fidelity})
    manifest.outputs = ["schemes.csv"] + ([] if ctx.no_plots else ["schemes.png"])
    p = np.logspace(math.log10(lo), math.log10(hi), n)
    names = ["barrett_kok", "single_photon", "superradiance", "bk_superradiance"]
    rows = []
    for pd in p:
        r = repeater.scheme_rates(fidelity, float(pd))
        rows.append([float(pd)] + [r[k] for k in names])
    ctx.emit(manifest, "schemes.csv", ["p_det"] + names, rows)
    arr = np.array(rows)
    ctx.figure("schemes.png", [(k, arr[:, 0], arr[:, i + 1]) for i, k in enumerate(names)],
               xlabel="detection probability", ylabel="success probability per attempt",
               title=f"Heralding schemes at F = {fidelity:g}", logx=True, logy=True)


@main.command("mc")
@click.option("--trials", type=float, default=1e5, show_default=True)
@click.option("--n", "n_list", default="10,100,800", show_default=True,
              help="comma-separated qubit numbers")
@click.option("--L", "length_km", type=float, default=1.0, show_default=True, help="km")
@click.pass_obj
@_handled
def cmd_mc(ctx: _Ctx, trials, n_list, length_km):
    """Monte Carlo protocol rate versus the closed form."""
    try:
        ns = [int(v) for v in n_list.split(",")]
    except ValueError as exc:
        raise ValidationError(f"bad --n list {n_list!r}: {exc}") from exc
    manifest = ctx.manifest("mc", {"trials": int(trials), "n": n_list, "L_km": length_km})
    manifest.outputs = ["mc.csv"]
    lp = repeater.LinkParams(L=length_km)
    optics = OpticalInterface()
    rows = []
    for n in ns:
        rate, stderr = repeater.monte_carlo_protocol(
            n, lp, optics, seed=ctx.seed, n_trials=int(trials))
        closed, _ = repeater.rate_efpsa(n, lp, optics)
        z = (rate - closed) / stderr if stderr > 0 else 0.0
        rows.append([n, rate, stderr, closed, z])
    ctx.emit(manifest, "mc.csv",
             ["n_qubits", "mc_rate_ebit_per_s", "stderr_ebit_per_s",
              "closed_form_ebit_per_s", "z_score"], rows)
    for row in rows:
        click.echo(f"N={row[0]}: mc={row[1]:.6g} +- {row[2]:.3g}, "
                   f"closed={row[3]:.6g}, z={row[4]:+.2f}")


@main.command("fig2")
@click.option("--imported", is_flag=True,
              help="Use an imported field map instead of the surrogate.")
@click.option("--target-site", type=int, default=None,
              help="Driven site (default: array center).")
@click.option("--e-perp", type=float, default=1e7, show_default=True,
              help="target |E_perp| in V/m")
@click.pass_obj
@_handled
def cmd_fig2(ctx: _Ctx, imported, target_site, e_perp):
    """Transverse-field profiles along the array: bare drive vs cross-talk
    elimination, with the Rabi-frequency column."""
    if imported and not ctx.field_map_paths:
        raise ValidationError("--imported requires at least one --field-map file")
    manifest = ctx.manifest("fig2", {"imported": imported, "e_perp_v_per_m": e_perp})
    model = ctx.model(manifest)
    geometry = model.geometry
    if imported:
        basis = ctx.basis(model, manifest)
    else:
        basis = fields.surrogate_basis(geometry)
    site = geometry.n_sites // 2 if target_site is None else target_site
    if not 0 <= site < geometry.n_sites:
        raise ValidationError(f"target site {site} outside 0..{geometry.n_sites - 1}")
    manifest.parameters["target_site"] = site

    g = fields.assemble_g(basis, geometry.nv_positions, fields.Components.PERP2,
                          model.frame)
    target = control.DriveTarget.single_site(geometry.n_sites, site, e_perp)
    v_ce = control.eliminate_crosstalk(g, target, strict=ctx.strict)
    residual = control.solution_residual(g, v_ce, target.rhs())
    manifest.parameters["residual"] = residual

    # bare drive: the target pair alone at the voltage matching the CE drive's
    # on-target field
    v_bare = np.zeros_like(v_ce)
    pair = g.matrix[:, 2 * site] - g.matrix[:, 2 * site + 1]
    amp = e_perp / math.hypot(pair[2 * site], pair[2 * site + 1])
    v_bare[2 * site] = amp
    v_bare[2 * site + 1] = -amp

    z = np.linspace(-geometry.a, geometry.n_sites * geometry.a, 241)
    points = np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
    d_perp = model.constants.d_perp

    outputs = ["fig2_single_electrode.csv", "fig2_crosstalk_eliminated.csv",
               "fig2_site_summary.csv"]
    manifest.outputs = outputs + ([] if ctx.no_plots else ["fig2.png"])

    profiles = {}
    for name, v in (("fig2_single_electrode.csv", v_bare),
                    ("fig2_crosstalk_eliminated.csv", v_ce)):
        e_lab = basis.superpose(v, points)
        e_nv = model.frame.lab_to_nv_many(e_lab)
        e_perp_prof = np.hypot(e_nv[:, 1], e_nv[:, 2])
        profiles[name] = e_perp_prof
        rows = [[float(zi), float(ei), float(d_perp * ei)]
                for zi, ei in zip(z, e_perp_prof)]
        ctx.emit(manifest, name, ["z_m", "e_perp_v_per_m", "rabi_hz"], rows)

    achieved = (g.matrix @ v_ce).reshape(-1, 2)
    fid = control.achieved_crosstalk_fidelity(g, v_ce, target,
                                              Averaging.EQUATOR)
    rows = []
    for k in range(geometry.n_sites):
        e_site = float(np.hypot(*achieved[k]))
        rows.append([k, e_site, d_perp * e_site,
                     1.0 if k == site else fid[k]])
    ctx.emit(manifest, "fig2_site_summary.csv",
             ["site", "e_perp_v_per_m", "rabi_hz", "crosstalk_fidelity"], rows)

    ctx.figure("fig2.png",
               [("single pair", z, profiles["fig2_single_electrode.csv"]),
                ("crosstalk eliminated", z, profiles["fig2_crosstalk_eliminated.csv"])],
               xlabel="position along array (m)", ylabel="|E_perp| (V/m)",
               title="Transverse field along the array")
    click.echo(f"residual: {residual:.3e}")


@main.command("fig4")
@click.option("--nmax", type=int, default=5000, show_default=True)
@click.option("--points", type=int, default=80, show_default=True)
@click.option("--L", "length_km", type=float, default=1.0, show_default=True, help="km")
@click.option("--l-grid", default="0.5,1,2,5,10", show_default=True,
              help="comma-separated link lengths (km) for the L sweep")
@click.pass_obj
@_handled
def cmd_fig4(ctx: _Ctx, nmax, points, length_km, l_grid):
    """Entanglement-rate curves for the three architectures plus the L sweep."""
    try:
        l_values = [float(v) for v in l_grid.split(",")]
    except ValueError as exc:
        raise ValidationError(f"bad --l-grid {l_grid!r}: {exc}") from exc
    manifest = ctx.manifest("fig4", {"nmax": nmax, "points": points,
                                     "L_km": length_km, "l_grid": l_grid})
    lp = repeater.LinkParams(L=length_km)
    optics = OpticalInterface()
    ns = _n_grid(nmax, points)

    rows = []
    curves = {"efpsa": [], "mzi": [], "hybrid": []}
    for n in ns:
        r_e, flag = repeater.rate_efpsa(int(n), lp, optics)
        r_m, _ = repeater.rate_mzi(int(n), lp, optics)
        n_dev, r_h = repeater.optimize_hybrid(int(n), lp, optics)
        curves["efpsa"].append(r_e)
        curves["mzi"].append(r_m)
        curves["hybrid"].append(r_h)
        rows.append([int(n), r_e, r_m, r_h, n_dev, flag])
    manifest.outputs = ["fig4_rates.csv", "fig4_L_sweep.csv"] + (
        [] if ctx.no_plots else ["fig4.png"])
    ctx.emit(manifest, "fig4_rates.csv",
             ["n_qubits", "rate_efpsa_ebit_per_s", "rate_mzi_ebit_per_s",
              "rate_hybrid_ebit_per_s", "n_devices_opt", "limit"], rows)

    sweep_rows = []
    for L in l_values:
        lp_l = repeater.LinkParams(L=L)
        for n in ns:
            _, r_h = repeater.optimize_hybrid(int(n), lp_l, optics)
            sweep_rows.append([L, int(n), r_h])
    ctx.emit(manifest, "fig4_L_sweep.csv",
             ["L_km", "n_qubits", "rate_hybrid_ebit_per_s"], sweep_rows)

    ctx.figure("fig4.png",
               [(k, ns, np.array(curves[k])) for k in ("efpsa", "mzi", "hybrid")],
               xlabel="number of qubits", ylabel="entanglement rate (ebit/s)",
               title=f"Architecture comparison at L = {length_km:g} km",
               logx=True, logy=True)


@main.command("appendix")
@click.option("--gamma-sp", type=float, default=100e6, show_default=True,
              help="superradiant decay rate (Hz)")
@click.option("--fidelity", type=float, default=0.99, show_default=True)
@click.pass_obj
@_handled
def cmd_appendix(ctx: _Ctx, gamma_sp, fidelity):
    """Field-localization profiles, their scaling slopes, and the
    superradiance heralding curves."""
    manifest = ctx.manifest("appendix", {"gamma_sp_hz": gamma_sp,
                                         "fidelity": fidelity})
    outputs = ["appendix_profiles.csv", "appendix_slopes.csv",
               "appendix_fidelity.csv", "appendix_schemes.csv"]
    manifest.outputs = outputs + (
        [] if ctx.no_plots else ["appendix_profiles.png", "appendix_schemes.png"])

    r = np.logspace(math.log10(0.5e-6), math.log10(50e-6), 60)
    kinds = sorted(_PROFILE_KINDS)
    profiles = {k: fields.appendix_c_profile(_PROFILE_KINDS[k], r) for k in kinds}
    rows = [[float(r[i])] + [float(profiles[k][i]) for k in kinds]
            for i in range(len(r))]
    ctx.emit(manifest, "appendix_profiles.csv",
             ["r_m"] + [f"{k}_norm" for k in kinds], rows)

    fit = (r >= 5e-6) & (r <= 50e-6)
    slope_rows = [
        [k, fields.loglog_slope(r[fit], profiles[k][fit]), _EXPECTED_SLOPES[k]]
        for k in kinds
    ]
    ctx.emit(manifest, "appendix_slopes.csv",
             ["kind", "slope_fit", "slope_expected"], slope_rows)

    t = np.linspace(0.0, 120e-9, 241)
    fid_rows = [[float(ti), repeater.superradiance_fidelity(ti, gamma_sp),
                 repeater.herald_density(ti, gamma_sp)] for ti in t]
    ctx.emit(manifest, "appendix_fidelity.csv",
             ["t_s", "fidelity", "herald_density_per_s"], fid_rows)

    p = np.logspace(-4, 0, 60)
    names = ["barrett_kok", "single_photon", "superradiance", "bk_superradiance"]
    sch_rows = []
    for pd in p:
        sr = repeater.scheme_rates(fidelity, float(pd))
        sch_rows.append([float(pd)] + [sr[k] for k in names])
    ctx.emit(manifest, "appendix_schemes.csv", ["p_det"] + names, sch_rows)

    ctx.figure("appendix_profiles.png", [(k, r, profiles[k]) for k in kinds],
               xlabel="distance (m)", ylabel="field magnitude (normalized at 500 nm)",
               title="Field localization of the reference structures",
               logx=True, logy=True)
    arr = np.array(sch_rows)
    ctx.figure("appendix_schemes.png",
               [(k, arr[:, 0], arr[:, i + 1]) for i, k in enumerate(names)],
               xlabel="detection probability", ylabel="success probability per attempt",
               title=f"Heralding schemes at F = {fidelity:g}", logx=True, logy=True)


if __name__ == "__main__":
    main()
