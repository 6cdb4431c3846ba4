"""Run manifests and deterministic delimited output.

Every CSV the command-line tool writes starts with its run manifest as
``# key: value`` comment lines: the subcommand, the fully resolved
parameters, SHA-256 digests of any input files, the seed, the tool version
and the relative paths of all outputs of the run.  Reruns with an equal
manifest produce byte-identical files, so floats are rendered with a fixed
format and keys are emitted in sorted order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .errors import ValidationError

FLOAT_FORMAT = ".12g"


def tool_version() -> str:
    try:
        return version("efpsa")
    except PackageNotFoundError:  # running from a source tree
        return "0.0.0+src"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    return str(value)


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict = field(default_factory=dict)
    input_digests: dict = field(default_factory=dict)  # name -> sha256
    seed: int | None = None
    outputs: list[str] = field(default_factory=list)   # relative to the out dir
    version: str = field(default_factory=tool_version)

    def add_input(self, label: str, path) -> None:
        self.input_digests[label] = sha256_file(path)

    def header_lines(self) -> list[str]:
        rows = {
            "subcommand": self.subcommand,
            "version": self.version,
        }
        if self.seed is not None:
            rows["seed"] = self.seed
        for key in sorted(self.parameters):
            rows[f"param.{key}"] = self.parameters[key]
        for label in sorted(self.input_digests):
            rows[f"input.{label}.sha256"] = self.input_digests[label]
        for i, out in enumerate(self.outputs):
            rows[f"output.{i}"] = out
        return [f"# {k}: {_render(v)}" for k, v in rows.items()]


def write_csv(
    path,
    manifest: RunManifest,
    columns: list[str],
    rows,
) -> None:
    """Write one delimited table with the manifest embedded as a comment
    header.  Column names should carry units (e.g. ``rate_ebit_per_s``)."""
    path = Path(path)
    lines = manifest.header_lines()
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValidationError(
                f"{path.name}: row width {len(row)} != {len(columns)} columns"
            )
        lines.append(",".join(_render(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
