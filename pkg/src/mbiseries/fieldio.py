"""Field files: VTK legacy structured points (ASCII) and a raw binary format.

The binary layout is a 64-byte little-endian header

    magic "MBIF" | version u32 | dims 3 x u32 | spacing f64 | origin 3 x f64 |
    component count u32 | 8 pad bytes

followed by the float64 values in C order of shape ``(ncomp, nx, ny, nz)``.
Both formats round-trip bit-exactly (ASCII values use 17 significant digits).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GridSpec, ScalarField, VectorField3

MBIF_MAGIC = b"MBIF"
MBIF_VERSION = 1
MBIF_HEADER = struct.Struct("<4sI3Id3dI8x")
assert MBIF_HEADER.size == 64


def _components(field):
    return field.values[None] if isinstance(field, ScalarField) else field.values


def _make_field(grid, comps):
    if comps.shape[0] == 1:
        return ScalarField(grid, comps[0])
    if comps.shape[0] == 3:
        return VectorField3(grid, comps)
    raise ConfigError(f"unsupported component count {comps.shape[0]}")


def write_mbif(path, field):
    g = field.grid
    comps = np.ascontiguousarray(_components(field), dtype="<f8")
    header = MBIF_HEADER.pack(MBIF_MAGIC, MBIF_VERSION, *g.dims, g.spacing, *g.origin, comps.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(comps.tobytes(order="C"))


def read_mbif(path):
    data = Path(path).read_bytes()
    if len(data) < MBIF_HEADER.size:
        raise ConfigError(f"{path}: file too short for an MBIF header")
    magic, version, nx, ny, nz, h, ox, oy, oz, ncomp = MBIF_HEADER.unpack_from(data)
    if magic != MBIF_MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != MBIF_VERSION:
        raise ConfigError(f"{path}: unsupported MBIF version {version}")
    grid = GridSpec((nx, ny, nz), h, (ox, oy, oz))
    count = ncomp * nx * ny * nz
    if len(data) != MBIF_HEADER.size + 8 * count:
        raise ConfigError(f"{path}: expected {count} values")
    comps = np.frombuffer(data, dtype="<f8", offset=MBIF_HEADER.size).reshape((ncomp, nx, ny, nz))
    return _make_field(grid, comps.astype(float))


def write_vtk(path, fields: dict, title="mbiseries fields"):
    """Write named scalar/vector fields sharing one grid to a legacy VTK file."""
    if not fields:
        raise ValueError("nothing to write")
    grid = next(iter(fields.values())).grid
    nx, ny, nz = grid.dims
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} {nz}",
        "ORIGIN " + " ".join(f"{c:.17g}" for c in grid.origin),
        f"SPACING {grid.spacing:.17g} {grid.spacing:.17g} {grid.spacing:.17g}",
        f"POINT_DATA {grid.size}",
    ]
    for name, f in fields.items():
        if f.grid != grid:
            raise ValueError("all fields in one VTK file must share a grid")
        comps = _components(f)
        # VTK point order has x varying fastest
        flat = comps.transpose(0, 3, 2, 1).reshape(comps.shape[0], -1).T
        if comps.shape[0] == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        else:
            lines.append(f"VECTORS {name} double")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in flat)
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path) -> dict:
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ConfigError(f"{path}: not a legacy VTK file")
    if tokens[2].strip() != "ASCII":
        raise ConfigError(f"{path}: only ASCII VTK files are supported")
    words = " ".join(tokens[3:]).split()
    pos = 0

    def take(n=1):
        nonlocal pos
        out = words[pos:pos + n]
        pos += n
        return out

    dims = origin = spacing = None
    npts = None
    fields = {}
    while pos < len(words):
        key = take()[0].upper()
        if key == "DATASET":
            if take()[0].upper() != "STRUCTURED_POINTS":
                raise ConfigError(f"{path}: only STRUCTURED_POINTS is supported")
        elif key == "DIMENSIONS":
            dims = tuple(int(v) for v in take(3))
        elif key == "ORIGIN":
            origin = tuple(float(v) for v in take(3))
        elif key in ("SPACING", "ASPECT_RATIO"):
            sp = [float(v) for v in take(3)]
            if not (sp[0] == sp[1] == sp[2]):
                raise ConfigError(f"{path}: anisotropic spacing is not supported")
            spacing = sp[0]
        elif key == "POINT_DATA":
            npts = int(take()[0])
        elif key in ("SCALARS", "VECTORS"):
            name = take()[0]
            take()  # data type
            if key == "SCALARS":
                ncomp = 1
                nxt = take()[0]
                if nxt.upper() == "LOOKUP_TABLE":
                    take()
                else:
                    ncomp = int(nxt)
                    if take()[0].upper() != "LOOKUP_TABLE":
                        raise ConfigError(f"{path}: expected LOOKUP_TABLE")
                    take()
            else:
                ncomp = 3
            vals = np.array([float(v) for v in take(ncomp * npts)])
            grid = GridSpec(dims, spacing, origin)
            comps = vals.reshape(dims[2], dims[1], dims[0], ncomp).transpose(3, 2, 1, 0)
            fields[name] = _make_field(grid, np.ascontiguousarray(comps))
        else:
            raise ConfigError(f"{path}: unexpected keyword {key!r}")
    return fields
