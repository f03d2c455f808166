"""Reading oriented clouds (XYZ, PLY) and reading/writing OBJ meshes."""
from __future__ import annotations

import os

import numpy as np

from .core import OrientedPointCloud
from .extraction import TriangleMesh


class CloudFormatError(ValueError):
    pass


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}
_FIELDS = ("x", "y", "z", "nx", "ny", "nz")


def load_cloud(path) -> OrientedPointCloud:
    """Load ``x y z nx ny nz`` samples from an ``.xyz`` text file or a ``.ply`` file."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic.startswith(b"ply"):
        data = _read_ply(path)
    else:
        data = _read_xyz(path)
    try:
        return OrientedPointCloud(data[:, :3], data[:, 3:6])
    except ValueError as exc:
        raise CloudFormatError(f"{path}: {exc}") from None


def _read_xyz(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) == 3:
                raise CloudFormatError(f"{path}:{lineno}: normals required")
            if len(parts) != 6:
                raise CloudFormatError(f"{path}:{lineno}: expected 6 values, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise CloudFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise CloudFormatError(f"{path}: no samples")
    return np.array(rows)


def _read_ply(path):
    with open(path, "rb") as fh:
        header = []
        while True:
            line = fh.readline()
            if not line:
                raise CloudFormatError(f"{path}: truncated PLY header")
            line = line.decode("ascii", "replace").strip()
            header.append(line)
            if line == "end_header":
                break
        body_offset = fh.tell()
    fmt = None
    elements = []  # (name, count, [(prop, type)])
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info", "end_header"):
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise CloudFormatError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[4], None))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise CloudFormatError(f"{path}:{lineno}: unknown property type {parts[1]}")
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise CloudFormatError(f"{path}: unsupported PLY format {fmt}")
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise CloudFormatError(f"{path}: no vertex element")
    vi = names.index("vertex")
    _, count, props = elements[vi]
    prop_names = [p[0] for p in props]
    if not all(f in prop_names for f in _FIELDS[:3]):
        raise CloudFormatError(f"{path}: vertex element lacks x, y, z")
    if not all(f in prop_names for f in _FIELDS[3:]):
        raise CloudFormatError(f"{path}: normals required")
    if any(t is None for _, t in props):
        raise CloudFormatError(f"{path}: list properties on vertices are not supported")

    if fmt == "ascii":
        with open(path, "rb") as fh:
            fh.seek(body_offset)
            lines = fh.read().decode("ascii").splitlines()
        skip = 0
        for _, n, _ in elements[:vi]:
            skip += n
        rows = [ln.split() for ln in lines[skip:skip + count]]
        if len(rows) != count or any(len(r) != len(props) for r in rows):
            raise CloudFormatError(f"{path}: malformed ASCII vertex data")
        table = np.array(rows, dtype=float)
        cols = [prop_names.index(f) for f in _FIELDS]
        return table[:, cols]

    endian = "<" if fmt == "binary_little_endian" else ">"
    offset = body_offset
    for name, n, eprops in elements[:vi]:
        if any(t is None for _, t in eprops):
            raise CloudFormatError(f"{path}: cannot skip variable-size element {name} before vertices")
        offset += n * np.dtype([(p, endian + t) for p, t in eprops]).itemsize
    dtype = np.dtype([(p, endian + t) for p, t in props])
    raw = np.fromfile(path, dtype=dtype, count=count, offset=offset)
    if len(raw) != count:
        raise CloudFormatError(f"{path}: truncated binary vertex data")
    return np.column_stack([raw[f].astype(float) for f in _FIELDS])


def save_cloud(cloud: OrientedPointCloud, path) -> None:
    """Write ``x y z nx ny nz`` lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p, n in zip(cloud.points, cloud.normals):
            fh.write(" ".join(f"{v:.9g}" for v in (*p, *n)) + "\n")


def save_mesh(mesh: TriangleMesh, path) -> None:
    """ASCII OBJ: ``v`` lines then ``f`` lines with 1-based indices."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def load_mesh(path) -> TriangleMesh:
    """Read vertices and (fan-triangulated) faces from an OBJ file."""
    path = os.fspath(path)
    verts, tris = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(p) for p in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    tris.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, len(idx) - 1))
            except ValueError as exc:
                raise CloudFormatError(f"{path}:{lineno}: {exc}") from None
    return TriangleMesh(np.array(verts).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))
