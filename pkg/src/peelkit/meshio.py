"""OBJ and binary little-endian PLY readers and writers.

OBJ per-vertex color uses the common 6-float `v x y z r g b` extension.
PLY vertices are float32 x,y,z with optional uchar red,green,blue; faces
are uchar-count lists of int32 indices. Writers are byte-deterministic.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Optional

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .errors import InvalidFormat
from .geometry import TriangleMesh


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".obj":
        return read_obj(path)
    if ext == ".ply":
        mesh = read_ply(path)
        return mesh
    raise InvalidFormat(f"unsupported mesh extension: {path.suffix}")


def save_mesh(path, mesh: TriangleMesh) -> None:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".obj":
        write_obj(path, mesh)
    elif ext == ".ply":
        write_ply(path, mesh)
    else:
        raise InvalidFormat(f"unsupported mesh extension: {path.suffix}")


def read_obj(path) -> TriangleMesh:
    verts = []
    colors = []
    faces = []
    with open(path, "r") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vals = [float(x) for x in parts[1:]]
                if len(vals) < 3:
                    raise InvalidFormat(f"short vertex line in {path}")
                verts.append(vals[:3])
                if len(vals) >= 6:
                    colors.append(vals[3:6])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                # fan-triangulate polygons
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise InvalidFormat(f"no vertices in {path}")
    col = np.array(colors) if len(colors) == len(verts) else None
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64).reshape(-1, 3), col)


def write_obj(path, mesh: TriangleMesh) -> None:
    lines = []
    if mesh.colors is not None:
        for v, c in zip(mesh.vertices, mesh.colors):
            lines.append("v %.9g %.9g %.9g %.9g %.9g %.9g" % (*v, *c))
    else:
        for v in mesh.vertices:
            lines.append("v %.9g %.9g %.9g" % tuple(v))
    for f in mesh.faces:
        lines.append("f %d %d %d" % (f[0] + 1, f[1] + 1, f[2] + 1))
    atomic_write_text(path, "\n".join(lines) + "\n")


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def read_ply(path) -> TriangleMesh:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"ply"):
        raise InvalidFormat(f"{path}: not a PLY file")
    header_end = data.find(b"end_header\n")
    if header_end < 0:
        raise InvalidFormat(f"{path}: missing end_header")
    header = data[:header_end].decode("ascii", errors="replace").splitlines()
    body = data[header_end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) | ('list', idx_dtype, cnt_dtype, name)])
    for line in header[1:]:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append(("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]], parts[4]))
            else:
                elements[-1][2].append((parts[1], _PLY_TYPES[parts[1]], parts[2]))
    if fmt != "binary_little_endian":
        raise InvalidFormat(f"{path}: only binary_little_endian PLY supported")

    verts = faces = colors = None
    offset = 0
    for name, count, props in elements:
        if all(p[0] != "list" for p in props):
            dt = np.dtype([(p[2], "<" + p[1]) for p in props])
            arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
            offset += dt.itemsize * count
            if name == "vertex":
                verts = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
                if all(c in dt.names for c in ("red", "green", "blue")):
                    rgb = np.stack([arr["red"], arr["green"], arr["blue"]], axis=1)
                    colors = rgb.astype(np.float64) / 255.0
        else:
            # list property: parse per element (face lists may vary in length)
            rows = []
            for _ in range(count):
                cnt_dt = np.dtype("<" + props[0][1])
                k = int(np.frombuffer(body, dtype=cnt_dt, count=1, offset=offset)[0])
                offset += cnt_dt.itemsize
                idx_dt = np.dtype("<" + props[0][2])
                idx = np.frombuffer(body, dtype=idx_dt, count=k, offset=offset)
                offset += idx_dt.itemsize * k
                for j in range(1, k - 1):
                    rows.append((int(idx[0]), int(idx[j]), int(idx[j + 1])))
            if name == "face":
                faces = np.array(rows, dtype=np.int64).reshape(-1, 3)
    if verts is None:
        raise InvalidFormat(f"{path}: no vertex element")
    if faces is None:
        faces = np.zeros((0, 3), dtype=np.int64)
    return TriangleMesh(verts, faces, colors)


def write_ply(path, mesh: TriangleMesh) -> None:
    _write_ply_raw(path, mesh.vertices, mesh.colors, mesh.faces)


def write_ply_points(path, points: np.ndarray, colors: Optional[np.ndarray] = None) -> None:
    """Vertex-only PLY for point clouds; valid even when empty."""
    _write_ply_raw(path, points, colors, None)


def read_ply_points(path):
    """Read a PLY as (points, colors); faces, if any, are ignored."""
    mesh = read_ply(path)
    return mesh.vertices, mesh.colors


def _write_ply_raw(path, verts, colors, faces) -> None:
    verts = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {len(verts)}",
              "property float x", "property float y", "property float z"]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    if faces is not None:
        header += [f"element face {len(faces)}",
                   "property list uchar int vertex_indices"]
    header.append("end_header")
    out = bytearray(("\n".join(header) + "\n").encode("ascii"))
    if colors is not None:
        rgb = np.clip(np.asarray(colors) * 255.0 + 0.5, 0, 255).astype(np.uint8)
        dt = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                       ("red", "u1"), ("green", "u1"), ("blue", "u1")])
        rec = np.empty(len(verts), dtype=dt)
        rec["x"], rec["y"], rec["z"] = verts[:, 0], verts[:, 1], verts[:, 2]
        rec["red"], rec["green"], rec["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
        out += rec.tobytes()
    else:
        out += verts.astype("<f4").tobytes()
    if faces is not None:
        for f in np.asarray(faces, dtype=np.int64):
            out += struct.pack("<Biii", 3, int(f[0]), int(f[1]), int(f[2]))
    atomic_write_bytes(path, bytes(out))
