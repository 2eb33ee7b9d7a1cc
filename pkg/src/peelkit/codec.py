"""Peeled depth/RGB map stacks: encode, decode, subsample, serialize.

A peeled stack stores, per pixel, the camera-space z-depth of the i-th
ray-surface intersection in layer i (0.0 marks background), optionally
with barycentrically interpolated vertex color. Encoding traces one ray
per pixel center; decoding back-projects every foreground pixel.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .bvh import build_bvh, trace_batch
from .errors import EmptyCloud, EmptyMesh, InvalidFormat
from .geometry import PinholeCamera, TriangleMesh

NEAR_PLANE = 1e-4       # valid depths must exceed this (meters)
DEFAULT_LAYERS = 4
DEFAULT_RESOLUTION = 512

PEEL_MAGIC = b"PEEL"
PEEL_VERSION = 1
FLAG_RGB = 1 << 0
FLAG_SIGNED_DELTA = 1 << 1  # residual-deformation payload


@dataclass
class PeeledMapStack:
    """Layers x H x W depth grid (meters) with optional RGB, plus camera."""

    depth: np.ndarray
    camera: PinholeCamera
    rgb: Optional[np.ndarray] = None

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 3:
            raise ValueError("depth must be (layers, height, width)")
        if self.rgb is not None:
            self.rgb = np.asarray(self.rgb, dtype=np.float64)
            if self.rgb.shape != self.depth.shape + (3,):
                raise ValueError("rgb must be (layers, height, width, 3)")

    @property
    def layers(self) -> int:
        return self.depth.shape[0]

    @property
    def height(self) -> int:
        return self.depth.shape[1]

    @property
    def width(self) -> int:
        return self.depth.shape[2]

    def validate(self) -> None:
        """Check stack invariants; raises ValueError on violation."""
        if not np.all(np.isfinite(self.depth)):
            raise ValueError("depth contains NaN/Inf")
        if self.rgb is not None and not np.all(np.isfinite(self.rgb)):
            raise ValueError("rgb contains NaN/Inf")
        fg = self.depth > 0
        for i in range(1, self.layers):
            if np.any(fg[i] & ~fg[i - 1]):
                raise ValueError("background layer followed by foreground")
            both = fg[i] & fg[i - 1]
            if np.any(self.depth[i][both] < self.depth[i - 1][both]):
                raise ValueError("nonzero depths decrease across layers")

    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.depth > 0))

    def same_shape(self, other: "PeeledMapStack") -> bool:
        return self.depth.shape == other.depth.shape


@dataclass
class ColoredPointCloud:
    """World-space points with optional color and per-point source layer."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None
    layer_id: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.colors is not None:
            self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if self.layer_id is not None:
            self.layer_id = np.asarray(self.layer_id, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.points)


def encode_peeled(mesh: TriangleMesh, camera: PinholeCamera,
                  layers: int = DEFAULT_LAYERS,
                  with_rgb: Optional[bool] = None) -> PeeledMapStack:
    """Ray-trace a mesh into a peeled map stack.

    One ray per pixel center; the i-th nearest hit's camera-space z fills
    depth layer i, trailing layers stay 0. Deterministic for any thread
    count. with_rgb defaults to whether the mesh carries vertex colors.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    if mesh.num_faces == 0 or not mesh.face_valid.any():
        raise EmptyMesh("cannot encode an empty mesh")
    if with_rgb is None:
        with_rgb = mesh.colors is not None

    cam_mesh = mesh.transformed(camera.pose)
    bvh = build_bvh(cam_mesh)
    dirs = camera.pixel_rays()
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    unit_dirs = dirs / norms
    origins = np.zeros_like(unit_dirs)
    t, face, bu, bv, n = trace_batch(bvh, origins, unit_dirs, layers)

    h, w = camera.height, camera.width
    slot = np.arange(layers)[None, :] < n[:, None]
    # z-depth of hit = t * dir_z with unit direction (origin at camera center)
    z = np.where(slot, t * unit_dirs[:, 2:3], 0.0)
    z[z <= NEAR_PLANE] = 0.0
    # a sub-near hit would break the background-suffix invariant; drop the tail
    keep = np.cumprod(z > 0, axis=1).astype(bool)
    z = np.where(keep, z, 0.0)
    depth = z.reshape(h, w, layers).transpose(2, 0, 1).copy()

    rgb = None
    if with_rgb:
        rgb_flat = np.zeros((len(dirs), layers, 3))
        if mesh.colors is not None:
            fg = keep & (face >= 0)
            f = face[fg]
            u = bu[fg]
            v = bv[fg]
            tri = mesh.faces[f]
            c0 = mesh.colors[tri[:, 0]]
            c1 = mesh.colors[tri[:, 1]]
            c2 = mesh.colors[tri[:, 2]]
            w0 = (1.0 - u - v)[:, None]
            rgb_flat[fg] = w0 * c0 + u[:, None] * c1 + v[:, None] * c2
        rgb = rgb_flat.reshape(h, w, layers, 3).transpose(2, 0, 1, 3).copy()

    return PeeledMapStack(depth=depth, camera=camera, rgb=rgb)


def decode_pointcloud(stack: PeeledMapStack) -> ColoredPointCloud:
    """Back-project every foreground pixel to a world-space colored point."""
    cam = stack.camera
    points = []
    colors = []
    layer_ids = []
    for i in range(stack.layers):
        v, u = np.nonzero(stack.depth[i] > 0)
        if len(u) == 0:
            continue
        d = stack.depth[i][v, u]
        p_cam = cam.back_project(u.astype(np.float64), v.astype(np.float64), d)
        points.append(cam.camera_to_world(p_cam))
        layer_ids.append(np.full(len(u), i, dtype=np.int64))
        if stack.rgb is not None:
            colors.append(stack.rgb[i][v, u])
    if not points:
        return ColoredPointCloud(points=np.zeros((0, 3)),
                                 colors=np.zeros((0, 3)) if stack.rgb is not None else None,
                                 layer_id=np.zeros(0, dtype=np.int64))
    return ColoredPointCloud(
        points=np.vstack(points),
        colors=np.vstack(colors) if colors else None,
        layer_id=np.concatenate(layer_ids),
    )


def subsample_uniform(cloud: ColoredPointCloud, target: int,
                      seed: int = 0) -> ColoredPointCloud:
    """Uniformly pick `target` points without replacement (seeded).

    Clouds at or under the target are returned unchanged.
    """
    if target < 1:
        raise ValueError("target must be >= 1")
    n = len(cloud)
    if n <= target:
        return cloud
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=target, replace=False))
    return ColoredPointCloud(
        points=cloud.points[idx],
        colors=cloud.colors[idx] if cloud.colors is not None else None,
        layer_id=cloud.layer_id[idx] if cloud.layer_id is not None else None,
    )


# ---------------------------------------------------------------------------
# PEEL container
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sBBHII")  # magic, version, flags, layers, width, height


def write_peel(path, stack: PeeledMapStack) -> None:
    """Write the stack as a PEEL file plus a `.camera.json` sidecar."""
    path = Path(path)
    flags = FLAG_RGB if stack.rgb is not None else 0
    blob = bytearray(_HEADER.pack(PEEL_MAGIC, PEEL_VERSION, flags,
                                  stack.layers, stack.width, stack.height))
    blob += stack.depth.astype("<f4").tobytes()
    if stack.rgb is not None:
        blob += stack.rgb.astype("<f4").tobytes()
    atomic_write_bytes(path, bytes(blob))
    _write_camera_sidecar(path, stack.camera)


def read_peel(path) -> PeeledMapStack:
    path = Path(path)
    data = path.read_bytes()
    layers, width, height, flags, offset = _parse_header(path, data)
    if flags & FLAG_SIGNED_DELTA:
        raise InvalidFormat(f"{path}: signed-delta payload; use read_rd_peel")
    n = layers * height * width
    depth = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
    depth = depth.reshape(layers, height, width).astype(np.float64)
    offset += 4 * n
    rgb = None
    if flags & FLAG_RGB:
        rgb = np.frombuffer(data, dtype="<f4", count=n * 3, offset=offset)
        rgb = rgb.reshape(layers, height, width, 3).astype(np.float64)
    camera = _read_camera_sidecar(path)
    return PeeledMapStack(depth=depth, camera=camera, rgb=rgb)


def _parse_header(path, data):
    if len(data) < _HEADER.size:
        raise InvalidFormat(f"{path}: truncated PEEL header")
    magic, version, flags, layers, width, height = _HEADER.unpack_from(data)
    if magic != PEEL_MAGIC:
        raise InvalidFormat(f"{path}: bad magic bytes")
    if version != PEEL_VERSION:
        raise InvalidFormat(f"{path}: unsupported PEEL version {version}")
    return layers, width, height, flags, _HEADER.size


def camera_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".camera.json")


def _write_camera_sidecar(path, camera: PinholeCamera) -> None:
    sidecar = camera_sidecar_path(path)
    atomic_write_text(sidecar, json.dumps(camera.to_dict(), indent=2, sort_keys=True) + "\n")


def _read_camera_sidecar(path) -> PinholeCamera:
    sidecar = camera_sidecar_path(path)
    if not sidecar.exists():
        raise InvalidFormat(f"missing camera sidecar: {sidecar}")
    return PinholeCamera.from_dict(json.loads(sidecar.read_text()))


def export_depth_png(path, stack: PeeledMapStack, layer: int,
                     vmin: float, vmax: float) -> None:
    """16-bit grayscale visualization of one depth layer.

    Lossy by construction; never read back into the pipeline.
    """
    from PIL import Image

    if vmax <= vmin:
        raise ValueError("vmax must exceed vmin")
    d = stack.depth[layer]
    scaled = np.clip((d - vmin) / (vmax - vmin), 0.0, 1.0)
    img = (scaled * 65535.0 + 0.5).astype(np.uint16)
    Image.fromarray(img).save(str(path))
