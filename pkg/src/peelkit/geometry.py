"""Triangle meshes, pinhole cameras, and rays.

All coordinates are in meters. Cameras follow the usual computer-vision
convention: +x right, +y down, +z forward, with the pose stored as a 4x4
rigid transform taking world coordinates to camera coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyMesh

DEGENERATE_AREA = 1e-12  # faces below this area (m^2) are never traced
POSE_ORTHO_TOL = 1e-6


@dataclass
class TriangleMesh:
    """Indexed triangle surface with optional per-vertex color.

    vertices: (V, 3) float array, meters.
    faces: (F, 3) int array of vertex indices.
    colors: optional (V, 3) float array, RGB in [0, 1].
    face_valid: (F,) bool array; invalid faces are skipped by every ray
        operation (degenerate faces are auto-flagged at construction).
    """

    vertices: np.ndarray
    faces: np.ndarray
    colors: Optional[np.ndarray] = None
    face_valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (F, 3)")
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("vertices contain NaN/Inf")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")
        if self.colors is not None:
            self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
            if self.colors.shape != self.vertices.shape:
                raise ValueError("colors must match vertices in shape")
        if self.face_valid is None:
            self.face_valid = self.face_areas() > DEGENERATE_AREA
        else:
            self.face_valid = np.asarray(self.face_valid, dtype=bool).copy()
            self.face_valid &= self.face_areas() > DEGENERATE_AREA

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        v0, v1, v2 = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals from winding order; zero for degenerate faces."""
        v0, v1, v2 = (self.vertices[self.faces[:, i]] for i in range(3))
        n = np.cross(v1 - v0, v2 - v0)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)

    def valid_faces(self) -> np.ndarray:
        """(K, 3) face array restricted to traceable faces."""
        return self.faces[self.face_valid]

    def centroid(self) -> np.ndarray:
        if self.num_vertices == 0:
            raise EmptyMesh("mesh has no vertices")
        return self.vertices.mean(axis=0)

    def transformed(self, matrix: np.ndarray) -> "TriangleMesh":
        """Apply a 4x4 transform to the vertices; topology unchanged."""
        m = np.asarray(matrix, dtype=np.float64)
        v = self.vertices @ m[:3, :3].T + m[:3, 3]
        return TriangleMesh(v, self.faces, self.colors, self.face_valid)


def merge_meshes(a: TriangleMesh, b: TriangleMesh) -> TriangleMesh:
    """Concatenate two meshes into one, preserving colors when both have them."""
    verts = np.vstack([a.vertices, b.vertices])
    faces = np.vstack([a.faces, b.faces + a.num_vertices])
    colors = None
    if a.colors is not None and b.colors is not None:
        colors = np.vstack([a.colors, b.colors])
    valid = np.concatenate([a.face_valid, b.face_valid])
    return TriangleMesh(verts, faces, colors, valid)


def rotate_yaw(mesh: TriangleMesh, degrees: float,
               pivot: Optional[np.ndarray] = None) -> TriangleMesh:
    """Rotate a mesh about the vertical (y) axis through `pivot`.

    Right-handed convention: +90 degrees takes +x to -z. Defaults to the
    mesh centroid as pivot so augmentation views spin in place.
    """
    if degrees == 0.0:
        return TriangleMesh(mesh.vertices, mesh.faces, mesh.colors, mesh.face_valid)
    c = mesh.centroid() if pivot is None else np.asarray(pivot, dtype=np.float64)
    a = np.deg2rad(degrees)
    ca, sa = np.cos(a), np.sin(a)
    rot = np.array([[ca, 0.0, sa],
                    [0.0, 1.0, 0.0],
                    [-sa, 0.0, ca]])
    v = (mesh.vertices - c) @ rot.T + c
    return TriangleMesh(v, mesh.faces, mesh.colors, mesh.face_valid)


@dataclass
class PinholeCamera:
    """Pinhole intrinsics plus a world-to-camera rigid transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.pose is None:
            self.pose = np.eye(4)
        self.pose = np.ascontiguousarray(self.pose, dtype=np.float64)
        if self.pose.shape != (4, 4):
            raise ValueError("pose must be a 4x4 matrix")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")
        r = self.pose[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=POSE_ORTHO_TOL):
            raise ValueError("pose rotation is not orthonormal")

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.pose[:3, :3].T + self.pose[:3, 3]

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        r = self.pose[:3, :3]
        return (p - self.pose[:3, 3]) @ r

    def pixel_rays(self) -> np.ndarray:
        """Camera-space ray directions through every pixel center.

        Returns (H*W, 3) unnormalized directions with unit z, row-major
        over pixels, matching the flattened layout of the map grids.
        """
        u = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        v = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        uu, vv = np.meshgrid(u, v)
        d = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        return d.reshape(-1, 3)

    def back_project(self, u: np.ndarray, v: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Lift pixel indices with z-depths to camera-space points.

        Pixel (u, v) is sampled at its center (u+0.5, v+0.5).
        """
        x = (u + 0.5 - self.cx) * depth / self.fx
        y = (v + 0.5 - self.cy) * depth / self.fy
        return np.stack([x, y, depth], axis=-1)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "world_to_camera": [float(x) for x in self.pose.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PinholeCamera":
        pose = np.array(d.get("world_to_camera", np.eye(4).reshape(-1).tolist()),
                        dtype=np.float64).reshape(4, 4)
        return cls(fx=float(d["fx"]), fy=float(d["fy"]),
                   cx=float(d["cx"]), cy=float(d["cy"]),
                   width=int(d["width"]), height=int(d["height"]), pose=pose)


@dataclass
class Ray:
    """A ray with unit direction. Coordinates live in whatever frame the
    caller's mesh is in; the tracer does not reinterpret them."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-9:
            if n == 0:
                raise ValueError("zero-length ray direction")
            self.direction = self.direction / n


@dataclass
class Hit:
    t: float
    face_id: int
    u: float
    v: float
    z_depth: float


@dataclass
class HitList:
    """Ray-mesh intersections ordered by increasing t."""

    hits: list

    def __len__(self) -> int:
        return len(self.hits)

    def __iter__(self):
        return iter(self.hits)

    def __getitem__(self, i) -> Hit:
        return self.hits[i]

    def t_values(self) -> np.ndarray:
        return np.array([h.t for h in self.hits])

    def face_ids(self) -> np.ndarray:
        return np.array([h.face_id for h in self.hits], dtype=np.int64)
