"""Bounding volume hierarchy over triangle meshes.

Median-split on the longest centroid axis, leaves of at most 4 faces.
The build is single-threaded and deterministic; traversal is handled by
the compiled kernels and is safe for concurrent read-only use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyMesh
from .geometry import Hit, HitList, Ray, TriangleMesh

LEAF_SIZE = 4
SELF_HIT_EPS = 1e-6  # minimum t; prevents re-hitting the launch surface


@dataclass
class Bvh:
    """Flat-array BVH. Leaves have left == -1 and index into prim_order;
    face_ids maps packed triangle index back to the source mesh face."""

    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    prim_order: np.ndarray
    face_ids: np.ndarray
    tri_a: np.ndarray
    tri_b: np.ndarray
    tri_c: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.node_left)

    @property
    def num_faces(self) -> int:
        return len(self.face_ids)


def build_bvh(mesh: TriangleMesh) -> Bvh:
    """Build a BVH over the mesh's valid faces.

    Raises EmptyMesh when no traceable face exists.
    """
    face_ids = np.flatnonzero(mesh.face_valid)
    if len(face_ids) == 0:
        raise EmptyMesh("mesh has no valid faces to trace")
    faces = mesh.faces[face_ids]
    tri_a = np.ascontiguousarray(mesh.vertices[faces[:, 0]])
    tri_b = np.ascontiguousarray(mesh.vertices[faces[:, 1]])
    tri_c = np.ascontiguousarray(mesh.vertices[faces[:, 2]])
    n = len(faces)
    tri_min = np.minimum(np.minimum(tri_a, tri_b), tri_c)
    tri_max = np.maximum(np.maximum(tri_a, tri_b), tri_c)
    centroids = (tri_a + tri_b + tri_c) / 3.0

    prim = np.arange(n, dtype=np.int64)
    cap = 2 * n + 1  # binary tree over <= n leaves
    node_min = np.empty((cap, 3))
    node_max = np.empty((cap, 3))
    node_left = np.empty(cap, dtype=np.int64)
    node_right = np.empty(cap, dtype=np.int64)
    node_start = np.empty(cap, dtype=np.int64)
    node_count = np.empty(cap, dtype=np.int64)
    used = _kernels.build_bvh_arrays(tri_min, tri_max, centroids, LEAF_SIZE,
                                     prim, node_min, node_max, node_left,
                                     node_right, node_start, node_count)
    return Bvh(
        node_min=node_min[:used].copy(),
        node_max=node_max[:used].copy(),
        node_left=node_left[:used].copy(),
        node_right=node_right[:used].copy(),
        node_start=node_start[:used].copy(),
        node_count=node_count[:used].copy(),
        prim_order=prim,
        face_ids=face_ids.astype(np.int64),
        tri_a=tri_a,
        tri_b=tri_b,
        tri_c=tri_c,
    )


def trace_batch(bvh: Bvh, origins: np.ndarray, directions: np.ndarray,
                max_hits: int, t_max: float = np.inf):
    """Multi-hit trace of a ray batch.

    Returns (t, face, u, v, count) arrays shaped (R, max_hits) / (R,);
    unused slots hold t=inf, face=-1.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    if max_hits < 1:
        raise ValueError("max_hits must be >= 1")
    max_hits = min(max_hits, _kernels.MAX_HITS_BUFFER)
    n_rays = len(origins)
    out_t = np.full((n_rays, max_hits), np.inf)
    out_face = np.full((n_rays, max_hits), -1, dtype=np.int64)
    out_u = np.zeros((n_rays, max_hits))
    out_v = np.zeros((n_rays, max_hits))
    out_n = np.zeros(n_rays, dtype=np.int64)
    _kernels.trace_rays(origins, directions, SELF_HIT_EPS, t_max,
                        bvh.node_min, bvh.node_max, bvh.node_left,
                        bvh.node_right, bvh.node_start, bvh.node_count,
                        bvh.prim_order, bvh.face_ids,
                        bvh.tri_a, bvh.tri_b, bvh.tri_c, max_hits,
                        out_t, out_face, out_u, out_v, out_n)
    return out_t, out_face, out_u, out_v, out_n


def intersect_all(bvh: Bvh, mesh: TriangleMesh, ray: Ray, max_hits: int,
                  camera_pose: np.ndarray | None = None) -> HitList:
    """Nearest max_hits ray-mesh intersections in increasing t.

    z_depth is the camera-space z of each hit point; with no camera_pose
    the mesh frame is taken as the camera frame.
    """
    t, face, u, v, n = trace_batch(bvh, ray.origin[None, :],
                                   ray.direction[None, :], max_hits)
    count = int(n[0])
    hits = []
    for k in range(count):
        p = ray.origin + t[0, k] * ray.direction
        if camera_pose is not None:
            p = camera_pose[:3, :3] @ p + camera_pose[:3, 3]
        hits.append(Hit(t=float(t[0, k]), face_id=int(face[0, k]),
                        u=float(u[0, k]), v=float(v[0, k]), z_depth=float(p[2])))
    return HitList(hits=[h for h in hits if h.z_depth > 0])


def surface_distances(bvh: Bvh, points: np.ndarray) -> np.ndarray:
    """Exact unsigned point-to-mesh distances, one per query point."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    out = np.empty(len(points))
    _kernels.closest_distances(points, bvh.node_min, bvh.node_max,
                               bvh.node_left, bvh.node_right,
                               bvh.node_start, bvh.node_count,
                               bvh.prim_order, bvh.tri_a, bvh.tri_b,
                               bvh.tri_c, out)
    return out


def mark_occluded_faces(bvh: Bvh, origins: np.ndarray, directions: np.ndarray,
                        num_faces: int, max_distance: float) -> np.ndarray:
    """Boolean mask over mesh faces hit by any ray within max_distance."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    directions = np.ascontiguousarray(directions, dtype=np.float64)
    mask = np.zeros(num_faces, dtype=np.bool_)
    _kernels.mark_hit_faces(origins, directions, SELF_HIT_EPS, max_distance,
                            bvh.node_min, bvh.node_max, bvh.node_left,
                            bvh.node_right, bvh.node_start, bvh.node_count,
                            bvh.prim_order, bvh.face_ids,
                            bvh.tri_a, bvh.tri_b, bvh.tri_c, mask)
    return mask
