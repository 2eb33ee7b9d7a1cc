"""Ground-truth construction: garment-body subtraction and augmented
peeled-stack generation.

Subtraction removes body faces hidden inside a garment by casting short
rays inward from the garment surface; any body face hit within reach is
dropped. Ground-truth generation rotates clothed and prior meshes
together about the yaw axis, encodes both, and stores the depth-offset
maps alongside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .bvh import build_bvh, mark_occluded_faces
from .codec import PeeledMapStack, encode_peeled, write_peel
from .errors import EmptyMesh
from .fusion import RD_LIMIT_DEFAULT, compute_rd_gt, write_rd_peel
from .geometry import PinholeCamera, TriangleMesh, merge_meshes, rotate_yaw
from .meshio import save_mesh


@dataclass
class SubtractionConfig:
    rays_per_face: int = 4
    max_interior_distance: float = 0.25  # meters
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.rays_per_face < 1:
            raise ValueError("rays_per_face must be >= 1")
        if self.max_interior_distance <= 0:
            raise ValueError("max_interior_distance must be positive")


def _interior_rays(garment: TriangleMesh, cfg: SubtractionConfig):
    """Ray origins on each garment face interior, directions pointing
    inward (opposite the outward-oriented face normal)."""
    valid = garment.face_valid
    faces = garment.faces[valid]
    tri = garment.vertices[faces]           # (F, 3, 3)
    centroids = tri.mean(axis=1)
    normals = garment.face_normals()[valid]
    # orient each normal outward relative to the garment centroid;
    # simulation meshes often have inconsistent winding
    outward = centroids - garment.centroid()
    flip = np.einsum("ij,ij->i", normals, outward) < 0
    normals[flip] = -normals[flip]

    origins = [centroids]
    k = 1
    scale = 0.25
    while k < cfg.rays_per_face:
        for corner in range(3):
            if k >= cfg.rays_per_face:
                break
            origins.append(centroids + scale * (tri[:, corner] - centroids))
            k += 1
        scale *= 2.0
    origins = np.vstack(origins[:cfg.rays_per_face])
    dirs = np.tile(-normals, (cfg.rays_per_face, 1))
    return origins, dirs


def occluded_body_faces(body: TriangleMesh, garment: TriangleMesh,
                        cfg: SubtractionConfig = SubtractionConfig()) -> np.ndarray:
    """Mask over body faces hit by interior garment rays within reach."""
    if body.num_faces == 0 or garment.num_faces == 0:
        raise EmptyMesh("subtraction needs non-empty body and garment meshes")
    bvh = build_bvh(body)
    origins, dirs = _interior_rays(garment, cfg)
    return mark_occluded_faces(bvh, origins, dirs, body.num_faces,
                               cfg.max_interior_distance)


def subtract_body(body: TriangleMesh, garment: TriangleMesh,
                  cfg: SubtractionConfig = SubtractionConfig()) -> TriangleMesh:
    """Garment plus only the body faces not occluded inside it."""
    occluded = occluded_body_faces(body, garment, cfg)
    keep = ~occluded
    surviving = TriangleMesh(body.vertices, body.faces[keep],
                             body.colors,
                             body.face_valid[keep])
    return merge_meshes(garment, surviving)


def make_ground_truth(clothed: TriangleMesh, smpl: TriangleMesh,
                      camera: PinholeCamera, yaw_angles,
                      out_dir, layers: int = 4,
                      rd_limit: float = RD_LIMIT_DEFAULT,
                      basename: str = "sample") -> dict:
    """Encode (clothed, prior, offsets) stacks for the identity view plus
    each yaw angle, writing PEEL files and a manifest.

    Both meshes rotate about the clothed mesh's centroid so they stay
    registered. Returns the manifest dict (also written as JSON).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pivot = clothed.centroid()
    samples = []
    clothed_path = out_dir / f"{basename}_clothed.obj"
    smpl_path = out_dir / f"{basename}_smpl.obj"
    save_mesh(clothed_path, clothed)
    save_mesh(smpl_path, smpl)
    for angle in [0.0] + [float(a) for a in yaw_angles]:
        tag = f"{basename}_yaw{angle:+g}"
        c_rot = rotate_yaw(clothed, angle, pivot=pivot)
        s_rot = rotate_yaw(smpl, angle, pivot=pivot)
        d_clothed = encode_peeled(c_rot, camera, layers)
        d_smpl = encode_peeled(s_rot, camera, layers)
        rd = compute_rd_gt(d_smpl, d_clothed, rd_limit)
        clothed_peel = out_dir / f"{tag}_clothed.peel"
        smpl_peel = out_dir / f"{tag}_smpl.peel"
        rd_peel = out_dir / f"{tag}_rd.peel"
        write_peel(clothed_peel, d_clothed)
        write_peel(smpl_peel, d_smpl)
        write_rd_peel(rd_peel, rd, camera)
        samples.append({
            "clothed_mesh": clothed_path.name,
            "smpl_mesh": smpl_path.name,
            "view_angle": angle,
            "clothed_peel": clothed_peel.name,
            "smpl_peel": smpl_peel.name,
            "rd_peel": rd_peel.name,
        })
    manifest = {"samples": samples, "layers": layers, "rd_limit": rd_limit}
    atomic_write_text(out_dir / f"{basename}_manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
