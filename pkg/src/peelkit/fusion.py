"""Residual deformation between prior and clothed peeled depths, and
mask-gated fusion of prior, offsets, and directly predicted depths.

Per pixel and layer, fusion selects (prior + offset) where the offset
branch is valid and the predicted depth is foreground, otherwise the
predicted depth. Fused layers are re-sorted ascending afterwards so the
stack invariants survive mixing the two sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes
from .codec import (FLAG_SIGNED_DELTA, PEEL_VERSION, PeeledMapStack,
                    _HEADER, _parse_header, _read_camera_sidecar,
                    _write_camera_sidecar, PEEL_MAGIC)
from .errors import DimensionMismatch, InvalidFormat
from .geometry import PinholeCamera

RD_LIMIT_DEFAULT = 0.15  # meters; offsets are clamped to [-limit, +limit]


@dataclass
class ResidualDeformationStack:
    """Per-pixel, per-layer signed depth offsets with a validity grid.

    delta is zero wherever validity is False; |delta| never exceeds
    rd_limit where valid.
    """

    delta: np.ndarray
    validity: np.ndarray
    rd_limit: float = RD_LIMIT_DEFAULT

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64)
        self.validity = np.asarray(self.validity, dtype=bool)
        if self.delta.shape != self.validity.shape or self.delta.ndim != 3:
            raise ValueError("delta and validity must be matching (L, H, W) grids")

    @property
    def layers(self) -> int:
        return self.delta.shape[0]

    def validate(self) -> None:
        if not np.all(np.isfinite(self.delta)):
            raise ValueError("delta contains NaN/Inf")
        if np.any(self.delta[~self.validity] != 0.0):
            raise ValueError("nonzero delta on invalid pixels")
        if np.any(np.abs(self.delta[self.validity]) > self.rd_limit + 1e-12):
            raise ValueError("delta exceeds rd_limit")


def _check_shapes(a, b):
    if a.shape != b.shape:
        raise DimensionMismatch(f"grid shapes differ: {a.shape} vs {b.shape}")


def compute_rd_gt(smpl: PeeledMapStack, clothed: PeeledMapStack,
                  rd_limit: float = RD_LIMIT_DEFAULT) -> ResidualDeformationStack:
    """Ground-truth offsets: clothed depth minus prior depth, clamped.

    Valid only where both stacks are foreground at a pixel/layer.
    """
    _check_shapes(smpl.depth, clothed.depth)
    valid = (smpl.depth > 0) & (clothed.depth > 0)
    delta = np.where(valid, clothed.depth - smpl.depth, 0.0)
    if np.isfinite(rd_limit):
        delta = np.clip(delta, -rd_limit, rd_limit)
    return ResidualDeformationStack(delta=delta, validity=valid, rd_limit=rd_limit)


def fusion_mask(rd: ResidualDeformationStack, peel: PeeledMapStack) -> np.ndarray:
    """Boolean gate: offset branch valid AND predicted depth foreground."""
    _check_shapes(rd.delta, peel.depth)
    return rd.validity & (peel.depth > 0)


def fuse_maps(smpl: PeeledMapStack, rd: ResidualDeformationStack,
              peel: PeeledMapStack) -> PeeledMapStack:
    """Fuse prior+offset and predicted depths, then restore layer order.

    Every output pixel equals exactly one of (smpl + delta) or peel
    before re-sorting; re-sorting pushes background zeros to the suffix.
    """
    _check_shapes(smpl.depth, peel.depth)
    mask = fusion_mask(rd, peel)
    fused = np.where(mask, rd.delta + smpl.depth, peel.depth)
    fused = resort_layers(fused)
    return PeeledMapStack(depth=fused, camera=smpl.camera)


def resort_layers(depth: np.ndarray) -> np.ndarray:
    """Sort each pixel's depths ascending with zeros moved to the suffix."""
    work = np.where(depth > 0, depth, np.inf)
    work = np.sort(work, axis=0)
    return np.where(np.isfinite(work), work, 0.0)


# ---------------------------------------------------------------------------
# RD variant of the PEEL container: signed-delta flag, float32 delta grid,
# then a packed validity bitmap.
# ---------------------------------------------------------------------------


def write_rd_peel(path, rd: ResidualDeformationStack, camera: PinholeCamera) -> None:
    path = Path(path)
    layers, h, w = rd.delta.shape
    blob = bytearray(_HEADER.pack(PEEL_MAGIC, PEEL_VERSION, FLAG_SIGNED_DELTA,
                                  layers, w, h))
    blob += rd.delta.astype("<f4").tobytes()
    blob += np.packbits(rd.validity.reshape(-1)).tobytes()
    atomic_write_bytes(path, bytes(blob))
    _write_camera_sidecar(path, camera)


def read_rd_peel(path, rd_limit: float = RD_LIMIT_DEFAULT):
    """Returns (ResidualDeformationStack, PinholeCamera)."""
    path = Path(path)
    data = path.read_bytes()
    layers, width, height, flags, offset = _parse_header(path, data)
    if not flags & FLAG_SIGNED_DELTA:
        raise InvalidFormat(f"{path}: not a signed-delta PEEL file")
    n = layers * height * width
    delta = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
    delta = delta.reshape(layers, height, width).astype(np.float64)
    offset += 4 * n
    packed = np.frombuffer(data, dtype=np.uint8, offset=offset)
    validity = np.unpackbits(packed, count=n).astype(bool).reshape(layers, height, width)
    camera = _read_camera_sidecar(path)
    # float32 widening can nudge clamped values past the limit
    if np.isfinite(rd_limit):
        delta = np.clip(delta, -rd_limit, rd_limit)
    rd = ResidualDeformationStack(delta=np.where(validity, delta, 0.0),
                                  validity=validity, rd_limit=rd_limit)
    return rd, camera
