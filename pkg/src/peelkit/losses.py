"""Deterministic map-space training objectives.

All terms are per-pixel mean absolute differences so values are
resolution-independent; the scalar for each term is the sum over layers.
The total objective weights the depth-offset, color, and smoothness
terms by lambda_rd, lambda_rgb, lambda_sm (defaults 1, 0.1, 0.001).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codec import PeeledMapStack
from .errors import DimensionMismatch, MissingRgb
from .fusion import ResidualDeformationStack


@dataclass
class LossWeights:
    lambda_rd: float = 1.0
    lambda_rgb: float = 0.1
    lambda_sm: float = 0.001

    def __post_init__(self):
        if min(self.lambda_rd, self.lambda_rgb, self.lambda_sm) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class LossReport:
    l_peel: float
    l_rd: float
    l_sm: float
    l_rgb: float
    total: float
    per_layer: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "l_peel": self.l_peel, "l_rd": self.l_rd,
            "l_sm": self.l_sm, "l_rgb": self.l_rgb, "total": self.total,
            "per_layer": {k: list(v) for k, v in self.per_layer.items()},
        }


def _check(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise DimensionMismatch(f"grid shapes differ: {a.shape} vs {b.shape}")


def loss_peel(pred: PeeledMapStack, gt: PeeledMapStack) -> np.ndarray:
    """Per-layer mean |pred - gt| over the depth grids."""
    _check(pred.depth, gt.depth)
    return np.abs(pred.depth - gt.depth).mean(axis=(1, 2))


def loss_rd(pred_rd: ResidualDeformationStack,
            gt_rd: ResidualDeformationStack) -> np.ndarray:
    """Per-layer mean |pred - gt| over offset grids (invalid pixels are 0)."""
    _check(pred_rd.delta, gt_rd.delta)
    return np.abs(pred_rd.delta - gt_rd.delta).mean(axis=(1, 2))


def image_gradients(img: np.ndarray):
    """Central-difference gradients with replicate-padded borders.

    img is (H, W); returns (gx, gy) of the same shape.
    """
    p = np.pad(img, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


def loss_smooth(pred_rd: ResidualDeformationStack,
                gt_rd: ResidualDeformationStack,
                smpl: PeeledMapStack) -> np.ndarray:
    """Per-layer L1 gap between spatial gradients of the composite maps
    (offset + prior depth); both gradient directions summed."""
    _check(pred_rd.delta, gt_rd.delta)
    _check(pred_rd.delta, smpl.depth)
    out = np.empty(smpl.layers)
    for i in range(smpl.layers):
        comp_gt = gt_rd.delta[i] + smpl.depth[i]
        comp_pred = pred_rd.delta[i] + smpl.depth[i]
        gx_gt, gy_gt = image_gradients(comp_gt)
        gx_pr, gy_pr = image_gradients(comp_pred)
        out[i] = np.abs(gx_gt - gx_pr).mean() + np.abs(gy_gt - gy_pr).mean()
    return out


def loss_rgb(pred: PeeledMapStack, gt: PeeledMapStack) -> np.ndarray:
    """Per-layer mean |pred - gt| over RGB, layers 2+ only.

    Layer 1 is the input image itself and carries no prediction; its
    entry in the result is 0.
    """
    if pred.rgb is None or gt.rgb is None:
        raise MissingRgb("both stacks must carry RGB grids")
    _check(pred.rgb, gt.rgb)
    out = np.zeros(pred.layers)
    for i in range(1, pred.layers):
        out[i] = np.abs(pred.rgb[i] - gt.rgb[i]).mean()
    return out


def total_loss(pred_peel: PeeledMapStack, gt_peel: PeeledMapStack,
               pred_rd: ResidualDeformationStack,
               gt_rd: ResidualDeformationStack,
               smpl: PeeledMapStack,
               weights: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of all four terms with a per-layer breakdown."""
    lp = loss_peel(pred_peel, gt_peel)
    lr = loss_rd(pred_rd, gt_rd)
    ls = loss_smooth(pred_rd, gt_rd, smpl)
    if pred_peel.rgb is not None and gt_peel.rgb is not None:
        lc = loss_rgb(pred_peel, gt_peel)
    else:
        lc = np.zeros(pred_peel.layers)
    total = (lp.sum() + weights.lambda_rd * lr.sum()
             + weights.lambda_rgb * lc.sum() + weights.lambda_sm * ls.sum())
    return LossReport(
        l_peel=float(lp.sum()), l_rd=float(lr.sum()),
        l_sm=float(ls.sum()), l_rgb=float(lc.sum()), total=float(total),
        per_layer={"l_peel": lp.tolist(), "l_rd": lr.tolist(),
                   "l_sm": ls.tolist(), "l_rgb": lc.tolist()},
    )
