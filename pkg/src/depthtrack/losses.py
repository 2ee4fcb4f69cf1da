"""Forward evaluations of the joint detection / self-supervised depth objective."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    alpha_focal: float = 2.0
    beta_focal: float = 4.0
    sigma: float = 2.0
    lam: float = 0.001
    gamma: float = 50.0
    w1: float = 0.0
    w2: float = 0.0

    def __post_init__(self):
        if self.alpha_focal < 0 or self.beta_focal < 0:
            raise InvalidArgumentError("focal exponents must be non-negative")
        if not self.sigma > 0:
            raise InvalidArgumentError("sigma must be positive")
        if self.lam < 0 or self.gamma < 0:
            raise InvalidArgumentError("lam and gamma must be non-negative")


def gaussian_heatmap(centers, sigma: float, width: int, height: int) -> np.ndarray:
    """Sum of isotropic Gaussians at ``centers`` (pixel ``(x, y)``), clamped to 1."""
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be positive")
    ys, xs = np.mgrid[0:height, 0:width].astype(float)
    m = np.zeros((height, width))
    for xc, yc in centers:
        m += np.exp(-((xs - xc) ** 2 + (ys - yc) ** 2) / (2 * sigma ** 2))
    return np.minimum(m, 1.0)


def focal_heatmap_loss(pred, gt, n_objects: int, w: LossWeights = LossWeights()) -> float:
    """Penalty-reduced focal loss over a predicted heatmap.

    Pixels where ``gt == 1`` are peaks; every other pixel uses the
    ``log(1 - p)`` branch down-weighted by ``(1 - gt) ** beta``.
    """
    if n_objects < 1:
        raise InvalidArgumentError("n_objects must be >= 1")
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    p = np.clip(pred, PROB_EPS, 1 - PROB_EPS)
    a, b = w.alpha_focal, w.beta_focal
    peak = gt == 1
    pos = ((1 - p[peak]) ** a * np.log(p[peak])).sum()
    rest = ~peak
    neg = ((1 - gt[rest]) ** b * p[rest] ** a * np.log(1 - p[rest])).sum()
    return float(-(pos + neg) / n_objects)


def box_size_loss(pred_boxes, gt_boxes) -> float:
    """L1 on centres plus 0.1 x L1 on sizes, boxes given as ``(cx, cy, w, h)``."""
    pred = np.asarray(pred_boxes, dtype=float).reshape(-1, 4)
    gt = np.asarray(gt_boxes, dtype=float).reshape(-1, 4)
    if len(pred) == 0 or pred.shape != gt.shape:
        raise InvalidArgumentError("need equal, non-empty lists of boxes")
    diff = np.abs(gt - pred)
    return float(diff[:, :2].sum() + 0.1 * diff[:, 2:].sum())


def detection_loss(l_heat: float, l_box: float) -> float:
    if l_heat < 0 or l_box < 0:
        raise InvalidArgumentError("loss terms must be non-negative")
    return l_heat + l_box


def depth_loss(reproj, smooth, lam: float = 0.001) -> float:
    """Per-scale reprojection terms plus ``lam``-weighted smoothness terms."""
    reproj = list(reproj)
    smooth = list(smooth)
    if not reproj or len(reproj) != len(smooth):
        raise InvalidArgumentError("need equal, non-empty per-scale lists")
    return float(math.fsum(r + lam * s for r, s in zip(reproj, smooth)))


def uncertainty_total(l_det: float, l_depth: float, w: LossWeights = LossWeights()) -> float:
    """Uncertainty-weighted sum of the detection and depth losses."""
    if l_det < 0 or l_depth < 0:
        raise InvalidArgumentError("losses must be non-negative")
    return 0.5 * (math.exp(-w.w1) * l_det + math.exp(-w.w2) * w.gamma * l_depth
                  + w.w1 + w.w2)


def uncertainty_grad(l_det: float, l_depth: float, w: LossWeights = LossWeights()):
    """Analytic ``(d/dw1, d/dw2)`` of :func:`uncertainty_total`."""
    return (0.5 * (1 - math.exp(-w.w1) * l_det),
            0.5 * (1 - math.exp(-w.w2) * w.gamma * l_depth))


def fixture_table():
    """``(name, computed, expected)`` rows for a handful of closed-form cases."""
    ln2q = 0.25 * math.log(2.0)
    hm = gaussian_heatmap([(5.0, 5.0)], 2.0, 11, 11)
    return [
        ("focal_peak", focal_heatmap_loss([[0.5]], [[1.0]], 1), ln2q),
        ("focal_background", focal_heatmap_loss([[0.5]], [[0.0]], 1), ln2q),
        ("box_center", box_size_loss([(1, 0, 4, 4)], [(0, 0, 4, 4)]), 1.0),
        ("box_size", box_size_loss([(0, 0, 5, 5)], [(0, 0, 4, 4)]), 0.2),
        ("depth_loss", depth_loss([0.1] * 5, [1.0] * 5, 0.001), 0.505),
        ("uncertainty", uncertainty_total(2.0, 0.01), 1.25),
        ("heatmap_sigma", float(hm[5, 7]), math.exp(-0.5)),
    ]
