"""Class activation maps over the first-person head features."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .tensor import bilinear_resize, minmax_normalize


@dataclass
class AffordanceHeatmap:
    map: np.ndarray      # (h,w), values in [0,1]
    affordance: int
    image_id: str = ""


def compute_cam(d_map, fc_weights, class_id: int) -> np.ndarray:
    """Weighted sum of feature maps by the classifier row of one class.

    Returns the raw map; values may be negative.
    """
    d_map = np.asarray(d_map, dtype=np.float64)
    fc_weights = np.asarray(fc_weights, dtype=np.float64)
    if d_map.ndim != 3 or fc_weights.ndim != 2:
        raise ShapeError(f"want features (d,h,w) and weights (n,d), got {d_map.shape}, {fc_weights.shape}")
    if fc_weights.shape[1] != d_map.shape[0]:
        raise ShapeError(f"feature dim mismatch: weights {fc_weights.shape}, features {d_map.shape}")
    if not 0 <= class_id < fc_weights.shape[0]:
        raise ParameterError(f"class {class_id} out of range for {fc_weights.shape[0]} classes")
    return np.tensordot(fc_weights[class_id], d_map, axes=([0], [0]))


def postprocess(raw, out_h: int, out_w: int, affordance=0, image_id="",
                relu_first=False) -> AffordanceHeatmap:
    """Normalize a raw activation map to [0,1] and resize to target resolution.

    `relu_first` clamps negatives before normalization, for comparison with
    the plain weighted sum.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if relu_first:
        raw = np.maximum(raw, 0.0)
    heat = bilinear_resize(minmax_normalize(raw), out_h, out_w)
    return AffordanceHeatmap(map=heat, affordance=affordance, image_id=image_id)
