"""Teacher inference and pseudo-label cleanup.

Raw teacher predictions on unlabeled volumes tend to contain spurious
islands; keeping only the largest connected component of each foreground
class removes most of that noise before the labels are used as mixing
targets.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import ndimage

from .datamodel import LabelMap, ProbMap, Volume
from .errors import ValidationError


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Numerically stable channel softmax over a (C, spatial) array."""
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def predict(teacher_forward: Callable[[Volume], np.ndarray], x_u: Volume) -> ProbMap:
    """Run a deterministic forward function and normalize to a ProbMap."""
    logits = np.asarray(teacher_forward(x_u))
    if logits.ndim - 1 != len(x_u.spatial_shape) or logits.shape[1:] != x_u.spatial_shape:
        raise ValidationError(
            f"forward returned shape {logits.shape} for input spatial shape {x_u.spatial_shape}"
        )
    return ProbMap(softmax_probs(logits.astype(np.float64)))


def _face_structure(ndim: int) -> np.ndarray:
    # 4-connectivity in 2D, 6-connectivity in 3D
    return ndimage.generate_binary_structure(ndim, 1)


def largest_component_filter(raw: LabelMap) -> LabelMap:
    """Keep only the largest face-connected component of each foreground class.

    Other voxels of that class become background (class 0).  Among
    equally-sized components the one whose first voxel appears earliest in
    row-major order wins, which makes the result deterministic.
    """
    out = np.array(raw.data)
    structure = _face_structure(out.ndim)
    for cls in range(1, raw.num_classes):
        fg = raw.data == cls
        if not fg.any():
            continue
        labels, n = ndimage.label(fg, structure=structure)
        if n <= 1:
            continue
        sizes = np.bincount(labels.ravel())
        sizes[0] = 0
        best_size = sizes.max()
        candidates = np.flatnonzero(sizes == best_size)
        if len(candidates) == 1:
            keep = int(candidates[0])
        else:
            # tie-break: smallest first (minimum) linear index
            flat = labels.ravel()
            keep = min(candidates, key=lambda comp: int(np.flatnonzero(flat == comp)[0]))
        out[fg & (labels != keep)] = 0
    return LabelMap(out, raw.num_classes)
