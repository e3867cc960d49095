"""Training losses.

Every loss accepts either the package's value types (ProbMap/LabelMap/
BinaryMask, or bare numpy arrays) and returns a Python float, or torch
tensors and returns a differentiable 0-dim tensor.  The trainer uses the
tensor path for backprop; tests and oracles use the numpy path.

Probability inputs are (C, D1..Dk) channels-first; label inputs are
integer (D1..Dk) maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .datamodel import BinaryMask, LabelMap, ProbMap
from .errors import ValidationError

DICE_SMOOTH = 1e-5
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the mixed-sample loss (alpha) and the masked MSE (beta)."""

    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.alpha == 0 and self.beta == 0:
            raise ValidationError("loss weights must not both be zero")


def _as_prob_tensor(p) -> tuple[torch.Tensor, bool]:
    """Return (tensor, was_tensor). Numpy inputs are promoted to float64."""
    if isinstance(p, torch.Tensor):
        return p, True
    if isinstance(p, ProbMap):
        p = p.data
    return torch.as_tensor(np.array(p, dtype=np.float64)), False


def _as_label_tensor(y) -> torch.Tensor:
    if isinstance(y, torch.Tensor):
        return y.long()
    if isinstance(y, LabelMap):
        y = y.data
    return torch.as_tensor(np.array(y, dtype=np.int64))


def _as_mask_tensor(m) -> torch.Tensor:
    if isinstance(m, torch.Tensor):
        return m
    if isinstance(m, BinaryMask):
        m = m.data
    return torch.as_tensor(np.array(m))


def _check_pair(p: torch.Tensor, y: torch.Tensor) -> None:
    if p.ndim != y.ndim + 1 or tuple(p.shape[1:]) != tuple(y.shape):
        raise ValidationError(f"prediction {tuple(p.shape)} does not match labels {tuple(y.shape)}")


def _one_hot(y: torch.Tensor, num_classes: int, dtype: torch.dtype) -> torch.Tensor:
    oh = torch.nn.functional.one_hot(y, num_classes=num_classes)
    return oh.movedim(-1, 0).to(dtype)


def soft_dice_loss(p, y, smooth: float = DICE_SMOOTH):
    """1 minus the class-mean soft Dice overlap between p and one-hot y."""
    p_t, was_tensor = _as_prob_tensor(p)
    y_t = _as_label_tensor(y)
    _check_pair(p_t, y_t)
    c = p_t.shape[0]
    y1 = _one_hot(y_t, c, p_t.dtype)
    axes = tuple(range(1, p_t.ndim))
    inter = (p_t * y1).sum(dim=axes)
    denom = p_t.sum(dim=axes) + y1.sum(dim=axes)
    dice = (2.0 * inter + smooth) / (denom + smooth)
    loss = 1.0 - dice.mean()
    return loss if was_tensor else float(loss)


def ce_loss(p, y, clamp: float = LOG_CLAMP):
    """Mean voxelwise negative log-probability of the true class."""
    p_t, was_tensor = _as_prob_tensor(p)
    y_t = _as_label_tensor(y)
    _check_pair(p_t, y_t)
    flat_p = p_t.reshape(p_t.shape[0], -1)
    flat_y = y_t.reshape(-1)
    p_true = flat_p.gather(0, flat_y.unsqueeze(0)).squeeze(0)
    loss = -(p_true.clamp(clamp, 1.0).log()).mean()
    return loss if was_tensor else float(loss)


def combined_seg_loss(p, y):
    """Soft Dice plus cross-entropy."""
    p_t, was_tensor = _as_prob_tensor(p)
    y_t = _as_label_tensor(y)
    loss = soft_dice_loss(p_t, y_t) + ce_loss(p_t, y_t)
    return loss if was_tensor else float(loss)


def cutmix_loss(p_u2l, p_l2u, y_u2l, y_l2u):
    """Combined segmentation loss summed over both mixing directions."""
    a, was_tensor = _as_prob_tensor(p_u2l)
    b, bt = _as_prob_tensor(p_l2u)
    was_tensor = was_tensor or bt
    loss = combined_seg_loss(a, _as_label_tensor(y_u2l)) + combined_seg_loss(b, _as_label_tensor(y_l2u))
    return loss if was_tensor else float(loss)


def disagreement_mask(p1, p2):
    """1 where the argmax classes of two predictions differ, else 0.

    Tensor inputs return a uint8 tensor; anything else returns a BinaryMask.
    """
    p1_t, t1 = _as_prob_tensor(p1)
    p2_t, t2 = _as_prob_tensor(p2)
    if tuple(p1_t.shape) != tuple(p2_t.shape):
        raise ValidationError(f"shape mismatch: {tuple(p1_t.shape)} vs {tuple(p2_t.shape)}")
    diff = (p1_t.argmax(dim=0) != p2_t.argmax(dim=0)).to(torch.uint8)
    if t1 or t2:
        return diff
    return BinaryMask(diff.numpy())


def _masked_mse(p: torch.Tensor, y: torch.Tensor, m: torch.Tensor, over_all_voxels: bool) -> torch.Tensor:
    _check_pair(p, y)
    if tuple(m.shape) != tuple(y.shape):
        raise ValidationError(f"mask shape {tuple(m.shape)} does not match labels {tuple(y.shape)}")
    c = p.shape[0]
    y1 = _one_hot(y, c, p.dtype)
    sq = (p - y1) ** 2 * m.to(p.dtype).unsqueeze(0)
    count = y.numel() if over_all_voxels else int(m.sum())
    if count == 0:
        return torch.zeros((), dtype=p.dtype)
    return sq.sum() / (count * c)


def uncertainty_mse_loss(p_u2l, p_l2u, y_u2l, y_l2u, m_u2l, m_l2u, over_all_voxels: bool = False):
    """Squared error against one-hot targets, restricted to disagreement regions.

    Each direction is normalized by (masked voxel count * channels); an
    empty mask contributes 0.  With ``over_all_voxels`` the normalizer is
    the full voxel count instead (the alternative reduction).
    """
    a, t1 = _as_prob_tensor(p_u2l)
    b, t2 = _as_prob_tensor(p_l2u)
    was_tensor = t1 or t2
    loss = _masked_mse(a, _as_label_tensor(y_u2l), _as_mask_tensor(m_u2l), over_all_voxels) + _masked_mse(
        b, _as_label_tensor(y_l2u), _as_mask_tensor(m_l2u), over_all_voxels
    )
    return loss if was_tensor else float(loss)


def _scalar(x) -> float:
    return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)


def total_student_loss(cm, mse, weights: LossWeights):
    """``alpha * cm + beta * mse``."""
    if _scalar(cm) < 0 or _scalar(mse) < 0:
        raise ValidationError("loss components must be non-negative")
    return weights.alpha * cm + weights.beta * mse
