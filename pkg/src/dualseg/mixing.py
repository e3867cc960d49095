"""Zero-centered mask generation and cross-sample patch mixing.

A zero-centered mask is an all-ones mask carrying a single axis-aligned
rectangular block of zeros.  Mixing two images under a mask keeps the
first image where the mask is 1 and splices in the second where it is 0;
applying the mask and its complement to a (labeled, unlabeled) pair
yields the two mixed images and the two mixed label maps used for
consistency training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TypeVar, Union

import numpy as np

from .datamodel import BinaryMask, LabelMap, Volume
from .errors import ValidationError

DEFAULT_ZERO_RATIO = 2.0 / 3.0

MixableT = TypeVar("MixableT", Volume, LabelMap)


@dataclass(frozen=True)
class MixConfig:
    """Mask geometry settings.

    zero_ratio is the per-axis fraction of each spatial dimension covered
    by the zero block (a scalar applies to every axis).  When
    per_student_masks is set, the trainer draws an independent mask per
    student instead of sharing one per pair.
    """

    zero_ratio: Union[float, tuple[float, ...]] = DEFAULT_ZERO_RATIO
    per_student_masks: bool = False

    def __post_init__(self):
        for r in self.ratios(None):
            if not (0.0 < r < 1.0):
                raise ValidationError(f"zero_ratio must lie in (0, 1), got {r}")

    def ratios(self, ndim: int | None) -> tuple[float, ...]:
        if isinstance(self.zero_ratio, (int, float)):
            return (float(self.zero_ratio),) * (ndim or 1)
        rs = tuple(float(r) for r in self.zero_ratio)
        if ndim is not None and len(rs) != ndim:
            raise ValidationError(f"zero_ratio has {len(rs)} entries for {ndim} axes")
        return rs


def zero_block_shape(shape: Sequence[int], zero_ratio) -> tuple[int, ...]:
    """Zero-block extent per axis: floor(ratio * dim), each required >= 1."""
    shape = tuple(int(d) for d in shape)
    if isinstance(zero_ratio, (int, float)):
        ratios = (float(zero_ratio),) * len(shape)
    else:
        ratios = tuple(float(r) for r in zero_ratio)
        if len(ratios) != len(shape):
            raise ValidationError(f"got {len(ratios)} ratios for {len(shape)} axes")
    block = []
    for d, r in zip(shape, ratios):
        if not (0.0 < r < 1.0):
            raise ValidationError(f"zero_ratio must lie in (0, 1), got {r}")
        size = math.floor(r * d)
        if size < 1:
            raise ValidationError(f"zero block would be empty on an axis of size {d} with ratio {r}")
        block.append(size)
    return tuple(block)


def make_zero_centered_mask(shape: Sequence[int], zero_ratio, rng_seed: int) -> BinaryMask:
    """All-ones mask with one zero block at a seed-determined uniform offset."""
    shape = tuple(int(d) for d in shape)
    if len(shape) not in (2, 3) or any(d < 1 for d in shape):
        raise ValidationError(f"degenerate mask shape {shape}")
    block = zero_block_shape(shape, zero_ratio)
    rng = np.random.default_rng(rng_seed)
    offsets = tuple(int(rng.integers(0, d - b + 1)) for d, b in zip(shape, block))
    mask = np.ones(shape, dtype=np.uint8)
    region = tuple(slice(o, o + b) for o, b in zip(offsets, block))
    mask[region] = 0
    return BinaryMask(mask)


def mix(a: MixableT, b: MixableT, mask: BinaryMask) -> MixableT:
    """``mask * a + (1 - mask) * b`` as an exact voxel selection.

    Works on a (Volume, Volume) or (LabelMap, LabelMap) pair; the mask is
    broadcast over a volume's channel axis.  Label output is integer
    selection, never interpolation.
    """
    if isinstance(a, Volume) and isinstance(b, Volume):
        if a.spatial_shape != b.spatial_shape or a.spatial_shape != mask.spatial_shape:
            raise ValidationError(
                f"spatial shapes differ: {a.spatial_shape}, {b.spatial_shape}, mask {mask.spatial_shape}"
            )
        if a.channels != b.channels:
            raise ValidationError(f"channel mismatch: {a.channels} vs {b.channels}")
        if a.spacing != b.spacing:
            raise ValidationError(f"spacing mismatch: {a.spacing} vs {b.spacing}")
        sel = mask.data.astype(bool)[None]
        return Volume(np.where(sel, a.data, b.data), a.spacing)
    if isinstance(a, LabelMap) and isinstance(b, LabelMap):
        if a.spatial_shape != b.spatial_shape or a.spatial_shape != mask.spatial_shape:
            raise ValidationError(
                f"spatial shapes differ: {a.spatial_shape}, {b.spatial_shape}, mask {mask.spatial_shape}"
            )
        if a.num_classes != b.num_classes:
            raise ValidationError(f"num_classes mismatch: {a.num_classes} vs {b.num_classes}")
        sel = mask.data.astype(bool)
        return LabelMap(np.where(sel, a.data, b.data), a.num_classes)
    raise ValidationError(f"cannot mix {type(a).__name__} with {type(b).__name__}")


def cutmix_pair(
    x_l: Volume,
    x_u: Volume,
    y_l: LabelMap,
    y_u_hat: LabelMap,
    mask: BinaryMask,
) -> tuple[Volume, Volume, LabelMap, LabelMap]:
    """Both complementary splices of a (labeled, unlabeled) pair.

    Returns (x_l2u, x_u2l, y_l2u, y_u2l): the first of each pair keeps the
    labeled content under the mask's ones, the second keeps the unlabeled
    content there.
    """
    x_l2u = mix(x_l, x_u, mask)
    x_u2l = mix(x_u, x_l, mask)
    y_l2u = mix(y_l, y_u_hat, mask)
    y_u2l = mix(y_u_hat, y_l, mask)
    return x_l2u, x_u2l, y_l2u, y_u2l
