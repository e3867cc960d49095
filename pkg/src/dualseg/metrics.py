"""Segmentation evaluation metrics: Dice, Jaccard, 95HD, ASD.

Surface distances are computed between boundary voxel sets in physical
(mm) coordinates; a boundary voxel is a foreground voxel with at least
one face-adjacent background neighbor (outside the array counts as
background).  Distances are exact pairwise computations, O(n^2) in the
boundary sizes, which is fine at the scales this package targets.

When either boundary is empty the distances are undefined and reported
as NaN rather than silently clamped to 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from .datamodel import LabelMap
from .errors import ValidationError

UNDEFINED = float("nan")


@dataclass(frozen=True)
class ClassMetrics:
    cls: int
    dice: float
    jaccard: float
    hd95_mm: float
    asd_mm: float


@dataclass(frozen=True)
class MetricsRecord:
    dice: float
    jaccard: float
    hd95_mm: float
    asd_mm: float
    per_class: tuple[ClassMetrics, ...]


def _check_maps(pred: LabelMap, gt: LabelMap) -> None:
    if pred.spatial_shape != gt.spatial_shape:
        raise ValidationError(f"shape mismatch: {pred.spatial_shape} vs {gt.spatial_shape}")


def dice_jaccard(pred: LabelMap, gt: LabelMap, cls: int) -> tuple[float, float]:
    """Overlap ratios on the class-``cls`` binary masks; (1, 1) if both empty."""
    _check_maps(pred, gt)
    a = pred.data == cls
    b = gt.data == cls
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 and nb == 0:
        return 1.0, 1.0
    inter = int((a & b).sum())
    union = na + nb - inter
    dice = 2.0 * inter / (na + nb)
    jacc = inter / union
    return dice, jacc


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """Coordinates (n, k) of foreground voxels touching background by a face."""
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    interior = ndimage.binary_erosion(mask, structure=structure, border_value=0)
    return np.argwhere(mask & ~interior)


def surface_distances(
    pred: LabelMap, gt: LabelMap, cls: int, spacing: Sequence[float]
) -> tuple[float, float]:
    """(95th-percentile Hausdorff, average surface distance) in mm.

    Directed distances run both ways; 95HD is the max of the two directed
    95th percentiles (linear interpolation), ASD the mean of the two
    directed means.  NaN when either surface is empty.
    """
    _check_maps(pred, gt)
    spacing = np.asarray([float(s) for s in spacing], dtype=float)
    if len(spacing) != pred.data.ndim or (spacing <= 0).any():
        raise ValidationError(f"bad spacing {spacing} for {pred.data.ndim}-d maps")
    bp = boundary_voxels(pred.data == cls)
    bg = boundary_voxels(gt.data == cls)
    if len(bp) == 0 or len(bg) == 0:
        return UNDEFINED, UNDEFINED
    d = cdist(bp * spacing, bg * spacing)
    d_pg = d.min(axis=1)  # pred boundary -> gt boundary
    d_gp = d.min(axis=0)
    hd95 = max(float(np.percentile(d_pg, 95)), float(np.percentile(d_gp, 95)))
    asd = 0.5 * (float(d_pg.mean()) + float(d_gp.mean()))
    return hd95, asd


def evaluate_case(pred: LabelMap, gt: LabelMap, spacing: Sequence[float]) -> MetricsRecord:
    """Per-foreground-class metrics plus their macro average.

    An undefined per-class distance propagates NaN into the macro
    distance columns.
    """
    _check_maps(pred, gt)
    if pred.num_classes != gt.num_classes:
        raise ValidationError(f"num_classes mismatch: {pred.num_classes} vs {gt.num_classes}")
    per_class = []
    for cls in range(1, gt.num_classes):
        d, j = dice_jaccard(pred, gt, cls)
        hd95, asd = surface_distances(pred, gt, cls, spacing)
        per_class.append(ClassMetrics(cls=cls, dice=d, jaccard=j, hd95_mm=hd95, asd_mm=asd))
    return MetricsRecord(
        dice=float(np.mean([c.dice for c in per_class])),
        jaccard=float(np.mean([c.jaccard for c in per_class])),
        hd95_mm=float(np.mean([c.hd95_mm for c in per_class])),
        asd_mm=float(np.mean([c.asd_mm for c in per_class])),
        per_class=tuple(per_class),
    )


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def write_report(records: Sequence[tuple[str, MetricsRecord]], path) -> Path:
    """CSV with one row per case plus a mean summary row.

    Summary distances average only the cases where they are defined.
    """
    path = Path(path)
    if not records:
        raise ValidationError("no cases to report")
    classes = [c.cls for c in records[0][1].per_class]
    header = ["case_id"]
    for cls in classes:
        header += [f"dice_c{cls}", f"jaccard_c{cls}", f"hd95_c{cls}", f"asd_c{cls}"]
    header += ["dice", "jaccard", "hd95_mm", "asd_mm"]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for case_id, rec in records:
            row = [case_id]
            for c in rec.per_class:
                row += [_fmt(c.dice), _fmt(c.jaccard), _fmt(c.hd95_mm), _fmt(c.asd_mm)]
            row += [_fmt(rec.dice), _fmt(rec.jaccard), _fmt(rec.hd95_mm), _fmt(rec.asd_mm)]
            writer.writerow(row)
        means = []
        for idx in range(4):
            vals = [(rec.dice, rec.jaccard, rec.hd95_mm, rec.asd_mm)[idx] for _, rec in records]
            defined = [v for v in vals if not math.isnan(v)]
            means.append(float(np.mean(defined)) if defined else UNDEFINED)
        writer.writerow(
            ["mean"] + [""] * (4 * len(classes)) + [_fmt(means[0]), _fmt(means[1]), _fmt(means[2]), _fmt(means[3])]
        )
    return path
