"""Choosing which student updates the teacher.

Both students predict the same unlabeled batch; on the voxels where their
argmax classes agree, each student's confidence is scored and the more
confident one (lower score) is selected.  The default score is the self
cross-entropy sum(-log max-prob); Shannon entropy is available as an
alternative scoring rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import BinaryMask, ProbMap
from .errors import ValidationError
from .losses import LOG_CLAMP

SCORE_SELF_CE = "self_ce"
SCORE_SHANNON = "shannon"


@dataclass(frozen=True)
class SelectionOutcome:
    chosen: int  # 1 or 2
    scores: tuple[float, float]
    agreement_fraction: float
    fallback_used: bool


def _check_congruent(p1: ProbMap, p2: ProbMap) -> None:
    if p1.data.shape != p2.data.shape:
        raise ValidationError(f"prob maps differ in shape: {p1.data.shape} vs {p2.data.shape}")


def agreement_mask(p1: ProbMap, p2: ProbMap) -> BinaryMask:
    """1 where both argmax classes coincide (XNOR of the class maps)."""
    _check_congruent(p1, p2)
    return BinaryMask((p1.argmax() == p2.argmax()).astype(np.uint8))


def _voxel_scores(p: ProbMap, score: str) -> np.ndarray:
    if score == SCORE_SELF_CE:
        return -np.log(np.clip(p.data.max(axis=0), LOG_CLAMP, 1.0))
    if score == SCORE_SHANNON:
        safe = np.clip(p.data, LOG_CLAMP, 1.0)
        return -(p.data * np.log(safe)).sum(axis=0)
    raise ValidationError(f"unknown score {score!r}")


def self_entropy_score(p: ProbMap, mask: BinaryMask, score: str = SCORE_SELF_CE) -> float:
    """Confidence score summed over masked voxels; 0 on an empty mask."""
    if mask.spatial_shape != p.spatial_shape:
        raise ValidationError(f"mask shape {mask.spatial_shape} != prob shape {p.spatial_shape}")
    per_voxel = _voxel_scores(p, score)
    return float((per_voxel * mask.data).sum())


def select_student(p1: ProbMap, p2: ProbMap, score: str = SCORE_SELF_CE) -> SelectionOutcome:
    """Pick the lower-scoring (more confident) student on the agreement region.

    Ties go to student 1.  If the students agree nowhere, the masked score
    is meaningless, so the fallback compares mean per-voxel scores over
    all voxels instead and flags that it did.
    """
    _check_congruent(p1, p2)
    m = agreement_mask(p1, p2)
    n_agree = m.count_ones()
    fallback = n_agree == 0
    if fallback:
        e1 = float(_voxel_scores(p1, score).mean())
        e2 = float(_voxel_scores(p2, score).mean())
    else:
        e1 = self_entropy_score(p1, m, score)
        e2 = self_entropy_score(p2, m, score)
    chosen = 1 if e1 <= e2 else 2
    return SelectionOutcome(
        chosen=chosen,
        scores=(e1, e2),
        agreement_fraction=n_agree / m.data.size,
        fallback_used=fallback,
    )
