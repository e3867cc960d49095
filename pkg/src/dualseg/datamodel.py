"""Core value types shared by every module.

All types are plain immutable containers around numpy arrays with their
invariants checked at construction time.  Arrays are copied in and marked
read-only, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CongruenceError, ValidationError

SPATIAL_RANKS = (2, 3)


def _frozen_array(data, dtype=None) -> np.ndarray:
    arr = np.array(data, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Volume:
    """Channels-first real-valued image: ``data`` has shape (C, D1..Dk).

    ``spacing`` is the physical voxel size per spatial axis in mm.
    """

    data: np.ndarray
    spacing: tuple[float, ...]

    def __init__(self, data, spacing: Sequence[float]):
        arr = _frozen_array(data)
        if not np.issubdtype(arr.dtype, np.floating):
            raise ValidationError(f"volume data must be floating, got {arr.dtype}")
        k = arr.ndim - 1
        if k not in SPATIAL_RANKS:
            raise ValidationError(f"volume must be (C, D1..Dk) with k in {SPATIAL_RANKS}, got shape {arr.shape}")
        if arr.shape[0] < 1 or any(d < 1 for d in arr.shape[1:]):
            raise ValidationError(f"degenerate volume shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("volume contains non-finite values")
        sp = tuple(float(s) for s in spacing)
        if len(sp) != k:
            raise ValidationError(f"spacing has {len(sp)} entries for {k} spatial axes")
        if any(s <= 0 for s in sp):
            raise ValidationError(f"spacing must be positive, got {sp}")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", sp)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.data.shape[1:]


@dataclass(frozen=True)
class LabelMap:
    """Integer class map of shape (D1..Dk) with values in [0, num_classes)."""

    data: np.ndarray
    num_classes: int

    def __init__(self, data, num_classes: int):
        arr = _frozen_array(data)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError(f"label data must be integer, got {arr.dtype}")
        if arr.ndim not in SPATIAL_RANKS:
            raise ValidationError(f"label map must be k-dim with k in {SPATIAL_RANKS}, got shape {arr.shape}")
        nc = int(num_classes)
        if nc < 2:
            raise ValidationError(f"num_classes must be >= 2, got {nc}")
        if arr.size and (arr.min() < 0 or arr.max() >= nc):
            raise ValidationError(
                f"label values must lie in [0, {nc}), got range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "num_classes", nc)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.data.shape


PROB_SUM_TOL = 1e-5


@dataclass(frozen=True)
class ProbMap:
    """Per-voxel class distribution of shape (num_classes, D1..Dk)."""

    data: np.ndarray

    def __init__(self, data):
        arr = _frozen_array(data)
        if not np.issubdtype(arr.dtype, np.floating):
            raise ValidationError(f"probability data must be floating, got {arr.dtype}")
        if arr.ndim - 1 not in SPATIAL_RANKS:
            raise ValidationError(f"prob map must be (C, D1..Dk), got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValidationError("prob map needs at least 2 classes")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = arr.sum(axis=0)
        if arr.size and np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            raise ValidationError(
                f"per-voxel channel sums deviate from 1 by up to {np.abs(sums - 1.0).max():.3g}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    def argmax(self) -> np.ndarray:
        return np.argmax(self.data, axis=0)


@dataclass(frozen=True)
class BinaryMask:
    """A {0,1} mask of shape (D1..Dk)."""

    data: np.ndarray

    def __init__(self, data):
        arr = np.array(data)
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError(f"mask must be integer or bool, got {arr.dtype}")
        if arr.ndim not in SPATIAL_RANKS:
            raise ValidationError(f"mask must be k-dim with k in {SPATIAL_RANKS}, got shape {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValidationError("mask values must be exactly 0 or 1")
        arr = _frozen_array(arr.astype(np.uint8))
        object.__setattr__(self, "data", arr)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.data.shape

    def count_ones(self) -> int:
        return int(self.data.sum())

    def count_zeros(self) -> int:
        return int(self.data.size - self.data.sum())


@dataclass(frozen=True)
class ParameterTree:
    """Named, ordered collection of numeric arrays (network weights).

    Two trees are congruent iff they share names, order, and per-entry
    shapes.  Entries are immutable.
    """

    entries: tuple[tuple[str, np.ndarray], ...]

    def __init__(self, entries: Sequence[tuple[str, np.ndarray]]):
        frozen = []
        seen = set()
        for name, arr in entries:
            if name in seen:
                raise ValidationError(f"duplicate parameter name {name!r}")
            seen.add(name)
            frozen.append((str(name), _frozen_array(arr)))
        object.__setattr__(self, "entries", tuple(frozen))

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def array(self, name: str) -> np.ndarray:
        for n, arr in self.entries:
            if n == name:
                return arr
        raise KeyError(name)

    def num_values(self) -> int:
        return int(sum(arr.size for _, arr in self.entries))


def check_congruent(a: ParameterTree, b: ParameterTree) -> None:
    """Raise :class:`CongruenceError` naming the first mismatching entry."""
    if len(a) != len(b):
        raise CongruenceError(f"trees have {len(a)} vs {len(b)} entries")
    for (na, aa), (nb, ab) in zip(a.entries, b.entries):
        if na != nb:
            raise CongruenceError(f"entry name mismatch: {na!r} vs {nb!r}")
        if aa.shape != ab.shape:
            raise CongruenceError(f"shape mismatch for {na!r}: {aa.shape} vs {ab.shape}")


def tree_axpy(a: ParameterTree, b: ParameterTree, wa: float, wb: float) -> ParameterTree:
    """Entrywise ``wa * a + wb * b`` over congruent trees.

    Weights are applied as plain Python floats so the entry dtype is
    preserved (float32 stays float32).
    """
    check_congruent(a, b)
    wa = float(wa)
    wb = float(wb)
    out = [(name, wa * arr_a + wb * arr_b) for (name, arr_a), (_, arr_b) in zip(a.entries, b.entries)]
    return ParameterTree(out)


@dataclass(frozen=True)
class Sample:
    """One training case: an image, an optional label map, and an id."""

    image: Volume
    label: Optional[LabelMap]
    id: str = field(default="")

    def __post_init__(self):
        if self.label is not None and self.label.spatial_shape != self.image.spatial_shape:
            raise ValidationError(
                f"label shape {self.label.spatial_shape} != image shape {self.image.spatial_shape}"
            )
