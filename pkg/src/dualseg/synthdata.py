"""Seeded synthetic segmentation datasets and the on-disk sample format.

Each generated image contains 1-3 random shapes on a background; every
class (background included) gets its own intensity band, and voxel
intensities are drawn uniformly inside the band before Gaussian noise is
added.  ``intensity_overlap`` widens the bands toward (but never across)
their neighbors, so the bands stay disjoint by construction while the
noise makes adjacent classes confusable.

A sample is a directory holding ``header.json`` plus raw little-endian
``image.bin`` (float32, channels-first) and ``label.bin`` (int32)
payloads.  Every sample stores its ground-truth labels, including the
ones listed as unlabeled in ``manifest.json``; the training loop must
simply never read those.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .datamodel import LabelMap, Sample, Volume
from .errors import FormatError, ValidationError
from .seeding import derive_seed

SAMPLE_HEADER = "header.json"
SAMPLE_IMAGE = "image.bin"
SAMPLE_LABEL = "label.bin"
MANIFEST_NAME = "manifest.json"

SHAPE_FAMILIES = ("ellipses", "rectangles", "mixed")


@dataclass(frozen=True)
class DatasetSpec:
    num_samples: int = 20
    shape: tuple[int, ...] = (64, 64)
    num_classes: int = 3
    shape_family: str = "ellipses"
    noise_sigma: float = 0.1
    intensity_overlap: float = 0.5
    labeled_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if self.num_samples < 2:
            raise ValidationError("need at least 2 samples")
        if len(self.shape) not in (2, 3) or any(d < 8 for d in self.shape):
            raise ValidationError(f"degenerate spatial shape {self.shape}")
        if self.num_classes < 2:
            raise ValidationError("need at least 2 classes")
        if self.shape_family not in SHAPE_FAMILIES:
            raise ValidationError(f"shape_family must be one of {SHAPE_FAMILIES}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if not (0.0 <= self.intensity_overlap <= 1.0):
            raise ValidationError("intensity_overlap must lie in [0, 1]")
        if not (0.0 < self.labeled_fraction <= 1.0):
            raise ValidationError("labeled_fraction must lie in (0, 1]")
        if self.num_labeled() < 1:
            raise ValidationError("labeled_fraction yields no labeled samples")

    def num_labeled(self) -> int:
        return int(round(self.num_samples * self.labeled_fraction))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        if "shape" in d:
            d["shape"] = tuple(d["shape"])
        return cls(**d)


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    ids: tuple[str, ...]
    labeled_ids: tuple[str, ...]
    unlabeled_ids: tuple[str, ...]
    spec: dict

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "ids": list(self.ids),
            "labeled_ids": list(self.labeled_ids),
            "unlabeled_ids": list(self.unlabeled_ids),
            "spec": self.spec,
        }


def intensity_bands(spec: DatasetSpec) -> list[tuple[float, float]]:
    """Per-class intensity interval (lo, hi); disjoint for every overlap value."""
    k = spec.num_classes
    gap = 1.0 / k
    half = 0.5 * gap * (0.08 + 0.87 * spec.intensity_overlap)
    bands = []
    for c in range(k):
        center = (c + 0.5) * gap
        bands.append((center - half, center + half))
    return bands


def _paint_shape(label: np.ndarray, rng: np.random.Generator, cls: int, family: str) -> None:
    shape = label.shape
    ndim = label.ndim
    kind = family
    if family == "mixed":
        kind = "ellipses" if rng.integers(0, 2) == 0 else "rectangles"
    center = np.array([rng.uniform(0.25 * d, 0.75 * d) for d in shape])
    semi = np.array([rng.uniform(d / 8.0, d / 4.0) for d in shape])
    grids = np.ogrid[tuple(slice(0, d) for d in shape)]
    if kind == "ellipses":
        q = sum(((g - c) / s) ** 2 for g, c, s in zip(grids, center, semi))
        inside = q <= 1.0
    else:
        inside = np.ones(shape, dtype=bool)
        for axis in range(ndim):
            g = grids[axis]
            inside &= np.abs(g - center[axis]) <= semi[axis]
    label[inside] = cls


def _generate_one(spec: DatasetSpec, index: int, sample_id: str) -> Sample:
    rng = np.random.default_rng(derive_seed(spec.seed, "sample", sample_id))
    label = np.zeros(spec.shape, dtype=np.int32)
    n_shapes = int(rng.integers(1, 4))
    n_fg = spec.num_classes - 1
    for s in range(n_shapes):
        # first shape's class cycles with the sample index so the dataset
        # as a whole is guaranteed to contain every class
        cls = 1 + (index % n_fg) if s == 0 else int(rng.integers(1, spec.num_classes))
        _paint_shape(label, rng, cls, spec.shape_family)
    bands = intensity_bands(spec)
    lo = np.array([b[0] for b in bands])
    hi = np.array([b[1] for b in bands])
    u = rng.uniform(0.0, 1.0, size=spec.shape)
    image = lo[label] + (hi[label] - lo[label]) * u
    if spec.noise_sigma > 0:
        image = image + rng.normal(0.0, spec.noise_sigma, size=spec.shape)
    spacing = (1.0,) * len(spec.shape)
    return Sample(
        image=Volume(image[None].astype(np.float32), spacing),
        label=LabelMap(label, spec.num_classes),
        id=sample_id,
    )


def save_sample(sample: Sample, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img = np.ascontiguousarray(sample.image.data, dtype="<f4")
    header = {
        "version": 1,
        "channels": sample.image.channels,
        "dims": list(sample.image.spatial_shape),
        "spacing": list(sample.image.spacing),
        "image_dtype": "f32",
        "label_dtype": "i32",
        "byte_order": "little",
        "num_classes": sample.label.num_classes if sample.label is not None else None,
        "has_label": sample.label is not None,
    }
    (directory / SAMPLE_HEADER).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    (directory / SAMPLE_IMAGE).write_bytes(img.tobytes())
    if sample.label is not None:
        lab = np.ascontiguousarray(sample.label.data, dtype="<i4")
        (directory / SAMPLE_LABEL).write_bytes(lab.tobytes())
    return directory


def load_sample(path, include_label: bool = True) -> Sample:
    """Load one sample directory; sizes are checked against the header.

    ``include_label=False`` skips the label payload entirely, which is how
    the trainer keeps itself honest about unlabeled ids.
    """
    path = Path(path)
    header_path = path / SAMPLE_HEADER
    if not header_path.is_file():
        raise FormatError(f"{path} has no {SAMPLE_HEADER}")
    try:
        header = json.loads(header_path.read_text())
        channels = int(header["channels"])
        dims = tuple(int(d) for d in header["dims"])
        spacing = tuple(float(s) for s in header["spacing"])
        has_label = bool(header["has_label"])
        num_classes = header["num_classes"]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed header in {path}: {exc}") from exc
    if header.get("byte_order") != "little" or header.get("image_dtype") != "f32":
        raise FormatError(f"unsupported encoding in {path}")
    n_voxels = int(np.prod(dims))
    blob = (path / SAMPLE_IMAGE).read_bytes()
    if len(blob) != channels * n_voxels * 4:
        raise FormatError(
            f"image payload is {len(blob)} bytes, header implies {channels * n_voxels * 4}"
        )
    image = np.frombuffer(blob, dtype="<f4").reshape((channels,) + dims).copy()
    label = None
    if include_label and has_label:
        lab_blob = (path / SAMPLE_LABEL).read_bytes()
        if len(lab_blob) != n_voxels * 4:
            raise FormatError(f"label payload is {len(lab_blob)} bytes, header implies {n_voxels * 4}")
        label = LabelMap(np.frombuffer(lab_blob, dtype="<i4").reshape(dims).copy(), int(num_classes))
    return Sample(image=Volume(image, spacing), label=label, id=path.name)


def generate_dataset(spec: DatasetSpec, out_dir) -> DatasetManifest:
    """Write all samples plus a manifest; byte-identical for equal specs."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create dataset directory {out_dir}: {exc}") from exc
    width = max(4, len(str(spec.num_samples - 1)))
    ids = tuple(f"s{i:0{width}d}" for i in range(spec.num_samples))
    for i, sample_id in enumerate(ids):
        sample = _generate_one(spec, i, sample_id)
        save_sample(sample, out_dir / sample_id)
    split_rng = np.random.default_rng(derive_seed(spec.seed, "split"))
    order = split_rng.permutation(spec.num_samples)
    n_labeled = spec.num_labeled()
    labeled = tuple(sorted(ids[i] for i in order[:n_labeled]))
    unlabeled = tuple(sorted(ids[i] for i in order[n_labeled:]))
    manifest = DatasetManifest(
        version=1, ids=ids, labeled_ids=labeled, unlabeled_ids=unlabeled, spec=spec.to_dict()
    )
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(dataset_dir) -> DatasetManifest:
    path = Path(dataset_dir) / MANIFEST_NAME
    if not path.is_file():
        raise FormatError(f"{dataset_dir} has no {MANIFEST_NAME}")
    try:
        d = json.loads(path.read_text())
        return DatasetManifest(
            version=int(d["version"]),
            ids=tuple(d["ids"]),
            labeled_ids=tuple(d["labeled_ids"]),
            unlabeled_ids=tuple(d["unlabeled_ids"]),
            spec=d["spec"],
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed manifest in {dataset_dir}: {exc}") from exc


def augment(
    sample: Sample,
    crop_shape: Sequence[int],
    rng_seed: int,
    flips: Iterable[int] = (),
) -> Sample:
    """Seeded random crop followed by seeded random flips.

    The crop offset is uniform over valid positions; each axis listed in
    ``flips`` is then flipped with probability 1/2.  Image and label
    transform rigidly together.
    """
    crop_shape = tuple(int(c) for c in crop_shape)
    spatial = sample.image.spatial_shape
    if len(crop_shape) != len(spatial) or any(c < 1 or c > d for c, d in zip(crop_shape, spatial)):
        raise ValidationError(f"crop shape {crop_shape} does not fit spatial shape {spatial}")
    rng = np.random.default_rng(rng_seed)
    offsets = tuple(int(rng.integers(0, d - c + 1)) for d, c in zip(spatial, crop_shape))
    region = tuple(slice(o, o + c) for o, c in zip(offsets, crop_shape))
    img = sample.image.data[(slice(None),) + region]
    lab = sample.label.data[region] if sample.label is not None else None
    for axis in sorted(set(int(a) for a in flips)):
        if axis < 0 or axis >= len(spatial):
            raise ValidationError(f"flip axis {axis} out of range for {len(spatial)} spatial axes")
        if int(rng.integers(0, 2)) == 1:
            img = np.flip(img, axis=axis + 1)
            if lab is not None:
                lab = np.flip(lab, axis=axis)
    label = LabelMap(lab.copy(), sample.label.num_classes) if lab is not None else None
    return Sample(image=Volume(img.copy(), sample.image.spacing), label=label, id=sample.id)
