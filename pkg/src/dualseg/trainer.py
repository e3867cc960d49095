"""Two-phase training: supervised pre-training, then dual-student self-training.

Phase one fits a single network on the labeled split with the combined
Dice+CE loss and writes a checkpoint that seeds both students and the
teacher.  Phase two runs the per-iteration protocol:

1. draw a labeled and an unlabeled batch (cyclic, seed-deterministic),
2. teacher predicts the unlabeled batch deterministically; pseudo-labels
   are refined by the largest-component filter,
3. each unlabeled sample is spliced with a labeled partner under a
   zero-centered mask, both ways,
4. both students forward the mixed batch with per-student dropout
   streams and are scored with the mixed-pair loss plus the
   disagreement-masked MSE,
5. both students take an optimizer step,
6. the students re-predict the raw unlabeled batch deterministically and
   the more confident one on the agreement region is selected,
7. the loss-aware EMA weight is computed from the selected student's
   loss, and
8. the teacher parameters are blended toward the selected student.

Every random draw comes from ``derive_seed`` tags documented next to its
use, so two runs of the same config are bitwise identical and reference
implementations can reproduce the exact trajectory.  Teacher weights are
only ever written by the EMA blend, never by gradients.

Validation during self-training scores the teacher on the unlabeled
split's ground truth, which lives on disk purely for evaluation; the
training path loads unlabeled samples without their label payloads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from . import pseudolabel
from .datamodel import LabelMap, ParameterTree, ProbMap, Sample, tree_axpy
from .errors import ValidationError
from .laema import MODE_LA, LAEMAConfig, decay_weight, global_weight
from .losses import (
    LossWeights,
    combined_seg_loss,
    cutmix_loss,
    disagreement_mask,
    total_student_loss,
    uncertainty_mse_loss,
)
from .metrics import MetricsRecord, evaluate_case, write_report
from .mixing import MixConfig, cutmix_pair, make_zero_centered_mask
from .network import NetConfig, SegNetwork, build, load_checkpoint, save_checkpoint
from .seeding import derive_seed
from .selection import SelectionOutcome, select_student
from .synthdata import load_manifest, load_sample

SELECTION_MODES = ("entropy", "fixed_1", "fixed_2", "average")
SPLITS = ("labeled", "unlabeled", "all")

AVERAGE_SENTINEL = 0  # chosen_student value logged in average mode


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValidationError(f"optimizer must be 'sgd' or 'adam', got {self.kind!r}")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")


def default_optimizer(net: NetConfig) -> OptimizerConfig:
    """SGD(0.01, 0.9, 1e-4) for 3d networks, Adam(0.001) for 2d."""
    if net.dims == "3d":
        return OptimizerConfig(kind="sgd", lr=0.01, momentum=0.9, weight_decay=1e-4)
    return OptimizerConfig(kind="adam", lr=0.001)


@dataclass(frozen=True)
class BatchConfig:
    labeled_per_batch: int = 2
    unlabeled_per_batch: int = 2

    def __post_init__(self):
        if self.labeled_per_batch < 1 or self.unlabeled_per_batch < 1:
            raise ValidationError("batch counts must be >= 1")


@dataclass(frozen=True)
class AblationConfig:
    dual_student: bool = True
    selection_mode: str = "entropy"

    def __post_init__(self):
        if self.selection_mode not in SELECTION_MODES:
            raise ValidationError(f"selection_mode must be one of {SELECTION_MODES}")
        if not self.dual_student and self.selection_mode in ("fixed_2", "average"):
            raise ValidationError(f"selection_mode {self.selection_mode!r} needs two students")


@dataclass(frozen=True)
class TrainConfig:
    dataset_dir: str = "dataset"
    out_dir: str = "run"
    pretrain_iters: int = 200
    selftrain_iters: int = 400
    batch: BatchConfig = field(default_factory=BatchConfig)
    optimizer: Optional[OptimizerConfig] = None  # None -> default_optimizer(net)
    eval_every: int = 200
    loss_weights: LossWeights = field(default_factory=LossWeights)
    mix: MixConfig = field(default_factory=MixConfig)
    laema: LAEMAConfig = field(default_factory=LAEMAConfig)
    net: NetConfig = field(default_factory=NetConfig)
    seed: int = 0
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def __post_init__(self):
        if self.pretrain_iters < 0 or self.selftrain_iters < 0:
            raise ValidationError("iteration counts must be >= 0")
        if self.eval_every < 0:
            raise ValidationError("eval_every must be >= 0")

    def resolved_optimizer(self) -> OptimizerConfig:
        return self.optimizer if self.optimizer is not None else default_optimizer(self.net)


def config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["laema"] = {"w_max": cfg.laema.w_max, "lambda": cfg.laema.lambda_, "mode": cfg.laema.mode}
    if cfg.optimizer is None:
        d["optimizer"] = None
    return d


_CONFIG_KEYS = {
    "dataset_dir", "out_dir", "pretrain_iters", "selftrain_iters", "batch", "optimizer",
    "eval_every", "loss_weights", "mix", "laema", "net", "seed", "ablation",
}


def config_from_dict(d: dict) -> TrainConfig:
    unknown = set(d) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("dataset_dir", "out_dir", "pretrain_iters", "selftrain_iters", "eval_every", "seed"):
        if key in d:
            kwargs[key] = d[key]
    try:
        if d.get("batch") is not None:
            kwargs["batch"] = BatchConfig(**d["batch"])
        if d.get("optimizer") is not None:
            kwargs["optimizer"] = OptimizerConfig(**d["optimizer"])
        if d.get("loss_weights") is not None:
            kwargs["loss_weights"] = LossWeights(**d["loss_weights"])
        if d.get("mix") is not None:
            mix = dict(d["mix"])
            if isinstance(mix.get("zero_ratio"), list):
                mix["zero_ratio"] = tuple(mix["zero_ratio"])
            kwargs["mix"] = MixConfig(**mix)
        if d.get("laema") is not None:
            la = dict(d["laema"])
            if "lambda" in la:
                la["lambda_"] = la.pop("lambda")
            kwargs["laema"] = LAEMAConfig(**la)
        if d.get("net") is not None:
            kwargs["net"] = NetConfig(**d["net"])
        if d.get("ablation") is not None:
            kwargs["ablation"] = AblationConfig(**d["ablation"])
    except TypeError as exc:
        raise ValidationError(f"bad config section: {exc}") from exc
    return TrainConfig(**kwargs)


def load_config(path) -> TrainConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return config_from_dict(data)


@dataclass(frozen=True)
class TrainLogRow:
    t: int
    loss_1: float
    loss_2: float
    chosen_student: int
    e_1: float
    e_2: float
    w_global: float
    w_decay: float
    w_t: float
    fallback_used: bool
    val_dice: float  # NaN when this iteration was not evaluated


LOG_COLUMNS = (
    "t", "loss_1", "loss_2", "chosen_student", "e_1", "e_2",
    "w_global", "w_decay", "w_t", "fallback_used", "val_dice",
)


def write_train_log(rows: Sequence[TrainLogRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.t,
                    repr(r.loss_1),
                    repr(r.loss_2),
                    r.chosen_student,
                    repr(r.e_1),
                    repr(r.e_2),
                    repr(r.w_global),
                    repr(r.w_decay),
                    repr(r.w_t),
                    int(r.fallback_used),
                    repr(r.val_dice),
                ]
            )
    return path


def read_train_log(path) -> list[TrainLogRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != LOG_COLUMNS:
            raise ValidationError(f"{path} is not a training log")
        for rec in reader:
            rows.append(
                TrainLogRow(
                    t=int(rec["t"]),
                    loss_1=float(rec["loss_1"]),
                    loss_2=float(rec["loss_2"]),
                    chosen_student=int(rec["chosen_student"]),
                    e_1=float(rec["e_1"]),
                    e_2=float(rec["e_2"]),
                    w_global=float(rec["w_global"]),
                    w_decay=float(rec["w_decay"]),
                    w_t=float(rec["w_t"]),
                    fallback_used=bool(int(rec["fallback_used"])),
                    val_dice=float(rec["val_dice"]),
                )
            )
    return rows


class CyclicSampler:
    """Seed-deterministic infinite batch stream over a fixed id list.

    Ids are consumed in reshuffled full passes, so every id appears once
    per cycle regardless of batch size.
    """

    def __init__(self, ids: Sequence[str], batch_size: int, seed: int):
        if not ids:
            raise ValidationError("cannot sample from an empty id list")
        self._ids = list(ids)
        self._batch = int(batch_size)
        self._rng = np.random.default_rng(seed)
        self._queue: list[str] = []

    def next_batch(self) -> list[str]:
        while len(self._queue) < self._batch:
            order = self._rng.permutation(len(self._ids))
            self._queue.extend(self._ids[i] for i in order)
        out, self._queue = self._queue[: self._batch], self._queue[self._batch :]
        return out


class DataStore:
    """Caching loader that keeps unlabeled ids honest: their label payloads
    are only touched by the evaluation path, never by training."""

    def __init__(self, dataset_dir):
        self.dir = Path(dataset_dir)
        self.manifest = load_manifest(self.dir)
        self.num_classes = int(self.manifest.spec["num_classes"])
        self._train_cache: dict[str, Sample] = {}

    def labeled(self, sample_id: str) -> Sample:
        key = f"l:{sample_id}"
        if key not in self._train_cache:
            sample = load_sample(self.dir / sample_id, include_label=True)
            if sample.label is None:
                raise ValidationError(f"labeled sample {sample_id} has no label payload")
            self._train_cache[key] = sample
        return self._train_cache[key]

    def unlabeled(self, sample_id: str) -> Sample:
        key = f"u:{sample_id}"
        if key not in self._train_cache:
            self._train_cache[key] = load_sample(self.dir / sample_id, include_label=False)
        return self._train_cache[key]

    def eval_sample(self, sample_id: str) -> Sample:
        sample = load_sample(self.dir / sample_id, include_label=True)
        if sample.label is None:
            raise ValidationError(f"sample {sample_id} has no label payload to evaluate against")
        return sample

    def split_ids(self, split: str) -> tuple[str, ...]:
        if split == "labeled":
            return self.manifest.labeled_ids
        if split == "unlabeled":
            return self.manifest.unlabeled_ids
        if split == "all":
            return self.manifest.ids
        raise ValidationError(f"split must be one of {SPLITS}, got {split!r}")

    def validation_ids(self) -> tuple[str, ...]:
        return self.manifest.unlabeled_ids or self.manifest.labeled_ids


def _make_optimizer(cfg: OptimizerConfig, module: torch.nn.Module) -> torch.optim.Optimizer:
    if cfg.kind == "sgd":
        return torch.optim.SGD(
            module.parameters(), lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay
        )
    return torch.optim.Adam(module.parameters(), lr=cfg.lr)


def _image_tensor(samples: Sequence[Sample]) -> torch.Tensor:
    return torch.as_tensor(np.stack([s.image.data for s in samples]), dtype=torch.float32)


def _label_tensor(maps: Sequence[LabelMap]) -> torch.Tensor:
    return torch.as_tensor(np.stack([m.data for m in maps]).astype(np.int64))


def _merge_batch_probs(prob_arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-sample (C, spatial) maps into one channels-first map.

    2D samples gain a pseudo-depth axis; 3D samples are concatenated
    along their first spatial axis so the result stays rank-4.
    """
    if prob_arrays[0].ndim == 3:
        return np.stack(prob_arrays, axis=1)
    return np.concatenate(prob_arrays, axis=1)


def _teacher_val_dice(net: SegNetwork, store: DataStore) -> float:
    dices = []
    for sample_id in store.validation_ids():
        sample = store.eval_sample(sample_id)
        logits = net.forward_volume(sample.image, stochastic=False)
        pred = LabelMap(np.argmax(logits, axis=0).astype(np.int32), store.num_classes)
        dices.append(evaluate_case(pred, sample.label, sample.image.spacing).dice)
    return float(np.mean(dices))


def _batch_seg_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    terms = [combined_seg_loss(probs[j], labels[j]) for j in range(probs.shape[0])]
    return torch.stack(terms).mean()


def pretrain(cfg: TrainConfig) -> Path:
    """Supervised phase on the labeled split; returns the checkpoint path."""
    torch.set_num_threads(1)
    store = DataStore(cfg.dataset_dir)
    if not store.manifest.labeled_ids:
        raise ValidationError("dataset has no labeled samples")
    net = build(cfg.net)
    opt = _make_optimizer(cfg.resolved_optimizer(), net.module)
    sampler = CyclicSampler(
        store.manifest.labeled_ids, cfg.batch.labeled_per_batch, derive_seed(cfg.seed, "pretrain", "batch")
    )
    for t in range(cfg.pretrain_iters):
        samples = [store.labeled(i) for i in sampler.next_batch()]
        net.check_input(samples[0].image.spatial_shape, samples[0].image.channels)
        x = _image_tensor(samples)
        y = _label_tensor([s.label for s in samples])
        gen = torch.Generator().manual_seed(derive_seed(cfg.seed, "pretrain", "dropout", t))
        probs = torch.softmax(net.module(x, gen), dim=1)
        loss = _batch_seg_loss(probs, y)
        opt.zero_grad()
        loss.backward()
        opt.step()
    out = Path(cfg.out_dir) / "pretrain"
    return save_checkpoint(out, net.parameter_tree(), cfg.net, cfg.pretrain_iters)


@dataclass(frozen=True)
class _MixedBatch:
    """Mixed inputs/targets for one mask set: per pair, both splice directions."""

    x_l2u: list
    x_u2l: list
    y_l2u: list[LabelMap]
    y_u2l: list[LabelMap]


def _build_mixed(cfg, t, pairs, mask_tag) -> _MixedBatch:
    out = _MixedBatch([], [], [], [])
    for j, (partner, unl_sample, pseudo) in enumerate(pairs):
        spatial = unl_sample.image.spatial_shape
        mask_seed = derive_seed(cfg.seed, "selftrain", "mask", t, j, *mask_tag)
        mask = make_zero_centered_mask(spatial, cfg.mix.ratios(len(spatial)), mask_seed)
        x_l2u, x_u2l, y_l2u, y_u2l = cutmix_pair(
            partner.image, unl_sample.image, partner.label, pseudo, mask
        )
        out.x_l2u.append(x_l2u)
        out.x_u2l.append(x_u2l)
        out.y_l2u.append(y_l2u)
        out.y_u2l.append(y_u2l)
    return out


@dataclass(frozen=True)
class SelfTrainResult:
    teacher_final: Path
    teacher_best: Optional[Path]
    students: tuple[Path, ...]
    log_path: Path
    log: tuple[TrainLogRow, ...]
    best_val_dice: float
    final_val_dice: float


def self_train(
    cfg: TrainConfig,
    init_checkpoint,
    iteration_hook: Optional[Callable[[int, ParameterTree], None]] = None,
) -> SelfTrainResult:
    """Dual-student self-training from a pretrained checkpoint.

    ``iteration_hook`` (mainly for tests) receives the iteration index and
    the updated teacher tree after every EMA step.
    """
    torch.set_num_threads(1)
    store = DataStore(cfg.dataset_dir)
    if not store.manifest.labeled_ids or not store.manifest.unlabeled_ids:
        raise ValidationError("self-training needs both labeled and unlabeled samples")
    init_tree, _, _ = load_checkpoint(init_checkpoint)

    teacher = build(cfg.net)
    teacher.load_parameter_tree(init_tree)  # raises CongruenceError on mismatch
    teacher.module.requires_grad_(False)
    teacher_tree = teacher.parameter_tree()

    n_students = 2 if cfg.ablation.dual_student else 1
    students = []
    for _ in range(n_students):
        s = build(cfg.net)
        s.load_parameter_tree(init_tree)
        students.append(s)
    opts = [_make_optimizer(cfg.resolved_optimizer(), s.module) for s in students]

    lab_sampler = CyclicSampler(
        store.manifest.labeled_ids, cfg.batch.labeled_per_batch, derive_seed(cfg.seed, "selftrain", "labeled")
    )
    unl_sampler = CyclicSampler(
        store.manifest.unlabeled_ids, cfg.batch.unlabeled_per_batch, derive_seed(cfg.seed, "selftrain", "unlabeled")
    )

    out_dir = Path(cfg.out_dir)
    rows: list[TrainLogRow] = []
    best_val = float("-inf")
    best_path: Optional[Path] = None
    final_val = float("nan")

    for t in range(cfg.selftrain_iters):
        lab = [store.labeled(i) for i in lab_sampler.next_batch()]
        unl = [store.unlabeled(i) for i in unl_sampler.next_batch()]
        if t == 0:
            teacher.check_input(unl[0].image.spatial_shape, unl[0].image.channels)

        # teacher pseudo-labels: deterministic forward, largest-component cleanup
        pseudo: list[LabelMap] = []
        for s in unl:
            pm = pseudolabel.predict(lambda v: teacher.forward_volume(v, stochastic=False), s.image)
            raw = LabelMap(pm.argmax().astype(np.int32), store.num_classes)
            pseudo.append(pseudolabel.largest_component_filter(raw))

        pairs = [(lab[j % len(lab)], unl[j], pseudo[j]) for j in range(len(unl))]
        n_pairs = len(pairs)
        if cfg.mix.per_student_masks:
            mixed = [_build_mixed(cfg, t, pairs, (s_idx + 1,)) for s_idx in range(n_students)]
        else:
            mixed = [_build_mixed(cfg, t, pairs, ())] * n_students

        # stochastic forwards: one dropout stream per student per iteration,
        # both splice directions in a single concatenated batch
        probs_l2u: list[torch.Tensor] = []
        probs_u2l: list[torch.Tensor] = []
        for s_idx, net in enumerate(students):
            mb = mixed[s_idx]
            batch = torch.as_tensor(
                np.stack([v.data for v in mb.x_l2u] + [v.data for v in mb.x_u2l]), dtype=torch.float32
            )
            gen = torch.Generator().manual_seed(derive_seed(cfg.seed, "selftrain", "dropout", s_idx + 1, t))
            probs = torch.softmax(net.module(batch, gen), dim=1)
            probs_l2u.append(probs[:n_pairs])
            probs_u2l.append(probs[n_pairs:])

        losses: list[torch.Tensor] = []
        for s_idx in range(n_students):
            mb = mixed[s_idx]
            cm_terms = []
            mse_terms = []
            for j in range(n_pairs):
                yl = torch.as_tensor(mb.y_l2u[j].data.astype(np.int64))
                yu = torch.as_tensor(mb.y_u2l[j].data.astype(np.int64))
                cm_terms.append(cutmix_loss(probs_u2l[s_idx][j], probs_l2u[s_idx][j], yu, yl))
                if n_students == 2:
                    m_l2u = disagreement_mask(probs_l2u[0][j].detach(), probs_l2u[1][j].detach())
                    m_u2l = disagreement_mask(probs_u2l[0][j].detach(), probs_u2l[1][j].detach())
                    mse_terms.append(
                        uncertainty_mse_loss(
                            probs_u2l[s_idx][j], probs_l2u[s_idx][j], yu, yl, m_u2l, m_l2u
                        )
                    )
            cm = torch.stack(cm_terms).mean()
            mse = torch.stack(mse_terms).mean() if mse_terms else torch.zeros(())
            losses.append(total_student_loss(cm, mse, cfg.loss_weights))

        for opt, loss in zip(opts, losses):
            opt.zero_grad()
            loss.backward()
            opt.step()
        loss_values = [float(l.detach()) for l in losses]

        # student selection on the raw unlabeled batch, deterministic forwards
        outcome: Optional[SelectionOutcome] = None
        if cfg.ablation.selection_mode == "entropy" and n_students == 2:
            merged = []
            for net in students:
                per_sample = [
                    pseudolabel.softmax_probs(net.forward_volume(s.image, stochastic=False).astype(np.float64))
                    for s in unl
                ]
                merged.append(ProbMap(_merge_batch_probs(per_sample)))
            outcome = select_student(merged[0], merged[1])
            chosen = outcome.chosen
        elif cfg.ablation.selection_mode == "fixed_2":
            chosen = 2
        elif cfg.ablation.selection_mode == "average":
            chosen = AVERAGE_SENTINEL
        else:  # fixed_1, or any mode with a single student
            chosen = 1

        if chosen == AVERAGE_SENTINEL:
            source_tree = tree_axpy(students[0].parameter_tree(), students[1].parameter_tree(), 0.5, 0.5)
            loss_for_w = float(np.mean(loss_values))
        else:
            source_tree = students[chosen - 1].parameter_tree()
            loss_for_w = loss_values[chosen - 1]

        w_g = global_weight(t, cfg.laema.w_max)
        w_d = decay_weight(loss_for_w, cfg.laema.lambda_) if cfg.laema.mode == MODE_LA else 1.0
        w = w_g * w_d
        teacher_tree = tree_axpy(teacher_tree, source_tree, 1.0 - w, w)
        teacher.load_parameter_tree(teacher_tree)

        val_dice = float("nan")
        if cfg.eval_every > 0 and ((t + 1) % cfg.eval_every == 0 or t == cfg.selftrain_iters - 1):
            val_dice = _teacher_val_dice(teacher, store)
            final_val = val_dice
            if val_dice > best_val:
                best_val = val_dice
                best_path = save_checkpoint(out_dir / "teacher_best", teacher_tree, cfg.net, t + 1)

        rows.append(
            TrainLogRow(
                t=t,
                loss_1=loss_values[0],
                loss_2=loss_values[1] if n_students == 2 else float("nan"),
                chosen_student=chosen,
                e_1=outcome.scores[0] if outcome else float("nan"),
                e_2=outcome.scores[1] if outcome else float("nan"),
                w_global=w_g,
                w_decay=w_d,
                w_t=w,
                fallback_used=outcome.fallback_used if outcome else False,
                val_dice=val_dice,
            )
        )
        if iteration_hook is not None:
            iteration_hook(t, teacher_tree)

    teacher_final = save_checkpoint(out_dir / "teacher_final", teacher_tree, cfg.net, cfg.selftrain_iters)
    student_paths = tuple(
        save_checkpoint(out_dir / f"student_{i + 1}", s.parameter_tree(), cfg.net, cfg.selftrain_iters)
        for i, s in enumerate(students)
    )
    log_path = write_train_log(rows, out_dir / "train_log.csv")
    return SelfTrainResult(
        teacher_final=teacher_final,
        teacher_best=best_path,
        students=student_paths,
        log_path=log_path,
        log=tuple(rows),
        best_val_dice=best_val if best_path is not None else float("nan"),
        final_val_dice=final_val,
    )


def evaluate_cases(
    predict_fn: Callable[[Sample], LabelMap], dataset_dir, split: str
) -> list[tuple[str, MetricsRecord]]:
    """Score an arbitrary predictor against the split's ground truth."""
    store = DataStore(dataset_dir)
    ids = store.split_ids(split)
    if not ids:
        raise ValidationError(f"split {split!r} is empty")
    records = []
    for sample_id in ids:
        sample = store.eval_sample(sample_id)
        pred = predict_fn(sample)
        records.append((sample_id, evaluate_case(pred, sample.label, sample.image.spacing)))
    return records


def evaluate(checkpoint, dataset_dir, split: str, out_csv=None) -> list[tuple[str, MetricsRecord]]:
    """Evaluate a checkpointed network on a dataset split; optionally write CSV."""
    torch.set_num_threads(1)
    tree, net_cfg, _ = load_checkpoint(checkpoint)
    net = build(net_cfg)
    net.load_parameter_tree(tree)
    num_classes = net_cfg.num_classes

    def predict_fn(sample: Sample) -> LabelMap:
        logits = net.forward_volume(sample.image, stochastic=False)
        return LabelMap(np.argmax(logits, axis=0).astype(np.int32), num_classes)

    records = evaluate_cases(predict_fn, dataset_dir, split)
    if out_csv is not None:
        write_report(records, out_csv)
    return records
