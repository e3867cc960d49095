"""Small U-shaped segmentation network with fully seeded randomness.

Normalization is GroupNorm, so the network carries no buffers: its entire
state is the parameter tensors, which makes teacher EMA over a
ParameterTree exact.  Dropout draws from an explicit torch.Generator
passed into forward, never from global RNG, so a (weights, input, seed)
triple fully determines the output.

Checkpoints are a directory holding ``manifest.json`` (iteration, network
config echo, entry name/shape/dtype table) and ``weights.bin`` with the
little-endian float32 payloads concatenated in manifest order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

from .datamodel import ParameterTree, Volume, check_congruent
from .errors import FormatError, ValidationError

CHECKPOINT_MANIFEST = "manifest.json"
CHECKPOINT_WEIGHTS = "weights.bin"


@dataclass(frozen=True)
class NetConfig:
    in_channels: int = 1
    num_classes: int = 3
    base_width: int = 8
    depth: int = 3
    dims: str = "2d"
    dropout_rate: float = 0.1
    init_seed: int = 0

    def __post_init__(self):
        if self.dims not in ("2d", "3d"):
            raise ValidationError(f"dims must be '2d' or '3d', got {self.dims!r}")
        if self.in_channels < 1 or self.num_classes < 2 or self.base_width < 1 or self.depth < 1:
            raise ValidationError("degenerate network config")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValidationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    @property
    def ndim(self) -> int:
        return 2 if self.dims == "2d" else 3

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(**d)


def _conv_cls(ndim: int):
    return nn.Conv2d if ndim == 2 else nn.Conv3d


def _groups(channels: int) -> int:
    return 4 if channels % 4 == 0 else 1


def _seeded_dropout(x: torch.Tensor, p: float, gen: Optional[torch.Generator]) -> torch.Tensor:
    if gen is None or p <= 0.0:
        return x
    keep = 1.0 - p
    mask = (torch.rand(x.shape, generator=gen) < keep).to(x.dtype)
    return x * mask / keep


class _DoubleConv(nn.Module):
    def __init__(self, ndim: int, c_in: int, c_out: int, dropout_rate: float):
        super().__init__()
        conv = _conv_cls(ndim)
        self.conv1 = conv(c_in, c_out, kernel_size=3, padding=1)
        self.norm1 = nn.GroupNorm(_groups(c_out), c_out)
        self.conv2 = conv(c_out, c_out, kernel_size=3, padding=1)
        self.norm2 = nn.GroupNorm(_groups(c_out), c_out)
        self.dropout_rate = dropout_rate

    def forward(self, x, gen: Optional[torch.Generator] = None):
        x = torch.relu(self.norm1(self.conv1(x)))
        x = torch.relu(self.norm2(self.conv2(x)))
        return _seeded_dropout(x, self.dropout_rate, gen)


class UNet(nn.Module):
    """Encoder-decoder with skip connections; output spatial shape = input."""

    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        ndim = cfg.ndim
        widths = [cfg.base_width * (2**i) for i in range(cfg.depth + 1)]
        self.encoders = nn.ModuleList()
        c_prev = cfg.in_channels
        for w in widths[:-1]:
            self.encoders.append(_DoubleConv(ndim, c_prev, w, cfg.dropout_rate))
            c_prev = w
        self.bottleneck = _DoubleConv(ndim, c_prev, widths[-1], cfg.dropout_rate)
        self.decoders = nn.ModuleList()
        c_prev = widths[-1]
        for w in reversed(widths[:-1]):
            self.decoders.append(_DoubleConv(ndim, c_prev + w, w, cfg.dropout_rate))
            c_prev = w
        self.head = _conv_cls(ndim)(c_prev, cfg.num_classes, kernel_size=1)
        self._pool = nn.functional.max_pool2d if ndim == 2 else nn.functional.max_pool3d

    def forward(self, x: torch.Tensor, gen: Optional[torch.Generator] = None) -> torch.Tensor:
        skips = []
        for enc in self.encoders:
            x = enc(x, gen)
            skips.append(x)
            x = self._pool(x, kernel_size=2)
        x = self.bottleneck(x, gen)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = nn.functional.interpolate(x, scale_factor=2, mode="nearest")
            x = dec(torch.cat([x, skip], dim=1), gen)
        return self.head(x)


def _deterministic_init(module: nn.Module, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.Conv3d)):
                fan_in = m.in_channels * int(np.prod(m.kernel_size))
                bound = 1.0 / math.sqrt(fan_in)
                m.weight.uniform_(-bound, bound, generator=gen)
                if m.bias is not None:
                    m.bias.uniform_(-bound, bound, generator=gen)
            elif isinstance(m, nn.GroupNorm):
                m.weight.fill_(1.0)
                m.bias.fill_(0.0)


class SegNetwork:
    """A built network: torch module plus the parameter-tree view of it."""

    def __init__(self, cfg: NetConfig):
        self.cfg = cfg
        self.module = UNet(cfg)
        _deterministic_init(self.module, cfg.init_seed)

    def parameter_tree(self) -> ParameterTree:
        entries = [
            (name, tensor.detach().numpy().astype(np.float32, copy=True))
            for name, tensor in self.module.state_dict().items()
        ]
        return ParameterTree(entries)

    def load_parameter_tree(self, tree: ParameterTree) -> None:
        check_congruent(self.parameter_tree(), tree)
        state = {name: torch.from_numpy(np.array(arr, dtype=np.float32)) for name, arr in tree.entries}
        self.module.load_state_dict(state)

    def check_input(self, spatial_shape: tuple[int, ...], channels: int) -> None:
        if channels != self.cfg.in_channels:
            raise ValidationError(f"network expects {self.cfg.in_channels} channels, got {channels}")
        if len(spatial_shape) != self.cfg.ndim:
            raise ValidationError(f"network is {self.cfg.dims}, input is {len(spatial_shape)}-d")
        divisor = 2**self.cfg.depth
        for d in spatial_shape:
            if d % divisor != 0:
                raise ValidationError(f"spatial dims must be divisible by {divisor}, got {spatial_shape}")

    def forward_volume(self, x, stochastic: bool = False, seed: int = 0) -> np.ndarray:
        """Logits (num_classes, spatial) for one volume, as numpy."""
        data = x.data if isinstance(x, Volume) else np.asarray(x)
        self.check_input(tuple(data.shape[1:]), data.shape[0])
        gen = torch.Generator().manual_seed(seed) if stochastic else None
        with torch.no_grad():
            t = torch.as_tensor(np.array(data, dtype=np.float32)).unsqueeze(0)
            logits = self.module(t, gen).squeeze(0)
        return logits.numpy()

    def parameter_count(self) -> int:
        return self.parameter_tree().num_values()


def build(cfg: NetConfig) -> SegNetwork:
    return SegNetwork(cfg)


def save_checkpoint(path, tree: ParameterTree, cfg: NetConfig, iteration: int) -> Path:
    """Write manifest.json plus the concatenated float32 payload."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    payload = bytearray()
    for name, arr in tree.entries:
        data = np.ascontiguousarray(arr, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f4"})
        payload.extend(data.tobytes())
    manifest = {
        "format_version": 1,
        "iteration": int(iteration),
        "net": cfg.to_dict(),
        "entries": entries,
    }
    (path / CHECKPOINT_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (path / CHECKPOINT_WEIGHTS).write_bytes(bytes(payload))
    return path


def load_checkpoint(path) -> tuple[ParameterTree, NetConfig, int]:
    path = Path(path)
    manifest_path = path / CHECKPOINT_MANIFEST
    weights_path = path / CHECKPOINT_WEIGHTS
    if not manifest_path.is_file() or not weights_path.is_file():
        raise FormatError(f"{path} is not a checkpoint directory")
    try:
        manifest = json.loads(manifest_path.read_text())
        entries = manifest["entries"]
        cfg = NetConfig.from_dict(manifest["net"])
        iteration = int(manifest["iteration"])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed checkpoint manifest in {path}: {exc}") from exc
    blob = weights_path.read_bytes()
    expect = sum(int(np.prod(e["shape"])) for e in entries) * 4
    if len(blob) != expect:
        raise FormatError(f"weights payload is {len(blob)} bytes, manifest implies {expect}")
    out = []
    offset = 0
    for e in entries:
        n = int(np.prod(e["shape"]))
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=offset).reshape(e["shape"])
        out.append((e["name"], arr.copy()))
        offset += n * 4
    return ParameterTree(out), cfg, iteration
