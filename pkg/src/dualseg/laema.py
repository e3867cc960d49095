"""Loss-aware exponential moving average of student weights into a teacher.

The student-side weight is the product of two factors: a global schedule
max(1/(1+t), w_max) that starts at 1 and decays to a floor, and a loss
decay exp(-lambda * loss) that shrinks the transfer when the contributing
student is doing poorly.  With lambda = 0 (or mode "standard_ema") the
update is the plain schedule-weighted EMA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .datamodel import ParameterTree, tree_axpy
from .errors import ValidationError

MODE_STANDARD = "standard_ema"
MODE_LA = "la_ema"


@dataclass(frozen=True)
class LAEMAConfig:
    w_max: float = 0.01
    lambda_: float = 0.3
    mode: str = MODE_LA

    def __post_init__(self):
        if not (0.0 < self.w_max <= 1.0):
            raise ValidationError(f"w_max must lie in (0, 1], got {self.w_max}")
        if self.lambda_ < 0:
            raise ValidationError(f"lambda must be >= 0, got {self.lambda_}")
        if self.mode not in (MODE_STANDARD, MODE_LA):
            raise ValidationError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class LAEMAState:
    """Iteration counter plus the most recently computed weights."""

    t: int = 0
    last_w_global: float = 1.0
    last_w_decay: float = 1.0
    last_w: float = 1.0


def global_weight(t: int, w_max: float) -> float:
    """max(1/(1+t), w_max): starts at 1, decays hyperbolically to the floor."""
    if t < 0:
        raise ValidationError(f"iteration must be >= 0, got {t}")
    return max(1.0 / (1.0 + t), w_max)


def decay_weight(loss: float, lambda_: float) -> float:
    """exp(-lambda * loss), in (0, 1]; larger losses shrink the transfer."""
    if loss < 0:
        raise ValidationError(f"loss must be >= 0, got {loss}")
    return math.exp(-lambda_ * loss)


def la_ema_weight(t: int, loss: float, cfg: LAEMAConfig) -> float:
    """Student-side weight at iteration t given the contributing loss."""
    w_g = global_weight(t, cfg.w_max)
    if cfg.mode == MODE_STANDARD:
        return w_g
    return w_g * decay_weight(loss, cfg.lambda_)


def advance(state: LAEMAState, loss: float, cfg: LAEMAConfig) -> tuple[LAEMAState, float]:
    """Compute the weight at the state's iteration and step the counter.

    In standard mode the decay factor is still recorded as 1.0 so the log
    columns stay comparable across modes.
    """
    w_g = global_weight(state.t, cfg.w_max)
    w_d = decay_weight(loss, cfg.lambda_) if cfg.mode == MODE_LA else 1.0
    w = w_g * w_d
    new = replace(state, t=state.t + 1, last_w_global=w_g, last_w_decay=w_d, last_w=w)
    return new, w


def ema_update(teacher: ParameterTree, student: ParameterTree, w: float) -> ParameterTree:
    """Blend ``(1 - w) * teacher + w * student`` over congruent trees."""
    if not (0.0 < w <= 1.0):
        raise ValidationError(f"update weight must lie in (0, 1], got {w}")
    return tree_axpy(teacher, student, 1.0 - w, w)
