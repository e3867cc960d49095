"""Semi-supervised segmentation training with a switching dual-student
teacher, entropy-based student selection, and loss-aware EMA updates."""

__version__ = "0.1.0"
