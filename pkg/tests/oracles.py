"""Independent brute-force oracles.

Everything here is written as plainly as possible (explicit voxel loops,
no vectorization, no calls into the package under test) so the main
implementations can be checked against a second, independent route.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------------------
# mixing


def mix_voxel_loop(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """mask * a + (1 - mask) * b, one voxel at a time; broadcasts channels."""
    out = np.empty_like(a)
    if a.ndim == mask.ndim + 1:  # channels-first volume
        for c in range(a.shape[0]):
            for idx in np.ndindex(*mask.shape):
                out[(c,) + idx] = a[(c,) + idx] if mask[idx] == 1 else b[(c,) + idx]
    else:
        for idx in np.ndindex(*mask.shape):
            out[idx] = a[idx] if mask[idx] == 1 else b[idx]
    return out


# ---------------------------------------------------------------------------
# losses


def soft_dice_scalar(p: np.ndarray, y: np.ndarray, smooth: float = 1e-5) -> float:
    """Soft dice loss evaluated with explicit per-class accumulators."""
    num_classes = p.shape[0]
    total = 0.0
    for c in range(num_classes):
        inter = 0.0
        sum_p = 0.0
        sum_y = 0.0
        for idx in np.ndindex(*y.shape):
            yc = 1.0 if y[idx] == c else 0.0
            inter += p[(c,) + idx] * yc
            sum_p += p[(c,) + idx]
            sum_y += yc
        total += (2.0 * inter + smooth) / (sum_p + sum_y + smooth)
    return 1.0 - total / num_classes


def ce_scalar(p: np.ndarray, y: np.ndarray, clamp: float = 1e-12) -> float:
    total = 0.0
    n = 0
    for idx in np.ndindex(*y.shape):
        prob = min(max(p[(int(y[idx]),) + idx], clamp), 1.0)
        total += -math.log(prob)
        n += 1
    return total / n


def masked_mse_scalar(p: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    """Masked MSE against one-hot targets, normalized by (masked count * C)."""
    num_classes = p.shape[0]
    count = int(mask.sum())
    if count == 0:
        return 0.0
    total = 0.0
    for idx in np.ndindex(*y.shape):
        if mask[idx] != 1:
            continue
        for c in range(num_classes):
            yc = 1.0 if y[idx] == c else 0.0
            total += (p[(c,) + idx] - yc) ** 2
    return total / (count * num_classes)


# ---------------------------------------------------------------------------
# selection (agreement mask + masked self cross-entropy + argmin)


def select_student_loop(p1: np.ndarray, p2: np.ndarray):
    """Returns (chosen, e1, e2, agreement_mask) via explicit voxel loops."""
    shape = p1.shape[1:]
    agree = np.zeros(shape, dtype=np.uint8)
    e1 = 0.0
    e2 = 0.0
    for idx in np.ndindex(*shape):
        v1 = [p1[(c,) + idx] for c in range(p1.shape[0])]
        v2 = [p2[(c,) + idx] for c in range(p2.shape[0])]
        a1 = v1.index(max(v1))
        a2 = v2.index(max(v2))
        if a1 == a2:
            agree[idx] = 1
            e1 += -math.log(max(v1[a1], 1e-12))
            e2 += -math.log(max(v2[a2], 1e-12))
    chosen = 1 if e1 <= e2 else 2
    return chosen, e1, e2, agree


# ---------------------------------------------------------------------------
# connected components (BFS flood fill, face adjacency)


def _face_neighbors(idx, shape):
    for axis in range(len(shape)):
        for step in (-1, 1):
            nxt = list(idx)
            nxt[axis] += step
            if 0 <= nxt[axis] < shape[axis]:
                yield tuple(nxt)


def flood_fill_components(mask: np.ndarray) -> list[list[tuple]]:
    """All face-connected components of a boolean mask, as voxel lists."""
    seen = np.zeros(mask.shape, dtype=bool)
    components = []
    for start in np.ndindex(*mask.shape):
        if not mask[start] or seen[start]:
            continue
        comp = []
        queue = deque([start])
        seen[start] = True
        while queue:
            cur = queue.popleft()
            comp.append(cur)
            for nxt in _face_neighbors(cur, mask.shape):
                if mask[nxt] and not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
        components.append(comp)
    return components


def largest_component_filter_loop(label: np.ndarray, num_classes: int) -> np.ndarray:
    """Keep, per foreground class, only its largest component (ties: the one
    containing the smallest row-major voxel index)."""
    out = label.copy()
    for cls in range(1, num_classes):
        comps = flood_fill_components(label == cls)
        if len(comps) <= 1:
            continue

        def rank(comp):
            best = min(np.ravel_multi_index(v, label.shape) for v in comp)
            return (-len(comp), best)

        keep = min(comps, key=rank)
        keep_set = set(keep)
        for comp in comps:
            if comp is keep:
                continue
            for v in comp:
                if v not in keep_set:
                    out[v] = 0
    return out


# ---------------------------------------------------------------------------
# metrics


def dice_jaccard_sets(pred: np.ndarray, gt: np.ndarray, cls: int) -> tuple[float, float]:
    a = {tuple(v) for v in np.argwhere(pred == cls)}
    b = {tuple(v) for v in np.argwhere(gt == cls)}
    if not a and not b:
        return 1.0, 1.0
    inter = len(a & b)
    return 2.0 * inter / (len(a) + len(b)), inter / len(a | b)


def boundary_loop(mask: np.ndarray) -> list[tuple]:
    """Foreground voxels with a face-adjacent background neighbor; positions
    outside the array count as background."""
    out = []
    for idx in np.ndindex(*mask.shape):
        if not mask[idx]:
            continue
        on_boundary = False
        for axis in range(mask.ndim):
            for step in (-1, 1):
                nxt = list(idx)
                nxt[axis] += step
                if not (0 <= nxt[axis] < mask.shape[axis]) or not mask[tuple(nxt)]:
                    on_boundary = True
        if on_boundary:
            out.append(idx)
    return out


def _percentile_linear(values: list[float], q: float) -> float:
    vals = sorted(values)
    if len(vals) == 1:
        return vals[0]
    h = (len(vals) - 1) * (q / 100.0)
    lo = math.floor(h)
    frac = h - lo
    if lo + 1 >= len(vals):
        return vals[-1]
    return vals[lo] + (vals[lo + 1] - vals[lo]) * frac


def surface_distances_loop(pred: np.ndarray, gt: np.ndarray, cls: int, spacing) -> tuple[float, float]:
    """(hd95, asd) in mm via explicit O(n^2) pairwise distances."""
    bp = boundary_loop(pred == cls)
    bg = boundary_loop(gt == cls)
    if not bp or not bg:
        return float("nan"), float("nan")

    def dist(u, v):
        return math.sqrt(sum(((a - b) * s) ** 2 for a, b, s in zip(u, v, spacing)))

    d_pg = [min(dist(u, v) for v in bg) for u in bp]
    d_gp = [min(dist(v, u) for u in bp) for v in bg]
    hd95 = max(_percentile_linear(d_pg, 95.0), _percentile_linear(d_gp, 95.0))
    asd = 0.5 * (sum(d_pg) / len(d_pg) + sum(d_gp) / len(d_gp))
    return hd95, asd


# ---------------------------------------------------------------------------
# numerical gradients


def finite_difference_grad(fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of an array."""
    grad = np.zeros_like(x, dtype=float)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(x)
        flat[i] = orig - eps
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad
