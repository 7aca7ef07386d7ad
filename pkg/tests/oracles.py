"""Brute-force reference implementations, independent of the package code paths."""

from collections import deque
from itertools import combinations

import numpy as np


def raster_box(box_px, size=1000):
    """Boolean mask of an integer pixel box (x, y, w, h)."""
    x, y, w, h = box_px
    m = np.zeros((size, size), dtype=bool)
    m[y:y + h, x:x + w] = True
    return m


def raster_iou(a_px, b_px, size=1000):
    a, b = raster_box(a_px, size), raster_box(b_px, size)
    union = np.logical_or(a, b).sum()
    return np.logical_and(a, b).sum() / union if union else 0.0


def raster_iod(a_px, b_px, size=1000):
    a, b = raster_box(a_px, size), raster_box(b_px, size)
    return np.logical_and(a, b).sum() / a.sum()


def bfs_components(n, adjacent):
    """Components via BFS over a pairwise predicate ``adjacent(i, j)``."""
    seen, comps = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, queue = [], deque([s])
        seen.add(s)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in range(n):
                if v not in seen and (adjacent(u, v) or adjacent(v, u)):
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return sorted(comps, key=lambda c: c[0])


def brute_max_iou(boxes):
    """Max pairwise IoU from raw (x, y, w, h) tuples.

    Identical boxes can round to 1 + 4e-16; IoU is capped at its definitional bound.
    """
    best = 0.0
    for (ax, ay, aw, ah), (bx, by, bw, bh) in combinations(boxes, 2):
        iw = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
        ih = max(0.0, min(ay + ah, by + bh) - max(ay, by))
        inter = iw * ih
        union = aw * ah + bw * bh - inter
        if union > 0:
            best = max(best, min(inter / union, 1.0))
    return best


def exhaustive_best_rect(binary):
    """Rectangle maximising (white - black) pixel count, by full enumeration.

    Returns (x0, y0, x1, y1) half-open. Ties go to the first rectangle found
    in (y0, x0, y1, x1) order.
    """
    h, w = binary.shape
    signed = np.where(binary, 1, -1)
    best, best_rect = -np.inf, None
    for y0 in range(h):
        col_sums = np.zeros(w, dtype=np.int64)
        for y1 in range(y0 + 1, h + 1):
            col_sums += signed[y1 - 1]
            # every x0 < x1 pair for this row band
            prefix = np.concatenate([[0], np.cumsum(col_sums)])
            for x0 in range(w):
                sums = prefix[x0 + 1:] - prefix[x0]
                x1 = int(np.argmax(sums))
                if sums[x1] > best:
                    best, best_rect = sums[x1], (x0, y0, x0 + x1 + 1, y1)
    return best_rect


def union_mask_loop(boxes, height, width):
    """Pixel (i, j) is covered when its center lies in a box, checked per pixel."""
    mask = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            for (x, y, bw, bh) in boxes:
                if (x * width <= j + 0.5 < (x + bw) * width
                        and y * height <= i + 0.5 < (y + bh) * height):
                    mask[i, j] = True
                    break
    return mask


def occlusion_oracle(boxes, values):
    h, w = values.shape
    mask = union_mask_loop(boxes, h, w)
    total, count = 0.0, 0
    for i in range(h):
        for j in range(w):
            if mask[i, j]:
                total += values[i, j]
                count += 1
    return total / count if count else 0.0, total
