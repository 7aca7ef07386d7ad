"""Layout quality metrics: validity, max-IoU overlap, Fréchet distance,
occlusion and readability.

Every metric except validity itself only looks at valid elements, those
covering more than 0.1% of the canvas.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import BBox, Layout, iou
from .saliency import SaliencyMap

VALID_AREA = 0.001
DEFAULT_TEXT_CATEGORIES = ("text",)


def validity(layout: Layout) -> tuple[float, list[bool]]:
    mask = [e.bbox.area > VALID_AREA for e in layout.elements]
    if not mask:
        return 1.0, []
    return sum(mask) / len(mask), mask


def valid_boxes(layout: Layout) -> list[BBox]:
    _, mask = validity(layout)
    return [e.bbox for e, ok in zip(layout.elements, mask) if ok]


def delta_val(gen_ratio: float, ref_ratio: float) -> float:
    return abs(gen_ratio - ref_ratio)


def overlap_max_iou(layout: Layout) -> float:
    boxes = valid_boxes(layout)
    return max((iou(a, b) for a, b in itertools.combinations(boxes, 2)), default=0.0)


@dataclass(frozen=True, eq=False)
class LayoutDescriptor:
    """Category histogram, element count, mean/std of centers, mean/std of sizes."""

    vector: np.ndarray
    empty: bool = False


def layout_descriptor(layout: Layout, category_order: Sequence[str]) -> LayoutDescriptor:
    _, mask = validity(layout)
    elements = [e for e, ok in zip(layout.elements, mask) if ok]
    hist = np.zeros(len(category_order))
    slot = {c: k for k, c in enumerate(category_order)}
    for e in elements:
        if e.category not in slot:
            raise ValueError(f"category {e.category!r} not in {list(category_order)}")
        hist[slot[e.category]] += 1
    if not elements:
        return LayoutDescriptor(np.zeros(len(category_order) + 9), empty=True)
    cx = np.array([e.bbox.cx for e in elements])
    cy = np.array([e.bbox.cy for e in elements])
    w = np.array([e.bbox.w for e in elements])
    h = np.array([e.bbox.h for e in elements])
    stats = [len(elements), cx.mean(), cy.mean(), cx.std(), cy.std(),
             w.mean(), h.mean(), w.std(), h.std()]
    return LayoutDescriptor(np.concatenate([hist, stats]))


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    if vals.min(initial=0.0) < -1e-8:
        warnings.warn(f"covariance eigenvalue {vals.min():.3g} clipped to 0", RuntimeWarning,
                      stacklevel=3)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(set_a, set_b) -> float:
    """Fréchet distance between Gaussian fits of two descriptor sets.

    The cross term uses the symmetric form sqrt(sqrt(A) B sqrt(A)), whose
    trace equals that of sqrt(A B).
    """
    a = np.asarray([d.vector if isinstance(d, LayoutDescriptor) else d for d in set_a], float)
    b = np.asarray([d.vector if isinstance(d, LayoutDescriptor) else d for d in set_b], float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each set needs at least two descriptors")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))
    if not (np.all(np.isfinite(cov_a)) and np.all(np.isfinite(cov_b))):
        raise ValueError("non-finite covariance")
    root_a = _sqrtm_psd(cov_a)
    cross = _sqrtm_psd(root_a @ cov_b @ root_a)
    diff = mu_a - mu_b
    fd = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2 * np.trace(cross))
    return max(fd, 0.0)


def element_mask(boxes: Sequence[BBox], height: int, width: int) -> np.ndarray:
    """Pixels whose centers fall inside any box: x0 <= j + 0.5 < x1 in pixel units."""
    mask = np.zeros((height, width), dtype=bool)
    for b in boxes:
        c0 = max(int(np.ceil(b.x * width - 0.5)), 0)
        c1 = min(int(np.ceil(b.x2 * width - 0.5)), width)
        r0 = max(int(np.ceil(b.y * height - 0.5)), 0)
        r1 = min(int(np.ceil(b.y2 * height - 0.5)), height)
        mask[r0:r1, c0:c1] = True
    return mask


def _check_shape(layout: Layout, raster: SaliencyMap, what: str):
    expected = (layout.canvas_h_px, layout.canvas_w_px)
    if raster.values.shape != expected:
        raise ValueError(f"{what} is {raster.values.shape[::-1]} but the canvas is "
                         f"{expected[::-1]}")


def occlusion(layout: Layout, smap: SaliencyMap, mode: str = "mean",
              check_size: bool = True) -> float:
    """Saliency under the union of valid elements.

    ``mean``: average saliency over covered pixels. ``mass``: covered
    saliency as a fraction of all saliency.
    """
    if check_size:
        _check_shape(layout, smap, "saliency map")
    mask = element_mask(valid_boxes(layout), smap.height, smap.width)
    covered = smap.values[mask]
    if mode == "mean":
        return float(covered.sum() / covered.size) if covered.size else 0.0
    if mode == "mass":
        total = smap.values.sum()
        return float(covered.sum() / total) if total > 0 else 0.0
    raise ValueError(f"unknown occlusion mode {mode!r}")


def gradient_magnitude(gray: np.ndarray) -> np.ndarray:
    """|d/dx| + |d/dy| with central differences (one-sided at the border)."""
    gray = np.asarray(gray, dtype=np.float64)
    gy, gx = np.gradient(gray)
    return np.abs(gx) + np.abs(gy)


def readability(layout: Layout, canvas_gray: SaliencyMap,
                text_categories: Sequence[str] = DEFAULT_TEXT_CATEGORIES,
                check_size: bool = True) -> float:
    if check_size:
        _check_shape(layout, canvas_gray, "canvas image")
    _, valid = validity(layout)
    boxes = [e.bbox for e, ok in zip(layout.elements, valid)
             if ok and e.category in text_categories]
    if not boxes:
        return 0.0
    mask = element_mask(boxes, canvas_gray.height, canvas_gray.width)
    if not mask.any():
        return 0.0
    return float(gradient_magnitude(canvas_gray.values)[mask].mean())


@dataclass
class MetricReport:
    delta_val: float
    ove: float
    fd: float | None
    occ: float | None
    rea: float | None
    per_layout: list[dict] = field(default_factory=list)

    def summary(self) -> dict:
        return {"delta_val": self.delta_val, "ove": self.ove, "fd": self.fd,
                "occ": self.occ, "rea": self.rea}


def _mean_or_none(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def evaluate(generated: Sequence[Layout], reference: Sequence[Layout],
             category_order: Sequence[str],
             saliency_maps: Sequence[SaliencyMap | None] | None = None,
             canvases: Sequence[SaliencyMap | None] | None = None,
             occ_mode: str = "mean",
             text_categories: Sequence[str] = DEFAULT_TEXT_CATEGORIES) -> MetricReport:
    """Corpus metrics for ``generated`` against ``reference``.

    Rasters, when given, align with ``generated``; a missing raster leaves
    that layout out of Occ or Rea.
    """
    n = len(generated)
    saliency_maps = saliency_maps or [None] * n
    canvases = canvases or [None] * n
    rows = []
    for k, layout in enumerate(generated):
        ratio, _ = validity(layout)
        smap, canvas = saliency_maps[k], canvases[k]
        rows.append({
            "index": k,
            "validity": ratio,
            "ove": overlap_max_iou(layout),
            "occ": occlusion(layout, smap, occ_mode) if smap is not None else None,
            "rea": readability(layout, canvas, text_categories) if canvas is not None else None,
        })
    gen_ratio = float(np.mean([r["validity"] for r in rows])) if rows else 1.0
    ref_ratio = float(np.mean([validity(l)[0] for l in reference])) if reference else 1.0

    fd = None
    gen_desc = [layout_descriptor(l, category_order) for l in generated]
    ref_desc = [layout_descriptor(l, category_order) for l in reference]
    if len(gen_desc) >= 2 and len(ref_desc) >= 2:
        fd = frechet_distance(gen_desc, ref_desc)

    return MetricReport(
        delta_val=delta_val(gen_ratio, ref_ratio),
        ove=float(np.mean([r["ove"] for r in rows])) if rows else 0.0,
        fd=fd,
        occ=_mean_or_none(r["occ"] for r in rows),
        rea=_mean_or_none(r["rea"] for r in rows),
        per_layout=rows,
    )
