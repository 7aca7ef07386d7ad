"""Dataset ingestion, banner merging, splits and batch annotation."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .config import PipelineConfig
from .geometry import Element, Layout, iod, iou, layout_from_record, layout_to_record, union_box
from .prototype import PrototypeFeatures, extract_features, fit_prototypes, rebalance_weights
from .region_tree import RegionNode, build_region_tree, is_hard, tree_to_json
from .saliency import SalientBlock, blocks_to_json, extract_blocks, load_saliency_map
from .serializer import constraints_from_layout, serialize_input, serialize_output

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class DatasetRecord:
    id: str
    layout: Layout
    tree: RegionNode | None = None
    blocks: list[SalientBlock] | None = None
    features: PrototypeFeatures | None = None
    split: str | None = None
    hard: bool = False


def _overlap(a: Element, b: Element) -> float:
    scores = [iou(a.bbox, b.bbox)]
    if a.bbox.area > 0:
        scores.append(iod(a.bbox, b.bbox))
    if b.bbox.area > 0:
        scores.append(iod(b.bbox, a.bbox))
    return max(scores)


def merge_banner(elements: Sequence[Element], text_categories=("text",),
                 underlay_categories=("underlay",), threshold: float = 0.95,
                 banner_category: str = "banner") -> list[Element]:
    """Fuse each text with the underlay it sits on into one banner.

    A (text, underlay) pair merges when IoU or IoD in either direction
    exceeds ``threshold``. Pairs are taken greedily by descending overlap,
    each element at most once; the banner takes the union box and the
    position of the earlier element of the pair.
    """
    pairs = []
    for i, a in enumerate(elements):
        if a.category not in text_categories:
            continue
        for j, b in enumerate(elements):
            if b.category in underlay_categories:
                score = _overlap(a, b)
                if score > threshold:
                    pairs.append((-score, i, j))
    pairs.sort()
    used: set[int] = set()
    banners: dict[int, Element] = {}
    for _, i, j in pairs:
        if i in used or j in used:
            continue
        used.update((i, j))
        text = elements[i]
        banners[min(i, j)] = Element(banner_category, union_box([text.bbox, elements[j].bbox]),
                                     text.text)
    out = []
    for k, e in enumerate(elements):
        if k in banners:
            out.append(banners[k])
        elif k not in used:
            out.append(e)
    return out


def split_counts(n: int, ratios: Sequence[float] = (8, 1, 1)) -> list[int]:
    """Largest-remainder apportionment of ``n`` items to ``ratios``."""
    total = float(sum(ratios))
    exact = [n * r / total for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    order = sorted(range(len(ratios)), key=lambda k: (-(exact[k] - counts[k]), k))
    for k in order[: n - sum(counts)]:
        counts[k] += 1
    return counts


def split(n_records: int, ratios: Sequence[float] = (8, 1, 1), seed: int = 0,
          names: Sequence[str] = SPLITS) -> list[str]:
    """Seeded shuffle, then contiguous train/val/test blocks.

    Returns one split name per record, in input order.
    """
    perm = np.random.default_rng(seed).permutation(n_records)
    labels = [""] * n_records
    start = 0
    for name, count in zip(names, split_counts(n_records, ratios)):
        for pos in perm[start:start + count]:
            labels[int(pos)] = name
        start += count
    return labels


def select_hard(records: Iterable[DatasetRecord]) -> list[DatasetRecord]:
    out = []
    for rec in records:
        if rec.split not in ("val", "test"):
            continue
        if rec.tree is None:
            raise ValueError(f"record {rec.id} has no tree")
        if is_hard(rec.layout, rec.tree):
            out.append(rec)
    return out


# -- batch annotation ------------------------------------------------------------

def read_jsonl(path: str | Path) -> list[tuple[int, str]]:
    with open(path, encoding="utf-8") as f:
        return [(n, line) for n, line in enumerate(f, start=1) if line.strip()]


def _resolve(ref: str | None, saliency_dir: str, base: Path) -> Path | None:
    if not ref:
        return None
    p = Path(ref)
    if p.is_absolute():
        return p
    return (Path(saliency_dir) if saliency_dir else base) / p


def annotate_layout(layout: Layout, config: PipelineConfig,
                    blocks: list[SalientBlock] | None = None) -> DatasetRecord:
    """Banner merge, tree, blocks and prototype features for one layout."""
    if config.merge_banners:
        layout = replace(layout, elements=tuple(merge_banner(
            layout.elements, config.text_categories, config.underlay_categories,
            config.banner_threshold, config.banner_category)))
    tree = build_region_tree(layout, config.phi, config.eps_par, config.align_tol)
    blocks = blocks or []
    features = extract_features(layout.elements, tree, blocks, config.category_order)
    return DatasetRecord("", layout, tree, blocks, features, hard=is_hard(layout, tree))


def _annotate_line(args) -> dict:
    lineno, line, config, base = args
    try:
        raw = json.loads(line)
        rec_id = str(raw.get("id") or f"{lineno:06d}")
        layout = layout_from_record(raw)
        blocks: list[SalientBlock] = []
        map_path = _resolve(layout.saliency_ref, config.saliency_dir, base)
        if map_path is not None:
            if map_path.exists():
                blocks = extract_blocks(load_saliency_map(map_path), config.tau_bin,
                                        config.s_min, config.max_blocks)
            else:
                logger.warning("record %s: saliency map %s not found", rec_id, map_path)
        rec = annotate_layout(layout, config, blocks)
        rec.id = rec_id
        in_doc = serialize_input(constraints_from_layout(rec.layout, config.task), config.task)
        out_doc = serialize_output(rec.tree, rec.blocks, rec.layout)
        return {"ok": True, "line": lineno, "record": rec,
                "input_doc": in_doc.text, "output_doc": out_doc.text}
    except Exception as exc:  # per-record isolation
        return {"ok": False, "line": lineno, "error": f"{type(exc).__name__}: {exc}"}


def _safe_name(rec_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", rec_id)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


@dataclass
class AnnotationResult:
    records: list[DatasetRecord]
    failures: list[dict]
    manifest: dict
    manifest_path: Path
    cluster_model: object | None = None
    weights: np.ndarray | None = None
    exit_code: int = 0
    output_dir: Path = field(default_factory=Path)

    @property
    def manifest_hash(self) -> str:
        return _sha256(self.manifest_path)


def annotate_all(config: PipelineConfig) -> AnnotationResult:
    """Annotate every record of ``config.input`` and write the artifacts.

    Output layout under ``config.output_dir``::

        docs/<id>.input.html   masked input sequence
        docs/<id>.output.html  relation sequence (blocks + region tree)
        index.jsonl            one row per annotated record
        features.jsonl         raw prototype features
        model.json             cluster model with rebalance weights
        manifest.json          config, versions, counts, failures, artifact hashes

    Malformed records are logged and skipped. ``exit_code`` is 1 when the
    failed fraction exceeds ``config.failure_budget``.
    """
    in_path = Path(config.input)
    out = Path(config.output_dir)
    docs = out / "docs"
    docs.mkdir(parents=True, exist_ok=True)

    lines = read_jsonl(in_path)
    jobs = [(n, line, config, in_path.parent) for n, line in lines]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            results = list(pool.map(_annotate_line, jobs, chunksize=8))
    else:
        results = [_annotate_line(j) for j in jobs]

    failures = [{"line": r["line"], "error": r["error"]} for r in results if not r["ok"]]
    ok = []
    seen: set[str] = set()
    for r in results:
        if not r["ok"]:
            continue
        rec_id = r["record"].id
        if rec_id in seen or _safe_name(rec_id) in seen:
            failures.append({"line": r["line"], "error": f"duplicate id {rec_id!r}"})
            continue
        seen.update((rec_id, _safe_name(rec_id)))
        ok.append(r)
    failures.sort(key=lambda f: f["line"])
    for f in failures:
        logger.error("line %d skipped: %s", f["line"], f["error"])

    records = [r["record"] for r in ok]
    for rec, label in zip(records, split(len(records), seed=config.seed)):
        rec.split = label

    model, weights = None, None
    if records:
        model = fit_prototypes([r.features for r in records], config.k_clusters, config.seed,
                               config.alpha, config.beta, config.gamma,
                               ids=[r.id for r in records])
        weights = rebalance_weights(model.counts, config.theta)

    artifacts: list[Path] = []
    index_rows = []
    for k, r in enumerate(ok):
        rec = r["record"]
        stem = _safe_name(rec.id)
        in_file, out_file = docs / f"{stem}.input.html", docs / f"{stem}.output.html"
        in_file.write_text(r["input_doc"], encoding="utf-8", newline="\n")
        out_file.write_text(r["output_doc"], encoding="utf-8", newline="\n")
        artifacts += [in_file, out_file]
        index_rows.append({
            "id": rec.id,
            "line": r["line"],
            "split": rec.split,
            "hard": bool(rec.hard and rec.split in ("val", "test")),
            "cluster": int(model.assignments[k]),
            "n_elements": len(rec.layout),
            "input_doc": str(in_file.relative_to(out)),
            "output_doc": str(out_file.relative_to(out)),
            "layout": layout_to_record(rec.layout),
            "tree": tree_to_json(rec.tree),
            "blocks": blocks_to_json(rec.blocks),
        })
    _write_jsonl(out / "index.jsonl", index_rows)
    _write_jsonl(out / "features.jsonl",
                 ({"id": rec.id, **rec.features.to_json()} for rec in records))
    artifacts += [out / "index.jsonl", out / "features.jsonl"]
    if model is not None:
        model_json = model.to_json()
        model_json["theta"] = config.theta
        model_json["weights"] = weights.tolist()
        _dump_json(out / "model.json", model_json)
        artifacts.append(out / "model.json")

    n_total = len(lines)
    fail_frac = len(failures) / n_total if n_total else 0.0
    split_counts_ = {s: sum(rec.split == s for rec in records) for s in SPLITS}
    manifest = {
        "config": config.content_dict(),
        "config_hash": config.hash(),
        "versions": {"relayout": __version__, "numpy": np.__version__,
                     "python": ".".join(platform.python_version_tuple()[:2])},
        "counts": {
            "records": n_total,
            "annotated": len(records),
            "failed": len(failures),
            "splits": split_counts_,
            "hard": sum(row["hard"] for row in index_rows),
            "clusters": model.counts.tolist() if model is not None else [],
        },
        "failures": failures,
        "artifacts": {str(p.relative_to(out)): _sha256(p) for p in sorted(artifacts)},
    }
    manifest_path = out / "manifest.json"
    _dump_json(manifest_path, manifest)
    exit_code = 1 if fail_frac > config.failure_budget or not records else 0
    return AnnotationResult(records, failures, manifest, manifest_path, model, weights,
                            exit_code, out)
