"""Command line entry point: ``relayout <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .dataset import annotate_all, read_jsonl, split
from .geometry import layout_from_record
from .prototype import (ClusterModel, PrototypeFeatures, entropy, fit_prototypes,
                        rebalance_weights, sample)
from .region_tree import build_region_tree, render_tree
from .saliency import blocks_to_json, extract_blocks, load_saliency_map
from .serializer import parse_output, serialize_output
from .synth import random_tree

logger = logging.getLogger("relayout")


def _config(args, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return load_config(getattr(args, "config", None), overrides)


def _read_layout_records(path: Path) -> list[dict]:
    """Records from a JSONL file, or from every *.jsonl / *.json file of a directory."""
    files = sorted(path.glob("*.jsonl")) + sorted(path.glob("*.json")) if path.is_dir() else [path]
    records = []
    for f in files:
        if f.suffix == ".json":
            records.append(json.loads(f.read_text(encoding="utf-8")))
        else:
            records.extend(json.loads(line) for _, line in read_jsonl(f))
    return records


def cmd_annotate(args) -> int:
    cfg = _config(args, input=args.input, output_dir=args.out, saliency_dir=args.saliency_dir,
                  seed=args.seed, jobs=args.jobs, task=args.task)
    result = annotate_all(cfg)
    counts = result.manifest["counts"]
    print(f"annotated {counts['annotated']}/{counts['records']} records "
          f"({counts['failed']} failed) -> {result.output_dir}")
    print(f"manifest sha256 {result.manifest_hash}")
    return result.exit_code


def cmd_saliency(args) -> int:
    cfg = _config(args, tau_bin=args.tau_bin, s_min=args.s_min, max_blocks=args.max_blocks)
    blocks = extract_blocks(load_saliency_map(args.map), cfg.tau_bin, cfg.s_min, cfg.max_blocks)
    text = json.dumps(blocks_to_json(blocks), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_cluster(args) -> int:
    cfg = _config(args, k_clusters=args.k, seed=args.seed, alpha=args.alpha, beta=args.beta,
                  gamma=args.gamma)
    ids, feats = [], []
    for _, line in read_jsonl(args.features):
        row = json.loads(line)
        ids.append(str(row.get("id", len(ids))))
        feats.append(PrototypeFeatures.from_json(row))
    model = fit_prototypes(feats, cfg.k_clusters, cfg.seed, cfg.alpha, cfg.beta, cfg.gamma, ids)
    model.save(args.out)
    print(f"{len(feats)} layouts -> {model.k} clusters, counts {model.counts.tolist()}, "
          f"inertia {model.inertia:.6g}")
    return 0


def cmd_resample(args) -> int:
    cfg = _config(args, theta=args.theta, seed=args.seed)
    model = ClusterModel.load(args.model)
    weights = rebalance_weights(model.counts, cfg.theta)
    n_draws = args.draws if args.draws is not None else len(model.assignments)
    drawn = sample(model.assignments, weights, n_draws, cfg.seed)
    per_cluster = np.bincount(model.assignments[drawn], minlength=model.k)
    summary = {"theta": cfg.theta, "seed": cfg.seed, "draws": n_draws,
               "counts": model.counts.tolist(), "weights": weights.tolist(),
               "entropy": entropy(weights), "drawn_per_cluster": per_cluster.tolist()}
    if args.materialize:
        if not args.records:
            raise SystemExit("--materialize needs --records (the JSONL the model was fitted on)")
        lines = [line.rstrip("\n") for _, line in read_jsonl(args.records)]
        if len(lines) != len(model.assignments):
            raise SystemExit(f"{len(lines)} records but the model has {len(model.assignments)}")
        with open(args.materialize, "w", encoding="utf-8", newline="\n") as f:
            for i in drawn:
                f.write(lines[int(i)] + "\n")
        summary["materialized"] = str(args.materialize)
    else:
        ids = model.ids or [str(i) for i in range(len(model.assignments))]
        summary["indices"] = [int(i) for i in drawn]
        summary["ids"] = [ids[int(i)] for i in drawn]
    print(json.dumps(summary, indent=1))
    return 0


def cmd_split(args) -> int:
    cfg = _config(args, seed=args.seed)
    rows = [json.loads(line) for _, line in read_jsonl(args.input)]
    ratios = tuple(float(r) for r in args.ratios.split(":"))
    labels = split(len(rows), ratios, cfg.seed)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for k, (row, label) in enumerate(zip(rows, labels)):
            out.write(json.dumps({"id": str(row.get("id", k)), "split": label}) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def _load_raster(directory: str | None, ref: str | None, rec_id: str | None):
    from .saliency import load_saliency_map as load

    if not directory:
        return None
    candidates = [Path(directory) / Path(ref).name] if ref else []
    if rec_id:
        candidates.append(Path(directory) / f"{rec_id}.png")
    for p in candidates:
        if p.exists():
            return load(p)
    return None


def cmd_eval(args) -> int:
    from .metrics import evaluate

    cfg = _config(args)
    try:
        gen_rows = _read_layout_records(Path(args.gen))
        ref_rows = _read_layout_records(Path(args.ref))
        gen = [layout_from_record(r, allow_empty=True) for r in gen_rows]
        ref = [layout_from_record(r, allow_empty=True) for r in ref_rows]
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    smaps = [_load_raster(args.saliency, r.get("saliency"), r.get("id")) for r in gen_rows]
    canvases = [_load_raster(args.canvas, r.get("canvas_image"), r.get("id")) for r in gen_rows]
    report = evaluate(gen, ref, cfg.category_order, smaps, canvases, args.occ_mode,
                      cfg.text_categories)
    payload = {"summary": report.summary(), "occ_mode": args.occ_mode,
               "n_generated": len(gen), "n_reference": len(ref),
               "fd_note": "descriptor-space FD; not comparable to learned-feature FD",
               "per_layout": report.per_layout}
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    with open(out.with_suffix(".csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["index", "validity", "ove", "occ", "rea"])
        writer.writeheader()
        writer.writerows(report.per_layout)
    print(json.dumps(report.summary(), indent=1))
    return 0


def _roundtrip(tree, blocks, categories) -> str | None:
    doc = serialize_output(tree, blocks, categories=categories)
    parsed = parse_output(doc)
    cats = [parsed.categories[i] for i in range(len(categories))]
    again = serialize_output(parsed.tree, parsed.blocks, categories=cats)
    if again.text != doc.text:
        return "re-serialized document differs"
    orig = render_tree(tree)
    back = render_tree(parsed.tree)
    if [i for i, _ in orig] != [i for i, _ in back]:
        return "element ids differ"
    worst = max(abs(a - b) for (_, p), (_, q) in zip(orig, back)
                for a, b in zip(p.as_list(), q.as_list()))
    if worst > 5e-4 + 1e-12:
        return f"coordinate error {worst:.2e} above 5e-4"
    return None


def cmd_roundtrip(args) -> int:
    failures = 0
    if args.input:
        cfg = _config(args)
        lines = read_jsonl(args.input)
        total = len(lines)
        for lineno, line in lines:
            layout = layout_from_record(json.loads(line))
            tree = build_region_tree(layout, cfg.phi, cfg.eps_par, cfg.align_tol)
            err = _roundtrip(tree, [], [e.category for e in layout.elements])
            if err:
                failures += 1
                print(f"line {lineno}: {err}")
    else:
        rng = np.random.default_rng(args.seed)
        total = args.random
        for k in range(total):
            tree, layout = random_tree(rng)
            err = _roundtrip(tree, [], [e.category for e in layout.elements])
            if err:
                failures += 1
                print(f"tree {k}: {err}")
    print(f"{total - failures}/{total} round trips exact")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relayout", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat key = value config file")
        sp.set_defaults(func=func)
        return sp

    sp = add("annotate", cmd_annotate, "annotate a layout JSONL corpus")
    sp.add_argument("--input")
    sp.add_argument("--out")
    sp.add_argument("--saliency-dir")
    sp.add_argument("--task")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--jobs", type=int)

    sp = add("saliency", cmd_saliency, "extract salient blocks from a grayscale map")
    sp.add_argument("map")
    sp.add_argument("--tau-bin", type=float)
    sp.add_argument("--s-min", type=float)
    sp.add_argument("--max-blocks", type=int)
    sp.add_argument("--out")

    sp = add("cluster", cmd_cluster, "cluster prototype features")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--gamma", type=float)

    sp = add("resample", cmd_resample, "draw a rebalanced sample from a cluster model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--draws", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--materialize", help="write the drawn records to this JSONL")
    sp.add_argument("--records", help="records JSONL aligned with the model assignments")

    sp = add("split", cmd_split, "seeded train/val/test split")
    sp.add_argument("--input", required=True)
    sp.add_argument("--ratios", default="8:1:1")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")

    sp = add("eval", cmd_eval, "compute the metric suite")
    sp.add_argument("--gen", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--saliency")
    sp.add_argument("--canvas")
    sp.add_argument("--occ-mode", choices=("mean", "mass"), default="mean")
    sp.add_argument("--out", default="report.json")

    sp = add("roundtrip-check", cmd_roundtrip, "serialize/parse/serialize check")
    sp.add_argument("--input", help="layout JSONL; default: random trees")
    sp.add_argument("--random", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
