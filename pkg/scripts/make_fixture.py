"""Write a synthetic poster corpus (records.jsonl plus saliency and canvas PNGs)."""

import argparse

from relayout.synth import make_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("-n", type=int, default=100, help="number of records")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--corrupt", type=int, default=0, help="malformed lines appended at the end")
    ap.add_argument("--canvas", default="120x160", help="WIDTHxHEIGHT in pixels")
    args = ap.parse_args()
    w, h = (int(v) for v in args.canvas.lower().split("x"))
    path = make_fixture(args.out_dir, args.n, args.seed, args.corrupt, (w, h))
    print(path)


if __name__ == "__main__":
    main()
