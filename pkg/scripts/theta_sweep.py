"""How the rebalance temperature flattens a long-tailed cluster distribution.

Prints, for each theta, the sampling weights, their entropy and the share
of draws landing in the largest cluster (checked empirically with the
seeded sampler).
"""

import argparse

import numpy as np

from relayout.prototype import entropy, rebalance_weights, sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--counts", default="4000,2000,1000,500,250,120,60,30",
                    help="comma-separated cluster sizes")
    ap.add_argument("--thetas", default="1,2,3,6,10,100,1000")
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    counts = np.array([int(c) for c in args.counts.split(",")])
    assignments = np.repeat(np.arange(len(counts)), counts)
    print(f"counts {counts.tolist()}  max entropy {np.log(np.count_nonzero(counts)):.4f}")
    print(f"{'theta':>7} {'entropy':>8} {'w_max':>7} {'drawn_max':>9}  weights")
    for theta in (float(t) for t in args.thetas.split(",")):
        w = rebalance_weights(counts, theta)
        drawn = sample(assignments, w, args.draws, args.seed)
        share = float((assignments[drawn] == counts.argmax()).mean())
        print(f"{theta:7g} {entropy(w):8.4f} {w.max():7.4f} {share:9.4f}  "
              + " ".join(f"{v:.3f}" for v in w))


if __name__ == "__main__":
    main()
