"""Mean DER over a grid of initial thresholds and triplet-loss gammas.

Prints one row per grid point plus the baseline, in the layout of a
threshold-by-gamma bar plot. Pass --csv to also write the table.
"""

import argparse
import csv
from dataclasses import replace

import numpy as np

from ssahc.experiment import CorpusConfig, make_corpus, mean_ssa_der
from ssahc.model import Hyperparams
from ssahc.pipeline import run_baseline
from ssahc.scoring import compute_der


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--first-seed", type=int, default=5000)
    p.add_argument("--thresholds", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--gammas", type=float, nargs="+", default=[0.2, 0.4, 0.6])
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--csv")
    args = p.parse_args()

    corpus = make_corpus(CorpusConfig(size=args.size, first_seed=args.first_seed))
    hp = Hyperparams(lam=args.lam)
    base = np.mean([
        compute_der(ref, run_baseline(rec, corpus.whitening,
                                      replace(hp, target_speakers=n)).turns).der
        for rec, ref, n in zip(corpus.recordings, corpus.references, corpus.speaker_counts())])
    print(f"baseline cosine AHC: {base:.2f}")
    rows = []
    for th in args.thresholds:
        line = [f"threshold {th:<4}"]
        for g in args.gammas:
            der = mean_ssa_der(corpus, replace(hp, init_threshold=th, gamma=g))
            rows.append((th, g, args.lam, der))
            line.append(f"g={g}: {der:6.2f}")
        print("  ".join(line))
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["threshold", "gamma", "lambda", "mean_der"])
            w.writerows((th, g, lam, f"{d:.4f}") for th, g, lam, d in rows)


if __name__ == "__main__":
    main()
