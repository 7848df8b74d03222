"""Compare self-supervised AHC with cosine AHC on a synthetic corpus.

The initial clustering threshold is picked on a development corpus, then
both systems are scored on held-out recordings with the oracle speaker count.

    python scripts/relative_improvement.py --size 20 --seeds 1000 2000 3000
"""

import argparse
import time
from dataclasses import replace

from ssahc.experiment import CorpusConfig, compare, make_corpus, select_init_threshold
from ssahc.model import Hyperparams


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=20, help="recordings per corpus")
    p.add_argument("--seeds", type=int, nargs="+", default=[1000],
                   help="first seed of each test corpus")
    p.add_argument("--dev-seed", type=int, default=5000)
    p.add_argument("--thresholds", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--nuisance-scale", type=float, default=1.75)
    p.add_argument("--within-noise", type=float, default=1.0)
    args = p.parse_args()

    base_cfg = CorpusConfig(size=args.size, nuisance_scale=args.nuisance_scale,
                            within_noise=args.within_noise)
    hp = Hyperparams(gamma=args.gamma, lam=args.lam, num_iterations=args.iterations)
    t0 = time.perf_counter()
    dev = make_corpus(replace(base_cfg, first_seed=args.dev_seed, prefix="dev"))
    th, scores = select_init_threshold(dev, hp, args.thresholds)
    for t in args.thresholds:
        print(f"dev  threshold {t:<5} SSA DER {scores[t]:6.2f}")
    print(f"selected threshold {th}")
    for seed in args.seeds:
        test = make_corpus(replace(base_cfg, first_seed=seed, prefix="test"))
        res = compare(test, replace(hp, init_threshold=th))
        gain = res.baseline_mean - res.ssa_mean
        print(f"test seeds {seed}+: baseline {res.baseline_mean:6.2f}  SSA {res.ssa_mean:6.2f}  "
              f"gain {gain:+.2f} ({100 * gain / res.baseline_mean:.0f}% relative)")
    print(f"{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
