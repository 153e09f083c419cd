"""Class separability of the synthetic corpus across jitter levels and resolutions.

    python scripts/generator_fitness.py
"""

import argparse
from dataclasses import replace

from ghm.preprocess import assemble_many
from ghm.spectrogram import StftConfig
from ghm.synth import SynthConfig, gen_dataset, separability_ratio

LAYOUTS = {"50x64": StftConfig(window_len=126, frames=50, bins=64), "200x512": StftConfig()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--jitters", type=float, nargs="+", default=[0.0, 0.5, 1.0, 1.5, 2.0])
    args = ap.parse_args()
    base = SynthConfig(seed=args.seed)
    print("jitter " + " ".join(f"{name:>9s}" for name in LAYOUTS))
    for j in args.jitters:
        ds = gen_dataset(replace(base, jitter=j))
        ratios = [separability_ratio(assemble_many(ds.observations, s, "merged"), ds.labels) for s in LAYOUTS.values()]
        print(f"{j:6.2f} " + " ".join(f"{r:9.2f}" for r in ratios))


if __name__ == "__main__":
    main()
