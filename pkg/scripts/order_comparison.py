"""R-UMLDA on merged maps versus the duplicated-channel third-order tensor and the true channel pair.

    python scripts/order_comparison.py
"""

import argparse

import numpy as np

from ghm.evaluation import SplitSpec, run_experiment
from ghm.preprocess import assemble_many
from ghm.pipeline import PipelineConfig
from ghm.spectrogram import StftConfig
from ghm.synth import SynthConfig, gen_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--p", type=int, default=3)
    args = ap.parse_args()
    stft = StftConfig(window_len=126, frames=50, bins=64)
    ds = gen_dataset(SynthConfig(seed=args.seed))
    merged = assemble_many(ds.observations, stft, "merged")
    inputs = {
        "merged (w, b)": merged,
        "duplicated (w, b, 2)": np.stack([merged, merged], axis=-1),
        "pair (w, b, 2)": assemble_many(ds.observations, stft, "pair"),
    }
    spec = SplitSpec(seed=args.seed)
    cfg = PipelineConfig(method="rumlda", p=args.p)
    preds = {}
    for name, x in inputs.items():
        rep = run_experiment(x, ds.labels, cfg, spec, cv=False)
        preds[name] = rep.model.predict(x[rep.test_idx])
        print(f"{name:22s} test {100 * rep.test.accuracy:6.2f}%")
    same = np.array_equal(preds["merged (w, b)"], preds["duplicated (w, b, 2)"])
    print(f"merged and duplicated predictions identical: {same}")


if __name__ == "__main__":
    main()
