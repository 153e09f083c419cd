"""Feature-count sweeps and held-out scores for PCA, PCA-LDA and R-UMLDA.

Generates the synthetic corpus, sweeps P for each method, refits at the
CV-optimal P and writes curves CSV plus one metrics JSON per method.

    python scripts/compare_methods.py --out results/compare [--full]
"""

import argparse
import time
from pathlib import Path

from ghm.evaluation import SplitSpec, feature_sweep, run_experiment
from ghm.formats import atomic_write, dumps_json
from ghm.pipeline import PipelineConfig
from ghm.preprocess import assemble_many
from ghm.spectrogram import StftConfig
from ghm.synth import CLASSES, SynthConfig, gen_dataset

P_RANGES = {"pca": range(1, 13), "pca_lda": range(1, 9), "rumlda": range(1, 9)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/compare")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--mode", default="merged", choices=["merged", "pair"])
    ap.add_argument("--full", action="store_true", help="200 x 512 spectrograms instead of 50 x 64")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    stft = StftConfig() if args.full else StftConfig(window_len=126, frames=50, bins=64)
    spec = SplitSpec(seed=args.seed)
    out = Path(args.out)
    t0 = time.perf_counter()
    ds = gen_dataset(SynthConfig(seed=args.seed))
    x = assemble_many(ds.observations, stft, args.mode)
    print(f"corpus {x.shape} in {time.perf_counter() - t0:.1f} s")

    print(f"{'method':8s} {'P*':>3s} {'train':>7s} {'cv':>7s} {'test':>7s}  NOK3 F1")
    for method, p_range in P_RANGES.items():
        if args.mode == "pair" and method != "rumlda":
            p_range = range(1, 9)
        cfg = PipelineConfig(method=method, threads=args.threads)
        sweep = feature_sweep(x, ds.labels, cfg, p_range, spec)
        lines = ["P,train_accuracy,cv_accuracy,test_accuracy"]
        lines += [f"{p},{a!r},{b!r},{c!r}" for p, a, b, c in sweep.rows()]
        atomic_write(out / f"curves_{method}.csv", "\n".join(lines) + "\n")
        rep = run_experiment(x, ds.labels, PipelineConfig(method=method, p=sweep.optimal_p), spec)
        atomic_write(out / f"metrics_{method}.json", dumps_json(rep.to_dict(CLASSES)))
        print(
            f"{method:8s} {sweep.optimal_p:3d} {100 * rep.train.accuracy:6.2f}% {100 * rep.cv.mean_accuracy:6.2f}% "
            f"{100 * rep.test.accuracy:6.2f}%  {100 * rep.test.per_class_f1[3]:.2f}%"
        )
    print(f"total {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
