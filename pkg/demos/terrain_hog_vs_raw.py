"""Terrain images: a dense network on HOG descriptors versus raw pixels.

Also prints the HOG descriptor length and a nearest-centroid baseline.
Takes well under a minute at the default sizes.

    python3 demos/terrain_hog_vs_raw.py [--per-class 60] [--runs 2]
"""
import argparse

import numpy as np

from terradeep.datasets import TERRAIN_CLASSES, SplitPlan, holdout_split, synth_terrain
from terradeep.evaluation import prepare_dataset, run_experiment
from terradeep.network import TrainConfig
from terradeep.zoo import build


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--per-class", type=int, default=60)
    ap.add_argument("--runs", type=int, default=2)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    corpus = synth_terrain(TERRAIN_CLASSES[:6], args.per_class, 64, args.seed)
    entry = build("image-dnn")
    hog = prepare_dataset(entry, corpus, "filtered")
    print(f"{len(corpus)} images, HOG length {hog.features.shape[1]}")

    tr, te = holdout_split(len(hog), 2 / 3, args.seed)
    cent = np.array([hog.features[tr][hog.labels[tr] == k].mean(0) for k in range(hog.n_classes)])
    dist = ((hog.features[te][:, None] - cent[None]) ** 2).sum(-1)
    print(f"nearest centroid on HOG: {np.mean(dist.argmin(1) == hog.labels[te]):.3f}")

    plan = SplitPlan.default(args.seed, args.runs)
    cfg = TrainConfig(batch_size=50, epochs=20)
    for mode in ("filtered", "raw"):
        data = prepare_dataset(entry, corpus, mode)
        rep = run_experiment(entry, data, plan, mode=mode, train_cfg=cfg)
        print(f"image-dnn {mode:8s} accuracy {rep.accuracy_mean:.3f} +- {rep.accuracy_std:.3f}")


if __name__ == "__main__":
    main()
