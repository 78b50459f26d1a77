"""Slip estimation: the same SVM on raw telemetry versus windowed-variance features.

Runs three hold-out splits on a small synthetic log (about half a minute)
and prints mean accuracy per input mode, plus a 1-D CNN on raw windows.

    python3 demos/slip_raw_vs_filtered.py [--per-class 400] [--runs 3]
"""
import argparse

from terradeep.datasets import SplitPlan, synth_slip
from terradeep.evaluation import prepare_dataset, run_experiment
from terradeep.network import TrainConfig
from terradeep.zoo import build


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--per-class", type=int, default=400)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    frames = synth_slip(args.per_class, 50, args.seed)
    plan = SplitPlan.default(args.seed, args.runs)
    cells = [("slip-svm", "raw", None), ("slip-svm", "filtered", None),
             ("slip-cnn", "raw", TrainConfig(epochs=15))]
    for name, mode, cfg in cells:
        entry = build(name)
        data = prepare_dataset(entry, frames, mode)
        rep = run_experiment(entry, data, plan, mode=mode, train_cfg=cfg)
        print(f"{name:9s} {mode:8s} n={len(data):5d} accuracy {rep.accuracy_mean:.3f} "
              f"+- {rep.accuracy_std:.3f}")


if __name__ == "__main__":
    main()
