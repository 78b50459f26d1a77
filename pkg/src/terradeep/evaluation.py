"""Repeated hold-out evaluation: accuracy, confusion matrices, epoch curves.

Every run splits the data with its own seed, fits standardization on the
training side only, trains the learner with the same seed and scores the
test side. Reports aggregate the runs with the mean and population
standard deviation of accuracy.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import json
import os
from pathlib import Path
import time

import numpy as np

from .core import Standardizer
from .datasets import LabeledDataset, SplitPlan, holdout_split
from .errors import (DatasetError, ExperimentError, InvariantError, LabelError, ParameterError,
                     ShapeError)
from .image_features import HogConfig, hog_batch
from .network import TrainedModel, predict, train
from .signal_features import DEFAULT_NW, assemble_slip_dataset, slip_windows
from .svm import MulticlassSvm, one_vs_one_train
from .zoo import SLIP_WINDOW

NEVER = None  # epoch_stability result when no window is stable


def accuracy(predicted, actual):
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape or p.ndim != 1 or p.size == 0:
        raise ShapeError(f"need two equal-length non-empty label vectors, got {p.shape}, {a.shape}")
    return int(np.sum(p == a)) / p.size


def confusion(predicted, actual, k):
    """k x k counts; rows are actual classes, columns predicted ones."""
    p = np.asarray(predicted, dtype=np.int64)
    a = np.asarray(actual, dtype=np.int64)
    if p.shape != a.shape or p.ndim != 1:
        raise ShapeError(f"label vectors differ in shape: {p.shape} vs {a.shape}")
    for name, v in (("predicted", p), ("actual", a)):
        if v.size and (v.min() < 0 or v.max() >= k):
            raise LabelError(f"{name} labels must lie in [0, {k})")
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (a, p), 1)
    return m


def epoch_stability(curve, window=5, band=0.02):
    """First epoch e whose window curve[e:e + window] spans at most ``band``.

    Returns ``NEVER`` (None) when no window qualifies or the curve is
    shorter than the window.
    """
    c = np.asarray(curve, dtype=np.float64)
    if window < 1:
        raise ParameterError("window must be >= 1")
    for e in range(len(c) - window + 1):
        w = c[e:e + window]
        if w.max() - w.min() <= band:
            return e
    return NEVER


# ------------------------------------------------------------------ inputs

def prepare_dataset(entry, source, mode=None, n_w=DEFAULT_NW, hog=HogConfig()):
    """Turn a raw source into the feature dataset an entry consumes.

    ``source`` is a list of sensor frames for slip entries and an image
    dataset (n, 1, h, w) for image entries.
    """
    mode = mode or entry.input_mode
    if mode not in ("raw", "filtered"):
        raise ParameterError(f"mode must be 'raw' or 'filtered', got {mode!r}")
    if entry.task == "slip":
        if isinstance(source, LabeledDataset):
            raise DatasetError(f"{entry.name} expects sensor frames, got an image dataset")
        if entry.kind == "cnn":
            return slip_windows(source, mode, SLIP_WINDOW, 4, n_w)
        return assemble_slip_dataset(source, mode, n_w)
    if not isinstance(source, LabeledDataset) or source.features.ndim != 4:
        raise DatasetError(f"{entry.name} expects an (n, 1, h, w) image dataset")
    if mode == "filtered":
        if entry.kind == "cnn":
            raise ParameterError(f"{entry.name} takes raw images; HOG descriptors are vectors")
        return LabeledDataset(hog_batch(source.features, hog), source.labels, source.class_names)
    if entry.kind == "cnn":
        return source
    return LabeledDataset(source.features.reshape(len(source), -1), source.labels,
                          source.class_names)


def fit(entry, data, seed=0, train_cfg=None):
    """Fit standardization and the learner on ``data``; returns the model."""
    pre = Standardizer().fit(data.features)
    x = pre.transform(data.features)
    if entry.is_network:
        spec = entry.network_for(x.shape[1:], data.n_classes)
        cfg = replace(train_cfg or entry.train, seed=seed)
        model = train(spec, LabeledDataset(x, data.labels, data.class_names), cfg)
    else:
        model = one_vs_one_train(x, data.labels, entry.learner, data.n_classes, data.class_names)
    model.preprocess = pre
    return model


def predict_labels(model, x):
    if isinstance(model, TrainedModel):
        return predict(model, x)[0]
    if isinstance(model, MulticlassSvm):
        return model.predict(x)
    raise TypeError(f"unsupported model type {type(model).__name__}")


# ------------------------------------------------------------------ reports

@dataclass
class RunRecord:
    index: int
    train_ratio: float
    seed: int
    n_train: int
    n_test: int
    accuracy: float
    confusion: list

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class EvalReport:
    learner: str
    input_mode: str
    class_names: list
    runs: list
    accuracy_mean: float
    accuracy_std: float
    per_ratio_means: dict
    epoch_curves: list
    wall_time_seconds: float
    config: dict
    models: list = field(default=None, repr=False, compare=False)

    def to_dict(self, include_time=False):
        d = {"learner": self.learner, "input_mode": self.input_mode,
             "class_names": list(self.class_names),
             "runs": [r.to_dict() for r in self.runs],
             "accuracy_mean": self.accuracy_mean,
             "accuracy_std": self.accuracy_std, "std_kind": "population",
             "per_ratio_means": self.per_ratio_means,
             "epoch_curves": self.epoch_curves, "config": self.config}
        if include_time:
            d["wall_time_seconds"] = self.wall_time_seconds
        return d

    def to_json(self, include_time=False):
        return json.dumps(self.to_dict(include_time), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        runs = [RunRecord(**r) for r in d["runs"]]
        return cls(d["learner"], d["input_mode"], d["class_names"], runs, d["accuracy_mean"],
                   d["accuracy_std"], d["per_ratio_means"], d["epoch_curves"],
                   d.get("wall_time_seconds", 0.0), d["config"])

    def check_invariants(self, tol=1e-12):
        """Raise InvariantError unless every record is internally consistent."""
        accs = []
        for r in self.runs:
            m = np.asarray(r.confusion)
            if m.sum() != r.n_test:
                raise InvariantError(f"run {r.index}: confusion sums to {m.sum()}, not {r.n_test}")
            if abs(np.trace(m) / m.sum() - r.accuracy) > tol:
                raise InvariantError(f"run {r.index}: trace/total disagrees with accuracy")
            accs.append(r.accuracy)
        if abs(float(np.mean(accs)) - self.accuracy_mean) > tol:
            raise InvariantError("accuracy_mean does not match the runs")
        if abs(float(np.std(accs)) - self.accuracy_std) > tol:
            raise InvariantError("accuracy_std does not match the runs")

    def write(self, out_dir):
        """Report JSON, per-run CSV, confusion CSVs and epoch-curve CSVs.

        Wall time goes to a separate timings.json so that report.json is
        byte-identical between repeated runs.
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "timings.json").write_text(
            json.dumps({"wall_time_seconds": self.wall_time_seconds}) + "\n", encoding="utf-8")
        with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "train_ratio", "seed", "n_train", "n_test", "accuracy"])
            for r in self.runs:
                w.writerow([r.index, r.train_ratio, r.seed, r.n_train, r.n_test, repr(r.accuracy)])
        for r in self.runs:
            with open(out / f"confusion_run{r.index}.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["actual\\predicted"] + list(self.class_names))
                for name, row in zip(self.class_names, r.confusion):
                    w.writerow([name] + list(row))
        for i, curve in enumerate(self.epoch_curves):
            write_curve_csv(curve, out / f"curve_run{i}.csv")
        return out


def write_curve_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "accuracy"])
        for e, a in enumerate(curve, start=1):
            w.writerow([e, repr(float(a))])


def env_threads():
    """Worker cap from TERRADEEP_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("TERRADEEP_THREADS", "1")))
    except ValueError:
        return 1


def _one_run(entry, data, index, ratio, seed, train_cfg):
    tr, te = holdout_split(len(data), ratio, seed)
    model = fit(entry, data.subset(tr), seed, train_cfg)
    pred = predict_labels(model, data.features[te])
    actual = data.labels[te]
    m = confusion(pred, actual, data.n_classes)
    rec = RunRecord(index, ratio, seed, len(tr), len(te), accuracy(pred, actual), m.tolist())
    return rec, model


def run_experiment(entry, dataset, plan, *, mode=None, train_cfg=None, config=None,
                   keep_models=False, threads=None):
    """Evaluate ``entry`` on a prepared feature dataset over every run of ``plan``."""
    if not isinstance(plan, SplitPlan) or len(plan) == 0:
        raise ParameterError("need a non-empty SplitPlan")
    if entry.is_network and train_cfg is None:
        train_cfg = entry.train
    start = time.perf_counter()

    def job(i):
        ratio, seed = plan.runs[i]
        try:
            return _one_run(entry, dataset, i, ratio, seed, train_cfg)
        except Exception as exc:
            raise ExperimentError(i, exc) from exc

    threads = threads or env_threads()
    if threads > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(len(plan))))
    else:
        results = [job(i) for i in range(len(plan))]
    records = [r for r, _ in results]
    models = [m for _, m in results]
    accs = [r.accuracy for r in records]
    ratios = sorted({r.train_ratio for r in records}, reverse=True)
    per_ratio = {repr(q): float(np.mean([r.accuracy for r in records if r.train_ratio == q]))
                 for q in ratios}
    echo = {"learner": entry.name, "input_mode": mode or entry.input_mode,
            "plan": plan.to_dict()["runs"]}
    if entry.is_network:
        echo["train"] = train_cfg.to_dict()
        echo["train"].pop("seed")
    else:
        echo["svm"] = entry.learner.to_dict()
    echo.update(config or {})
    curves = [list(map(float, m.epoch_curve)) for m in models if isinstance(m, TrainedModel)]
    report = EvalReport(entry.name, mode or entry.input_mode, list(dataset.class_names), records,
                        float(np.mean(accs)), float(np.std(accs)), per_ratio, curves,
                        time.perf_counter() - start, echo)
    if keep_models:
        report.models = models
    report.check_invariants()
    return report

