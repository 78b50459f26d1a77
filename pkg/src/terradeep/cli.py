"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 internal
invariant failure. Options may come from a JSON ``--config`` file whose
keys mirror :class:`ExperimentConfig`; flags given on the command line win.
"""
import argparse
from dataclasses import asdict, dataclass, fields
import csv
import json
from pathlib import Path
import sys

from . import tdml
from .datasets import (TERRAIN_CLASSES, SplitPlan, export_image_dir, load_image_dir,
                       load_sensor_csv, synth_slip, synth_terrain, write_sensor_csv)
from .errors import (CatalogError, DatasetError, ExperimentError, FormatError, InvariantError,
                     LabelError, OutlierError, ParameterError, ShapeError, TerraDeepError)
from .evaluation import (RunRecord, EvalReport, accuracy, confusion, fit, predict_labels,
                         prepare_dataset, run_experiment, write_curve_csv)
from .image_features import hog_batch
from .network import TrainedModel
from .signal_features import DEFAULT_NW, assemble_slip_dataset
from .verify import run_suite
from .zoo import CATALOG, build, catalog_json

SYNTH_SLIP_PER_CLASS = 1000
SYNTH_IMAGES_PER_CLASS = 100


class UsageError(TerraDeepError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "slip"
    learner: str = None
    input_mode: str = None
    data: str = None
    synth: bool = False
    n_w: int = DEFAULT_NW
    size: int = 128
    epochs: int = None
    batch: int = None
    runs: int = 10
    per_class: int = None
    classes: list = None
    seed: int = 0
    out: str = "out"
    model: str = None

    def validate(self):
        if self.task not in ("slip", "image"):
            raise UsageError(f"task must be slip or image, got {self.task!r}")
        if self.learner is not None:
            entry = build(self.learner)
            if entry.task != self.task:
                raise UsageError(f"{self.learner} is a {entry.task} learner, task is {self.task}")
        if self.input_mode not in (None, "raw", "filtered"):
            raise UsageError(f"mode must be raw or filtered, got {self.input_mode!r}")
        if self.size not in (64, 128):
            raise UsageError(f"size must be 64 or 128, got {self.size}")
        if self.data is not None and not Path(self.data).exists():
            raise DatasetError(f"data path {self.data} does not exist")
        if self.runs < 1 or self.n_w < 1:
            raise UsageError("runs and nw must be >= 1")
        return self

    def echo(self):
        """Fields that determine results (the output directory does not)."""
        d = asdict(self)
        d.pop("out")
        d.pop("model")
        return d


# flag dest -> config field
_FLAG_FIELDS = {"task": "task", "learner": "learner", "mode": "input_mode", "data": "data",
                "synth": "synth", "nw": "n_w", "size": "size", "epochs": "epochs",
                "batch": "batch", "runs": "runs", "per_class": "per_class", "classes": "classes",
                "seed": "seed", "out": "out", "model": "model"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--task", choices=("slip", "image"))
    p.add_argument("--learner", help="zoo entry name")
    p.add_argument("--mode", choices=("raw", "filtered"))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="sensor CSV file or image corpus directory")
    src.add_argument("--synth", action="store_const", const=True, help="use synthetic data")
    p.add_argument("--nw", type=int, help="sliding-variance window (samples)")
    p.add_argument("--size", type=int, choices=(64, 128), help="image side length")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--runs", type=int, help="hold-out runs (default 10)")
    p.add_argument("--per-class", type=int, dest="per_class", help="synthetic samples per class")
    p.add_argument("--classes", help="comma-separated synthetic terrain classes")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = _Parser(prog="terradeep", description="Terrain and slip classification toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {"synth": "write synthetic corpora as CSV / PGM",
             "features": "write filtered features (slip vectors or HOG) as CSV",
             "train": "fit one zoo entry, write a TDML model and epoch curve",
             "eval": "score a saved model on a dataset, write a report",
             "benchmark": "run the zoo x {raw, filtered} grid with hold-out runs",
             "gradcheck": "finite-difference check of every layer kind and zoo network",
             "zoo": "print the model catalog as JSON"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        if name in ("gradcheck", "zoo"):
            if name == "gradcheck":
                p.add_argument("--seed", type=int, default=0)
                p.add_argument("--quick", action="store_true", help="layer kinds only")
            continue
        _common(p)
        if name == "eval":
            p.add_argument("--model", required=False, help="TDML model file")
    return parser


def resolve_config(args):
    """Merge defaults, the --config file and explicit flags (flags win)."""
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DatasetError(f"cannot read config {args.config}: {exc.strerror}") from None
        except ValueError as exc:
            raise FormatError(f"invalid JSON ({exc})", args.config) from None
        names = {f.name for f in fields(ExperimentConfig)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in raw.items():
            setattr(cfg, k, v)
        explicit = set(raw)
    else:
        explicit = set()
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            setattr(cfg, name, v)
            explicit.add(name)
    if getattr(args, "synth", None):
        cfg.data = None
    elif getattr(args, "data", None):
        cfg.synth = False
    if isinstance(cfg.classes, str):
        cfg.classes = [c for c in cfg.classes.split(",") if c]
    # the learner implies its task unless one was given
    if cfg.learner and "task" not in explicit:
        cfg.task = build(cfg.learner).task
    return cfg.validate()


# ------------------------------------------------------------------ data

def load_source(cfg):
    """Sensor frames (slip) or an image dataset (image) from disk or the generators."""
    if cfg.task == "slip":
        if cfg.data:
            return load_sensor_csv(cfg.data)
        return synth_slip(cfg.per_class or SYNTH_SLIP_PER_CLASS, cfg.n_w, cfg.seed)
    if cfg.data:
        return load_image_dir(cfg.data, cfg.size)
    classes = cfg.classes or TERRAIN_CLASSES
    return synth_terrain(classes, cfg.per_class or SYNTH_IMAGES_PER_CLASS, cfg.size, cfg.seed)


def _need_source(cfg):
    if not cfg.data and not cfg.synth:
        raise UsageError("give --data <path> or --synth")


def _train_cfg(entry, cfg):
    if not entry.is_network:
        return None
    t = entry.train
    changes = {}
    if cfg.epochs is not None:
        changes["epochs"] = cfg.epochs
    if cfg.batch is not None:
        changes["batch_size"] = cfg.batch
    return type(t)(**{**t.to_dict(), **changes})


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ------------------------------------------------------------------ commands

def cmd_zoo(args, out):
    out.write(catalog_json() + "\n")
    return 0


def cmd_gradcheck(args, out):
    results = run_suite(seed=args.seed, include_zoo=not args.quick)
    ok = True
    for r in results:
        status = "ok" if r.passed else "FAIL"
        out.write(f"{r.name:16s} max_rel_err={r.max_error:.3e} tol={r.tolerance:.0e} "
                  f"{status}\n")
        ok &= r.passed
    return 0 if ok else 3


def cmd_synth(args, out):
    cfg = resolve_config(args)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    cfg.synth = True
    src = load_source(cfg)
    if cfg.task == "slip":
        write_sensor_csv(src, dest / "slip.csv")
        out.write(f"wrote {len(src)} frames to {dest / 'slip.csv'}\n")
    else:
        export_image_dir(src, dest / "images")
        out.write(f"wrote {len(src)} images in {src.n_classes} classes to {dest / 'images'}\n")
    return 0


def cmd_features(args, out):
    cfg = resolve_config(args)
    _need_source(cfg)
    src = load_source(cfg)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    mode = cfg.input_mode or "filtered"
    if cfg.task == "slip":
        ds = assemble_slip_dataset(src, mode, cfg.n_w)
        names = ["q1", "q2", "q3", "q4"] if mode == "filtered" else ["torque", "acc_x", "pitch",
                                                                    "acc_z"]
    else:
        if mode != "filtered":
            raise UsageError("image features are HOG descriptors; use --mode filtered")
        ds = hog_batch(src.features)
        ds = type(src)(ds, src.labels, src.class_names)
        names = [f"h{i}" for i in range(ds.features.shape[1])]
    path = dest / "features.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["label"])
        for row, k in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [ds.class_names[k]])
    out.write(f"wrote {len(ds)} feature rows to {path}\n")
    return 0


def _meta(cfg, entry, mode):
    return {"learner": entry.name, "task": entry.task, "input_mode": mode, "n_w": cfg.n_w,
            "size": cfg.size}


def cmd_train(args, out):
    cfg = resolve_config(args)
    if not cfg.learner:
        raise UsageError("train needs --learner")
    _need_source(cfg)
    entry = build(cfg.learner)
    mode = cfg.input_mode or entry.input_mode
    data = prepare_dataset(entry, load_source(cfg), mode, cfg.n_w)
    model = fit(entry, data, cfg.seed, _train_cfg(entry, cfg))
    model.meta = _meta(cfg, entry, mode)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    tdml.save_model(model, dest / "model.tdml")
    if isinstance(model, TrainedModel):
        write_curve_csv(model.epoch_curve, dest / "curve.csv")
    acc = accuracy(predict_labels(model, data.features), data.labels)
    out.write(f"trained {entry.name} ({mode}) on {len(data)} samples, "
              f"training accuracy {acc:.4f}; model at {dest / 'model.tdml'}\n")
    return 0


def cmd_eval(args, out):
    cfg = resolve_config(args)
    if not cfg.model:
        raise UsageError("eval needs --model")
    if not Path(cfg.model).is_file():
        raise DatasetError(f"model file {cfg.model} not found")
    model = tdml.load_model(cfg.model)
    meta = model.meta
    try:
        entry = build(meta["learner"])
    except KeyError:
        raise FormatError("model carries no learner metadata", cfg.model) from None
    cfg.task = entry.task
    cfg.n_w = meta.get("n_w", cfg.n_w)
    cfg.size = meta.get("size", cfg.size)
    mode = meta.get("input_mode", entry.input_mode)
    _need_source(cfg)
    data = prepare_dataset(entry, load_source(cfg), mode, cfg.n_w)
    if tuple(data.class_names) != tuple(model.class_names):
        raise DatasetError(f"dataset classes {data.class_names} differ from the model's "
                           f"{model.class_names}")
    pred = predict_labels(model, data.features)
    m = confusion(pred, data.labels, data.n_classes)
    acc = accuracy(pred, data.labels)
    # a fixed model scores the whole dataset as one run without a training side
    rec = RunRecord(0, 0.0, cfg.seed, 0, len(data), acc, m.tolist())
    curves = [list(map(float, model.epoch_curve))] if isinstance(model, TrainedModel) else []
    echo = cfg.echo()
    echo.update(learner=entry.name, input_mode=mode, model=Path(cfg.model).name)
    report = EvalReport(entry.name, mode, list(data.class_names), [rec], acc, 0.0, {}, curves,
                        0.0, echo)
    report.check_invariants()
    report.write(cfg.out)
    out.write(f"{entry.name} ({mode}) accuracy {acc:.4f} on {len(data)} samples\n")
    return 0


def benchmark_cells(task, learner=None, mode=None):
    """(entry name, mode) pairs of the comparison grid in fixed order."""
    names = [learner] if learner else [n for n in CATALOG if build(n).task == task]
    modes = [mode] if mode else ["raw", "filtered"]
    cells = []
    for n in names:
        for m in modes:
            e = build(n)
            if e.task == "image" and e.kind == "cnn" and m == "filtered":
                continue
            cells.append((n, m))
    return cells


def cmd_benchmark(args, out):
    cfg = resolve_config(args)
    if not cfg.data:
        cfg.synth = True
    src = load_source(cfg)
    plan = SplitPlan.default(cfg.seed, cfg.runs)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    summary = []
    for name, mode in benchmark_cells(cfg.task, cfg.learner, cfg.input_mode):
        entry = build(name)
        data = prepare_dataset(entry, src, mode, cfg.n_w)
        echo = cfg.echo()
        echo.update(learner=name, input_mode=mode)
        report = run_experiment(entry, data, plan, mode=mode, train_cfg=_train_cfg(entry, cfg),
                                config=echo, keep_models=True)
        cell = dest / f"{name}_{mode}"
        report.write(cell)
        model = report.models[0]
        model.meta = _meta(cfg, entry, mode)
        tdml.save_model(model, cell / "model.tdml")
        summary.append({"learner": name, "input_mode": mode,
                        "accuracy_mean": report.accuracy_mean,
                        "accuracy_std": report.accuracy_std,
                        "per_ratio_means": report.per_ratio_means})
        out.write(f"{name:11s} {mode:8s} accuracy {report.accuracy_mean:.4f} "
                  f"+- {report.accuracy_std:.4f}\n")
    _write_json(dest / "summary.json", summary)
    with open(dest / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["learner", "input_mode", "accuracy_mean", "accuracy_std"])
        for row in summary:
            w.writerow([row["learner"], row["input_mode"], repr(row["accuracy_mean"]),
                        repr(row["accuracy_std"])])
    return 0


COMMANDS = {"zoo": cmd_zoo, "gradcheck": cmd_gradcheck, "synth": cmd_synth,
            "features": cmd_features, "train": cmd_train, "eval": cmd_eval,
            "benchmark": cmd_benchmark}


def run_cli(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, CatalogError, ParameterError) as exc:
        err.write(f"terradeep: usage error: {exc}\n")
        return 1
    except (FormatError, DatasetError, OutlierError, LabelError, ShapeError) as exc:
        err.write(f"terradeep: data error: {exc}\n")
        return 2
    except InvariantError as exc:
        err.write(f"terradeep: invariant failure: {exc}\n")
        return 3
    except ExperimentError as exc:
        err.write(f"terradeep: {exc}\n")
        cause = exc.cause
        if isinstance(cause, (FormatError, DatasetError, OutlierError, LabelError, ShapeError)):
            return 2
        if isinstance(cause, ParameterError):
            return 1
        return 3
    except OSError as exc:
        err.write(f"terradeep: data error: {exc}\n")
        return 2


def main():
    sys.exit(run_cli())
