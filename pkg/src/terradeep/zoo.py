"""Catalog of the pinned learner configurations.

Each entry fixes architecture, optimizer settings and default input mode.
The input shape and class count stored here are the nominal ones (4-vector
or 4 x 64 windows for slip, 128 x 128 images for terrain); evaluation adapts
them to the actual data with :meth:`ZooEntry.network_for`.
"""
from dataclasses import dataclass
import json

from .errors import CatalogError, ParameterError
from .network import (NetworkSpec, TrainConfig, activation, conv1d, conv2d, dense, dropout,
                      flatten, maxpool1d, maxpool2d, with_classes)
from .svm import SvmConfig

SLIP_WINDOW = 64
IMAGE_SIDE = 128
HOG_LENGTH_128 = 8100
SLIP_CLASSES = 3
IMAGE_CLASSES = 11

# sgd entries update after every sample, the classic online backprop setting
MLP_TRAIN = TrainConfig(batch_size=1, epochs=35, optimizer="sgd", learning_rate=0.01)
DEEP_TRAIN = TrainConfig(batch_size=100, epochs=35, optimizer="adadelta", learning_rate=1.0)


@dataclass(frozen=True)
class ZooEntry:
    name: str
    task: str            # "slip" or "image"
    kind: str            # "svm", "mlp", "dnn" or "cnn"
    input_mode: str      # default; every entry also accepts the other mode
    learner: object      # NetworkSpec or SvmConfig
    train: TrainConfig = None
    summary: str = ""

    @property
    def is_network(self):
        return isinstance(self.learner, NetworkSpec)

    def filter_counts(self):
        if not self.is_network:
            return []
        return [l.filters for l in self.learner.layers if l.kind in ("conv1d", "conv2d")]

    def network_for(self, input_shape, n_classes):
        """The entry's network re-targeted to a concrete input shape and class count."""
        if not self.is_network:
            raise ParameterError(f"{self.name} is not a network learner")
        return with_classes(self.learner, n_classes, tuple(input_shape))

    def to_dict(self):
        d = {"name": self.name, "task": self.task, "kind": self.kind,
             "input_mode": self.input_mode, "summary": self.summary}
        if self.is_network:
            d["network"] = self.learner.to_dict()
            d["train"] = self.train.to_dict()
        else:
            d["svm"] = self.learner.to_dict()
        return d


def _cnn1(k):
    return (conv2d(32, k, k), activation("relu"), conv2d(32, k, k), activation("relu"),
            conv2d(64, k, k), activation("relu"), conv2d(64, k, k), activation("relu"),
            maxpool2d(), dropout(0.25), flatten(), dense(100), activation("relu"),
            dense(IMAGE_CLASSES), activation("softmax"))


def _cnn2(k):
    return (conv2d(32, k, k), activation("relu"), conv2d(32, k, k), activation("relu"),
            maxpool2d(),
            conv2d(64, k, k), activation("relu"), conv2d(64, k, k), activation("relu"),
            maxpool2d(), dropout(0.35), flatten(), dense(100), activation("relu"),
            dense(IMAGE_CLASSES), activation("softmax"))


def _slip_cnn(k):
    return (conv1d(128, k), activation("relu"), conv1d(64, k), activation("relu"),
            conv1d(32, k), activation("relu"), maxpool1d(), dropout(0.1), flatten(),
            dense(100), activation("relu"), dense(SLIP_CLASSES), activation("softmax"))


def _mlp(hidden, n_out):
    layers = []
    for h in hidden:
        layers += [dense(h), activation("sigmoid")]
    return tuple(layers) + (dense(n_out), activation("softmax"))


def _make(name, kernel):
    img = (1, IMAGE_SIDE, IMAGE_SIDE)
    if name == "slip-svm":
        return ZooEntry(name, "slip", "svm", "filtered", SvmConfig(),
                        summary="RBF-kernel SVM (SMO, C=1, gamma=1/d), one-vs-one, 4-vector input")
    if name == "slip-mlp":
        return ZooEntry(name, "slip", "mlp", "filtered",
                        NetworkSpec((4,), _mlp([30], SLIP_CLASSES)), MLP_TRAIN,
                        "MLP, 1 hidden sigmoid layer x30, sgd eta=0.01")
    if name == "slip-dnn":
        return ZooEntry(name, "slip", "dnn", "filtered",
                        NetworkSpec((4,), _mlp([100], SLIP_CLASSES)), DEEP_TRAIN,
                        "dense 100 sigmoid -> dense 3 softmax, adadelta, batch 100, 35 epochs")
    if name == "slip-cnn":
        return ZooEntry(name, "slip", "cnn", "raw",
                        NetworkSpec((4, SLIP_WINDOW), _slip_cnn(kernel)), DEEP_TRAIN,
                        f"1-D CNN, filters [128, 64, 32] width {kernel}, maxpool, dropout 0.1, "
                        "dense 100 -> 3")
    if name == "image-dnn":
        return ZooEntry(name, "image", "dnn", "raw",
                        NetworkSpec((IMAGE_SIDE * IMAGE_SIDE,), _mlp([100], IMAGE_CLASSES)),
                        DEEP_TRAIN, "input 16384 -> dense 100 sigmoid -> dense 11 softmax, adadelta")
    if name == "image-mlp1":
        return ZooEntry(name, "image", "mlp", "filtered",
                        NetworkSpec((HOG_LENGTH_128,), _mlp([30], IMAGE_CLASSES)), MLP_TRAIN,
                        "MLP, 1 hidden sigmoid layer x30, sgd eta=0.01")
    if name == "image-mlp2":
        return ZooEntry(name, "image", "mlp", "filtered",
                        NetworkSpec((HOG_LENGTH_128,), _mlp([15, 15], IMAGE_CLASSES)), MLP_TRAIN,
                        "MLP, 2 hidden sigmoid layers x15, sgd eta=0.01")
    if name == "image-cnn1":
        return ZooEntry(name, "image", "cnn", "raw", NetworkSpec(img, _cnn1(kernel)), DEEP_TRAIN,
                        f"2-D CNN, filters [32, 32, 64, 64] {kernel}x{kernel}, one maxpool, "
                        "dropout 0.25, dense 100 -> 11")
    if name == "image-cnn2":
        return ZooEntry(name, "image", "cnn", "raw", NetworkSpec(img, _cnn2(kernel)), DEEP_TRAIN,
                        f"2-D CNN, filters [32, 32] pool [64, 64] pool, {kernel}x{kernel}, "
                        "dropout 0.35, dense 100 -> 11")
    raise CatalogError(f"unknown learner {name!r}; valid names: {', '.join(CATALOG)}")


CATALOG = ("slip-svm", "slip-mlp", "slip-dnn", "slip-cnn",
           "image-dnn", "image-mlp1", "image-mlp2", "image-cnn1", "image-cnn2")


def build(name, kernel=3):
    """Return the pinned entry ``name``; ``kernel`` overrides the conv kernel size."""
    if kernel < 1:
        raise ParameterError("kernel size must be >= 1")
    return _make(name, kernel)


def list_catalog():
    return [(name, build(name).summary) for name in CATALOG]


def catalog_json():
    return json.dumps({name: build(name).to_dict() for name in CATALOG}, indent=2, sort_keys=True)
