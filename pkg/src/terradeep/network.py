"""Feed-forward networks: declarative specs, forward/backward passes,
cross-entropy loss, Adadelta and SGD updates, training and prediction.

Batches arrive channels-first, ``(N, C, L)`` or ``(N, C, H, W)``. Spatial
activations are kept channels-last internally so every convolution is a
single im2col matrix product; ``Activations.output`` converts back.
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import json
import math

import numpy as np

from . import core
from .core import Stream, seeded_rng
from .errors import DatasetError, ParameterError, ShapeError, StateError

ACTIVATIONS = ("relu", "sigmoid", "softmax")
PROB_CLIP = 1e-12


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class LayerSpec:
    kind: str
    units: int = 0
    filters: int = 0
    kernel: tuple = ()
    rate: float = 0.0
    fn: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        k = self.kind
        if k == "dense" and self.units < 1:
            raise ParameterError("dense layer needs units >= 1")
        if k in ("conv1d", "conv2d"):
            if self.filters < 1:
                raise ParameterError(f"{k} layer needs filters >= 1")
            if len(self.kernel) != (1 if k == "conv1d" else 2) or min(self.kernel) < 1:
                raise ParameterError(f"{k} layer has invalid kernel {self.kernel}")
        if k == "dropout" and not 0.0 <= self.rate < 1.0:
            raise ParameterError(f"dropout rate must be in [0, 1), got {self.rate}")
        if k == "activation" and self.fn not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.fn!r}")
        if k not in ("dense", "conv1d", "conv2d", "maxpool1d", "maxpool2d",
                     "dropout", "flatten", "activation"):
            raise ParameterError(f"unknown layer kind {k!r}")

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "dense":
            d["units"] = self.units
        elif self.kind in ("conv1d", "conv2d"):
            d["filters"] = self.filters
            d["kernel"] = list(self.kernel)
        elif self.kind == "dropout":
            d["rate"] = self.rate
        elif self.kind == "activation":
            d["fn"] = self.fn
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def describe(self):
        if self.kind == "dense":
            return f"dense {self.units}"
        if self.kind in ("conv1d", "conv2d"):
            return f"{self.kind} {self.filters}@{'x'.join(map(str, self.kernel))}"
        if self.kind == "dropout":
            return f"dropout {self.rate:g}"
        if self.kind == "activation":
            return self.fn
        return self.kind


def dense(units):
    return LayerSpec("dense", units=units)


def conv1d(filters, width=3):
    return LayerSpec("conv1d", filters=filters, kernel=(width,))


def conv2d(filters, kh=3, kw=3):
    return LayerSpec("conv2d", filters=filters, kernel=(kh, kw))


def maxpool1d():
    return LayerSpec("maxpool1d")


def maxpool2d():
    return LayerSpec("maxpool2d")


def dropout(rate):
    return LayerSpec("dropout", rate=rate)


def flatten():
    return LayerSpec("flatten")


def activation(fn):
    return LayerSpec("activation", fn=fn)


def _out_shape(layer, shape):
    k = layer.kind
    if k == "dense":
        if len(shape) != 1:
            raise ShapeError(f"dense layer needs a flat input, got {shape}; add flatten")
        return (layer.units,)
    if k == "conv1d":
        if len(shape) != 2 or shape[1] < layer.kernel[0]:
            raise ShapeError(f"conv1d width {layer.kernel[0]} cannot slide over {shape}")
        return (layer.filters, shape[1] - layer.kernel[0] + 1)
    if k == "conv2d":
        kh, kw = layer.kernel
        if len(shape) != 3 or shape[1] < kh or shape[2] < kw:
            raise ShapeError(f"conv2d kernel {kh}x{kw} cannot slide over {shape}")
        return (layer.filters, shape[1] - kh + 1, shape[2] - kw + 1)
    if k == "maxpool1d":
        if len(shape) != 2 or shape[1] < 2:
            raise ShapeError(f"maxpool1d needs (channels, length >= 2), got {shape}")
        return (shape[0], shape[1] // 2)
    if k == "maxpool2d":
        if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
            raise ShapeError(f"maxpool2d needs (channels, h >= 2, w >= 2), got {shape}")
        return (shape[0], shape[1] // 2, shape[2] // 2)
    if k == "flatten":
        return (math.prod(shape),)
    if k == "activation" and layer.fn == "softmax" and len(shape) != 1:
        raise ShapeError(f"softmax needs a flat input, got {shape}")
    return shape


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape (without the batch axis) and an ordered layer list."""

    input_shape: tuple
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.input_shape or min(self.input_shape) < 1:
            raise ShapeError(f"invalid input shape {self.input_shape}")
        if not self.layers or self.layers[-1] != activation("softmax"):
            raise ShapeError("the final layer must be a softmax activation")
        self.shapes()

    def shapes(self):
        """Per-sample output shape of every layer."""
        out, shape = [], self.input_shape
        for layer in self.layers:
            shape = _out_shape(layer, shape)
            out.append(shape)
        return out

    @property
    def n_classes(self):
        return self.shapes()[-1][0]

    def to_dict(self):
        return {"input_shape": list(self.input_shape),
                "layers": [layer.to_dict() for layer in self.layers]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["input_shape"]), tuple(LayerSpec.from_dict(x) for x in d["layers"]))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def n_parameters(self):
        return sum(p.size for op in _ops(self) for p in op.init(None).values())


# ---------------------------------------------------------------- layer ops

def _glorot(rng, shape, fan_in, fan_out):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    if rng is None:
        return np.zeros(shape)
    return rng.uniform(-bound, bound, size=shape)


class _Op:
    params = ()

    def __init__(self, layer, in_shape, out_shape):
        self.layer, self.in_shape, self.out_shape = layer, in_shape, out_shape

    def init(self, rng):
        return {}

    def forward(self, p, x, train, rng):
        raise NotImplementedError

    def backward(self, p, cache, dy, need_dx):
        raise NotImplementedError


class _Dense(_Op):
    params = ("W", "b")

    def init(self, rng):
        n_in, n_out = self.in_shape[0], self.layer.units
        return {"W": _glorot(rng, (n_in, n_out), n_in, n_out), "b": np.zeros(n_out)}

    def forward(self, p, x, train, rng):
        return x @ p["W"] + p["b"], x

    def backward(self, p, x, dy, need_dx):
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return (dy @ p["W"].T if need_dx else None), grads


class _Conv(_Op):
    params = ("W", "b")

    def init(self, rng):
        f, c = self.layer.filters, self.in_shape[0]
        ksz = math.prod(self.layer.kernel)
        return {"W": _glorot(rng, (f, c) + self.layer.kernel, c * ksz, f * ksz),
                "b": np.zeros(f)}

    def forward(self, p, x, train, rng):
        wmat = core.kernels_to_matrix(p["W"])
        if self.layer.kind == "conv1d":
            y = core.conv1d_nlc(x, wmat, self.layer.kernel[0])
        else:
            y = core.conv2d_nhwc(x, wmat, *self.layer.kernel)
        y += p["b"]
        return y, x

    def backward(self, p, x, dy, need_dx):
        wmat = core.kernels_to_matrix(p["W"])
        if self.layer.kind == "conv1d":
            dx, dw = core.conv1d_nlc_backward(x, wmat, self.layer.kernel[0], dy, need_dx)
        else:
            dx, dw = core.conv2d_nhwc_backward(x, wmat, *self.layer.kernel, dy, need_dx)
        db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
        return dx, {"W": core.matrix_to_kernels(dw, p["W"].shape), "b": db}


class _Pool(_Op):
    def forward(self, p, x, train, rng):
        if self.layer.kind == "maxpool1d":
            y, arg = core.maxpool1d_nlc(x)
        else:
            y, arg = core.maxpool2d_nhwc(x)
        return y, arg

    def backward(self, p, arg, dy, need_dx):
        if self.layer.kind == "maxpool1d":
            return core.maxpool1d_nlc_backward(arg, dy, self.in_shape[1]), {}
        return core.maxpool2d_nhwc_backward(arg, dy, self.in_shape[1:]), {}


class _Dropout(_Op):
    def forward(self, p, x, train, rng):
        rate = self.layer.rate
        if not train or rate == 0.0:
            return x, None
        if rng is None:
            raise ParameterError("train-mode dropout needs a random generator")
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return x * mask, mask

    def backward(self, p, mask, dy, need_dx):
        return (dy if mask is None else dy * mask), {}


class _Flatten(_Op):
    def forward(self, p, x, train, rng):
        if x.ndim > 2:
            x = np.moveaxis(x, -1, 1)
        return x.reshape(x.shape[0], -1), None

    def backward(self, p, cache, dy, need_dx):
        if len(self.in_shape) == 1:
            return dy, {}
        dx = dy.reshape((dy.shape[0],) + self.in_shape)
        return np.ascontiguousarray(np.moveaxis(dx, 1, -1)), {}


class _Activation(_Op):
    def forward(self, p, x, train, rng):
        fn = self.layer.fn
        if fn == "relu":
            y = core.relu(x)
        elif fn == "sigmoid":
            y = core.sigmoid(x)
        else:
            y = core.softmax(x)
        return y, y

    def backward(self, p, y, dy, need_dx):
        fn = self.layer.fn
        if fn == "relu":
            return dy * (y > 0), {}
        if fn == "sigmoid":
            return dy * y * (1.0 - y), {}
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True)), {}


_OP_TYPES = {"dense": _Dense, "conv1d": _Conv, "conv2d": _Conv, "maxpool1d": _Pool,
             "maxpool2d": _Pool, "dropout": _Dropout, "flatten": _Flatten,
             "activation": _Activation}


@lru_cache(maxsize=64)
def _ops(spec):
    shapes = [spec.input_shape] + spec.shapes()
    return tuple(_OP_TYPES[layer.kind](layer, shapes[i], shapes[i + 1])
                 for i, layer in enumerate(spec.layers))


def _to_internal(x):
    return np.ascontiguousarray(np.moveaxis(x, 1, -1)) if x.ndim > 2 else x


def _to_public(x):
    return np.moveaxis(x, -1, 1) if x.ndim > 2 else x


# ---------------------------------------------------------------- state

@dataclass(eq=False)
class NetworkState:
    """Trainable tensors of a network plus optimizer accumulators."""

    spec: NetworkSpec
    params: list
    slots: list = field(default_factory=list)
    version: int = 0

    def __post_init__(self):
        if not self.slots:
            self.slots = [{} for _ in self.params]

    def named_parameters(self):
        """(layer index, name, array) in serialization order."""
        for i, p in enumerate(self.params):
            for name in sorted(p):
                yield i, name, p[name]


def init_state(spec, rng):
    """Glorot-uniform weights and zero biases drawn from ``rng``."""
    params = []
    for op in _ops(spec):
        p = op.init(rng)
        if "b" in p:
            p["b"] = np.zeros_like(p["b"])
        params.append(p)
    return NetworkState(spec, params)


@dataclass
class Activations:
    state: NetworkState
    version: int
    train: bool
    inputs: np.ndarray
    outputs: list
    caches: list

    def output(self, i=-1):
        """Output of layer ``i`` in channels-first layout."""
        return _to_public(self.outputs[i])

    @property
    def probs(self):
        return self.outputs[-1]


def _check_batch(spec, batch):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == len(spec.input_shape):
        batch = batch[None]
    if batch.shape[1:] != spec.input_shape:
        raise ShapeError(f"batch shape {batch.shape[1:]} does not match input {spec.input_shape}")
    return batch


def forward(state, batch, mode="eval", rng=None):
    """Run every layer; dropout is active only when ``mode == 'train'``."""
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
    train = mode == "train"
    x = _to_internal(_check_batch(state.spec, batch))
    inputs, outputs, caches = x, [], []
    for op, p in zip(_ops(state.spec), state.params):
        x, cache = op.forward(p, x, train, rng)
        outputs.append(x)
        caches.append(cache)
    return Activations(state, state.version, train, inputs, outputs, caches)


def one_hot(labels, k):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy(probs, targets):
    """Mean negative log-likelihood of the true class, clipped at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape or probs.ndim != 2:
        raise ShapeError(f"cross_entropy: probs {probs.shape} vs targets {targets.shape}")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ParameterError("cross_entropy: probability rows must sum to 1")
    p_true = (probs * targets).sum(axis=1)
    return float(-np.mean(np.log(np.maximum(p_true, PROB_CLIP))))


def backward(state, acts, targets):
    """Reverse-mode gradients of ``cross_entropy(forward(...), targets)``.

    Returns one dict per layer mapping parameter names to gradient arrays.
    Masks and pooling argmaxes are taken from ``acts``.
    """
    if acts.state is not state or acts.version != state.version:
        raise StateError("activations were produced by a different or older network state")
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != acts.probs.shape:
        raise ShapeError(f"targets {targets.shape} do not match outputs {acts.probs.shape}")
    ops = _ops(state.spec)
    n = targets.shape[0]
    grads = [{} for _ in ops]
    # softmax and cross-entropy fuse to (p - y) / n at the softmax input
    dy = (acts.probs - targets) / n
    for i in range(len(ops) - 2, -1, -1):
        dy, grads[i] = ops[i].backward(state.params[i], acts.caches[i], dy, i > 0)
    return grads


# ---------------------------------------------------------------- optimizers

def adadelta_step(state, grads, rho=0.95, epsilon=1e-6, lr=1.0):
    """In-place Adadelta update; accumulators start at zero."""
    for p, g, slot in zip(state.params, grads, state.slots):
        for name, grad in g.items():
            acc = slot.get(name)
            if acc is None:
                acc = slot[name] = {"eg2": np.zeros_like(grad), "edx2": np.zeros_like(grad)}
            eg2, edx2 = acc["eg2"], acc["edx2"]
            eg2 *= rho
            eg2 += (1.0 - rho) * grad * grad
            delta = -np.sqrt(edx2 + epsilon) / np.sqrt(eg2 + epsilon) * grad
            edx2 *= rho
            edx2 += (1.0 - rho) * delta * delta
            p[name] += lr * delta
    state.version += 1
    return state


def sgd_step(state, grads, lr):
    for p, g in zip(state.params, grads):
        for name, grad in g.items():
            p[name] -= lr * grad
    state.version += 1
    return state


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 100
    epochs: int = 35
    optimizer: str = "adadelta"
    learning_rate: float = 1.0
    rho: float = 0.95
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if self.optimizer not in ("adadelta", "sgd"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class TrainedModel:
    spec: NetworkSpec
    state: NetworkState
    epoch_curve: list
    class_names: tuple
    preprocess: object = None
    meta: dict = field(default_factory=dict)

    def predict(self, inputs):
        return predict(self, inputs)[0]


def _validate_training_set(spec, dataset):
    if len(dataset) == 0:
        raise DatasetError("empty training set")
    if dataset.features.shape[1:] != spec.input_shape:
        raise ShapeError(
            f"features {dataset.features.shape[1:]} do not match input {spec.input_shape}")
    if dataset.labels.min() < 0 or dataset.labels.max() >= spec.n_classes:
        raise DatasetError(f"labels must lie in [0, {spec.n_classes})")


def train(spec, dataset, cfg=TrainConfig()):
    """Mini-batch training from a seeded initialization.

    The epoch curve records the fraction of training samples classified
    correctly by the train-mode forward pass of each mini-batch.
    """
    _validate_training_set(spec, dataset)
    state = init_state(spec, seeded_rng(cfg.seed, Stream.INIT))
    shuffle_rng = seeded_rng(cfg.seed, Stream.SHUFFLE)
    drop_rng = seeded_rng(cfg.seed, Stream.DROPOUT)
    x, y = dataset.features, dataset.labels
    targets = one_hot(y, spec.n_classes)
    n = len(y)
    curve = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        correct = 0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            acts = forward(state, x[idx], "train", drop_rng)
            correct += int(np.sum(acts.probs.argmax(axis=1) == y[idx]))
            grads = backward(state, acts, targets[idx])
            if cfg.optimizer == "adadelta":
                adadelta_step(state, grads, cfg.rho, cfg.epsilon, cfg.learning_rate)
            else:
                sgd_step(state, grads, cfg.learning_rate)
        curve.append(correct / n)
    return TrainedModel(spec, state, curve, tuple(dataset.class_names))


def predict_proba(state, inputs, chunk=256):
    inputs = _check_batch(state.spec, inputs)
    out = [forward(state, inputs[s:s + chunk], "eval").probs for s in range(0, len(inputs), chunk)]
    return np.concatenate(out) if out else np.zeros((0, state.spec.n_classes))


def predict(model, inputs):
    """Return (labels, probabilities); argmax ties go to the lowest class."""
    x = np.asarray(inputs, dtype=np.float64)
    if model.preprocess is not None:
        x = model.preprocess.transform(x)
    probs = predict_proba(model.state, x)
    return probs.argmax(axis=1), probs


# ---------------------------------------------------------------- verification

def _frozen_forward(op, p, x, cache):
    """Forward one op with the ReLU mask / pool winners recorded in ``cache``."""
    if isinstance(op, _Pool):
        if op.layer.kind == "maxpool1d":
            return core.maxpool1d_nlc(x, cache)[0]
        return core.maxpool2d_nhwc(x, cache)[0]
    if isinstance(op, _Activation) and op.layer.fn == "relu":
        return x * (cache > 0)
    return op.forward(p, x, False, None)[0]


def _pattern(ops, caches):
    return [c if isinstance(op, _Pool) else c > 0
            for op, c in zip(ops, caches)
            if isinstance(op, _Pool) or (isinstance(op, _Activation) and op.layer.fn == "relu")]


def gradient_errors(spec, batch, labels, step=1e-5, per_tensor=6, seed=0, state=None,
                    crossings=None):
    """Relative error between backprop and central differences.

    Checks ``per_tensor`` randomly chosen entries of every parameter tensor
    in eval mode (dropout off). Returns ``{"layer.name": max error}``.

    The difference quotient is taken on the loss with the ReLU on/off
    masks and max-pool winners of the unperturbed pass held fixed. Away
    from a kink that function coincides with the network on a
    neighbourhood, so its derivative is the true gradient; unlike the plain
    quotient it stays meaningful when a +-step would cross a kink, which in
    a wide conv layer happens for almost every weight. The number of
    entries whose plain +-step passes would have crossed a kink is stored
    per tensor in ``crossings`` (a dict) when given.
    """
    if state is None:
        state = init_state(spec, seeded_rng(seed, Stream.INIT))
    batch = _check_batch(spec, batch)
    targets = one_hot(labels, spec.n_classes)
    acts = forward(state, batch, "eval")
    grads = backward(state, acts, targets)
    ops = _ops(spec)
    pick = seeded_rng(seed, Stream.DATA)

    def loss_from(i):
        x = acts.inputs if i == 0 else acts.outputs[i - 1]
        free = []
        for op, p, cache in zip(ops[i:], state.params[i:], acts.caches[i:]):
            if crossings is not None:
                free.append(op.forward(p, x, False, None)[1])
            x = _frozen_forward(op, p, x, cache)
        return cross_entropy(x, targets), free

    errors = {}
    for i, name, param in state.named_parameters():
        base = _pattern(ops[i:], acts.caches[i:])
        flat = param.reshape(-1)
        g = grads[i][name].reshape(-1)
        worst, crossed = 0.0, 0
        for j in pick.choice(flat.size, size=min(per_tensor, flat.size), replace=False):
            orig = flat[j]
            flat[j] = orig + step
            up, free_up = loss_from(i)
            flat[j] = orig - step
            down, free_down = loss_from(i)
            flat[j] = orig
            if crossings is not None:
                crossed += not all(np.array_equal(u, v)
                                   for f in (free_up, free_down)
                                   for u, v in zip(_pattern(ops[i:], f), base))
            numeric = (up - down) / (2 * step)
            denom = max(abs(g[j]), abs(numeric), 1e-8)
            worst = max(worst, abs(g[j] - numeric) / denom)
        errors[f"{i}.{name}"] = float(worst)
        if crossings is not None:
            crossings[f"{i}.{name}"] = crossed
    return errors


def gradient_check(spec, batch, labels, step=1e-5, per_tensor=6, seed=0, state=None):
    errs = gradient_errors(spec, batch, labels, step, per_tensor, seed, state)
    return max(errs.values(), default=0.0)


def with_classes(spec, n_classes, input_shape=None):
    """Copy of ``spec`` with a new input shape and final dense width."""
    layers = list(spec.layers)
    for i in range(len(layers) - 1, -1, -1):
        if layers[i].kind == "dense":
            layers[i] = replace(layers[i], units=n_classes)
            break
    return NetworkSpec(input_shape or spec.input_shape, tuple(layers))
