"""Finite-difference verification of backpropagation.

Small networks exercise each layer kind on its own; every zoo network is
then checked at its nominal input shape. Dropout is off (eval mode) and
each check uses a 4-sample batch.
"""
from dataclasses import dataclass

import numpy as np

from .core import Stream, seeded_rng
from .network import (NetworkSpec, activation, conv1d, conv2d, dense, dropout, flatten,
                      gradient_errors, maxpool1d, maxpool2d)
from .zoo import CATALOG, build

TOLERANCE = 1e-4
LINEAR_TOLERANCE = 1e-6


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    per_tensor: dict
    kink_crossings: int | None = None

    @property
    def passed(self):
        return self.max_error < self.tolerance


def layer_cases():
    """(name, spec, purely linear?) covering every layer kind."""
    sm = activation("softmax")
    return [
        ("dense-linear", NetworkSpec((6,), (dense(5), dense(3), sm)), True),
        ("dense-sigmoid", NetworkSpec((6,), (dense(5), activation("sigmoid"), dense(3), sm)), False),
        ("dense-relu", NetworkSpec((6,), (dense(5), activation("relu"), dense(3), sm)), False),
        ("conv1d", NetworkSpec((3, 12), (conv1d(4, 3), activation("relu"), flatten(),
                                         dense(3), sm)), False),
        ("maxpool1d", NetworkSpec((2, 10), (conv1d(3, 3), maxpool1d(), flatten(), dense(3), sm)),
         False),
        ("conv2d", NetworkSpec((2, 7, 7), (conv2d(3, 3, 3), activation("relu"), flatten(),
                                           dense(3), sm)), False),
        ("maxpool2d", NetworkSpec((1, 8, 8), (conv2d(2, 3, 3), maxpool2d(), flatten(), dense(3),
                                              sm)), False),
        ("dropout", NetworkSpec((5,), (dense(6), activation("sigmoid"), dropout(0.5), dense(3),
                                       sm)), False),
    ]


def zoo_cases():
    return [(name, build(name).learner) for name in CATALOG if build(name).is_network]


def check(name, spec, tolerance, seed=0, per_tensor=6, batch=4, count_crossings=False):
    """Check one spec; optionally count entries whose plain step crosses a kink."""
    rng = seeded_rng(seed, Stream.DATA)
    x = rng.standard_normal((batch,) + spec.input_shape)
    y = rng.integers(0, spec.n_classes, size=batch)
    crossings = {} if count_crossings else None
    errs = gradient_errors(spec, x, y, per_tensor=per_tensor, seed=seed, crossings=crossings)
    return CheckResult(name, max(errs.values(), default=0.0), tolerance, errs,
                       sum(crossings.values()) if count_crossings else None)


def run_suite(seed=0, include_zoo=True, per_tensor=6):
    results = [check(n, s, LINEAR_TOLERANCE if lin else TOLERANCE, seed, per_tensor)
               for n, s, lin in layer_cases()]
    if include_zoo:
        results += [check(n, s, TOLERANCE, seed, per_tensor) for n, s in zoo_cases()]
    return results
