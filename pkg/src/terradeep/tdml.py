"""TDML model container.

Layout: magic ``b"TDML"``, format version (u32), a u32 byte length followed
by a UTF-8 JSON header, then tensors until end of file, each stored as rank
(u32), dims (u32 x rank) and little-endian float64 values. The header's
``section`` tag says whether the payload is a network or an SVM.
"""
import json
import struct
from pathlib import Path

import numpy as np

from .core import Standardizer
from .errors import FormatError
from .network import NetworkSpec, NetworkState, TrainedModel, _ops
from .svm import BinarySvmModel, MulticlassSvm

MAGIC = b"TDML"
VERSION = 1


def _pack_tensor(arr):
    arr = np.asarray(arr, dtype="<f8")
    head = struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return head + arr.tobytes(order="C")


def _tensors(buf, pos, path):
    out = []
    while pos < len(buf):
        if pos + 4 > len(buf):
            raise FormatError("truncated tensor header", path)
        (rank,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if rank > 8 or pos + 4 * rank > len(buf):
            raise FormatError(f"bad tensor rank {rank}", path)
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        count = int(np.prod(dims, dtype=np.int64))
        if pos + 8 * count > len(buf):
            raise FormatError("truncated tensor data", path)
        out.append(np.frombuffer(buf, dtype="<f8", count=count, offset=pos)
                   .astype(np.float64).reshape(dims))
        pos += 8 * count
    return out


def _preprocess_tensors(model):
    pre = model.preprocess
    if pre is None:
        return []
    return [pre.mean, pre.std]


def save_model(model, path):
    """Write a TrainedModel or MulticlassSvm; returns the path."""
    tensors = []
    if isinstance(model, TrainedModel):
        header = {"section": "network", "spec": model.spec.to_dict(),
                  "epoch_curve": [float(a) for a in model.epoch_curve]}
        tensors += [p for _, _, p in model.state.named_parameters()]
    elif isinstance(model, MulticlassSvm):
        header = {"section": "svm", "n_classes": model.n_classes,
                  "pairs": [list(p) for p in model.pairs],
                  "machines": [{"bias": float(m.bias), "gamma": float(m.gamma), "C": float(m.C),
                                "tol": float(m.tol), "converged": bool(m.converged),
                                "passes": int(m.passes)} for m in model.machines]}
        for m in model.machines:
            tensors += [m.support_vectors, m.dual_coef, m.support_index]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    header["class_names"] = list(model.class_names)
    header["preprocess"] = model.preprocess is not None
    header["meta"] = model.meta
    tensors += _preprocess_tensors(model)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(blob)) + blob)
        for t in tensors:
            fh.write(_pack_tensor(t))
    return Path(path)


def load_model(path):
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise FormatError("not a TDML file", path)
    if len(buf) < 12:
        raise FormatError("truncated TDML header", path)
    version, size = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported TDML version {version}", path)
    if 12 + size > len(buf):
        raise FormatError("truncated TDML header", path)
    try:
        header = json.loads(buf[12:12 + size].decode("utf-8"))
        section = header["section"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError):
        raise FormatError("corrupt TDML header", path) from None
    tensors = _tensors(buf, 12 + size, path)
    try:
        if section == "network":
            model = _load_network(header, tensors)
        elif section == "svm":
            model = _load_svm(header, tensors)
        else:
            raise FormatError(f"unknown section {section!r}", path)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"inconsistent TDML payload ({exc})", path) from None
    return model


def _take_preprocess(header, tensors):
    if header["preprocess"]:
        if len(tensors) != 2:
            raise ValueError("expected 2 preprocess tensors")
        return Standardizer(tensors[0], tensors[1])
    if tensors:
        raise ValueError(f"{len(tensors)} unexpected trailing tensors")
    return None


def _load_network(header, tensors):
    spec = NetworkSpec.from_dict(header["spec"])
    params, k = [], 0
    for shapes in _param_shapes(spec):
        layer = {}
        for name in sorted(shapes):
            if tensors[k].shape != shapes[name]:
                raise ValueError(f"tensor {name} has shape {tensors[k].shape}, "
                                 f"expected {shapes[name]}")
            layer[name] = tensors[k]
            k += 1
        params.append(layer)
    pre = _take_preprocess(header, tensors[k:])
    return TrainedModel(spec, NetworkState(spec, params), list(header["epoch_curve"]),
                        tuple(header["class_names"]), pre, header.get("meta", {}))


def _param_shapes(spec):
    return [{k: v.shape for k, v in op.init(None).items()} for op in _ops(spec)]


def _load_svm(header, tensors):
    machines, k = [], 0
    for m in header["machines"]:
        sv, coef, idx = tensors[k:k + 3]
        k += 3
        if sv.ndim != 2 or coef.shape != (sv.shape[0],) or idx.shape != (sv.shape[0],):
            raise ValueError("support-vector tensors disagree in size")
        machines.append(BinarySvmModel(sv, coef, m["bias"], m["gamma"], m["C"], m["tol"],
                                       idx.astype(np.int64), m["converged"], m["passes"]))
    pre = _take_preprocess(header, tensors[k:])
    return MulticlassSvm(header["n_classes"], [tuple(p) for p in header["pairs"]], machines,
                         tuple(header["class_names"]), pre, header.get("meta", {}))
