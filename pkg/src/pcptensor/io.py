"""Tensor and model files, plus run manifests.

Tensor files are JSON objects ``{"dims": [...], "data": [...]}`` with
``data`` flattened in natural order (first index fastest). Entries must
be non-negative integers.
"""

import json
import platform
import sys

import numpy as np

from .kruskal import model_from_json, model_to_json
from .tensor_core import unvec, vec

__all__ = [
    "tensor_to_json",
    "tensor_from_json",
    "read_tensor",
    "write_tensor",
    "read_model",
    "write_model",
    "versions",
    "write_manifest",
]


def tensor_to_json(x):
    x = np.asarray(x)
    data = vec(x)
    if np.all(data == np.round(data)):
        data = data.astype(np.int64)
    return json.dumps({"dims": list(x.shape), "data": data.tolist()})


def tensor_from_json(text):
    """Parse a count tensor; ``ValueError`` messages name the line or field."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ValueError("tensor file must hold a JSON object")
    for key in ("dims", "data"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    dims, data = obj["dims"], obj["data"]
    if not isinstance(dims, list) or not dims or not all(
        isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in dims
    ):
        raise ValueError("field 'dims' must be a non-empty list of positive integers")
    if not isinstance(data, list):
        raise ValueError("field 'data' must be a list")
    for i, v in enumerate(data):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"field 'data'[{i}] is not a number: {v!r}")
        if v < 0 or v != v or int(v) != v:
            raise ValueError(f"field 'data'[{i}] must be a non-negative integer, got {v!r}")
    n = int(np.prod(dims))
    if len(data) != n:
        raise ValueError(f"field 'data' has {len(data)} entries, dims need {n}")
    return unvec(np.asarray(data, dtype=float), tuple(dims))


def read_tensor(path):
    with open(path) as f:
        return tensor_from_json(f.read())


def write_tensor(path, x):
    with open(path, "w") as f:
        f.write(tensor_to_json(x) + "\n")


def read_model(path):
    with open(path) as f:
        return model_from_json(f.read())


def write_model(path, model):
    with open(path, "w") as f:
        f.write(model_to_json(model) + "\n")


def versions():
    import scipy

    from importlib.metadata import PackageNotFoundError, version

    try:
        pkg = version("artifact")
    except PackageNotFoundError:
        pkg = "unknown"
    return {
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "package": pkg,
    }


def write_manifest(path, command, config, seed, inputs, outputs, wall_seconds, status):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": versions(),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_seconds": wall_seconds,
        "exit_status": status,
    }
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return manifest
