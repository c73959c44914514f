"""Binary user-vs-rest classifiers sharing one scoring interface."""

from __future__ import annotations

import json

import numpy as np

from ..errors import SchemaMismatch
from .base import (CONFIG_TYPES, ForestConfig, LinearConfig, MlpConfig, TrainedModel,
                   config_dict, config_from_dict)
from .forest import ForestModel, fit_forest
from .linear import LinearModel, class_weights, linear_objective
from .mlp import MlpModel

__all__ = [
    "ForestConfig", "LinearConfig", "MlpConfig", "TrainedModel", "ForestModel", "LinearModel",
    "MlpModel", "train", "score", "dumps_model", "loads_model", "save_model", "load_model",
    "fit_forest", "class_weights", "linear_objective", "MODEL_TYPES",
]

MODEL_TYPES = {"forest": ForestModel, "linear": LinearModel, "mlp": MlpModel}
MAGIC = b"ECGBMODEL 1\n"


def train(config, X, y, schema, scenario: str = "S1") -> TrainedModel:
    """Fit the model kind matching ``config``; labels are 1 = user, 0 = rest."""
    if isinstance(config, MlpConfig):
        return MlpModel.train(config, X, y, schema, epochs=config.resolved_epochs(scenario))
    return MODEL_TYPES[config.kind].train(config, X, y, schema)


def score(model: TrainedModel, X, schema=None) -> np.ndarray:
    if schema is not None and tuple(schema) != model.schema:
        raise SchemaMismatch("input schema differs from the model's")
    return model.score(X)


def dumps_model(model: TrainedModel) -> bytes:
    """Self-describing binary form: magic line, JSON header line, raw little-endian arrays."""
    arrays = model.arrays()
    manifest = []
    blobs = []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        dt = a.dtype.newbyteorder("<")
        manifest.append({"name": name, "dtype": dt.str, "shape": list(a.shape)})
        blobs.append(a.astype(dt, copy=False).tobytes())
    header = {"kind": model.kind, "schema": list(model.schema), "seed": model.seed,
              "config": config_dict(model.config), "arrays": manifest}
    return MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + b"".join(blobs)


def loads_model(data: bytes) -> TrainedModel:
    if not data.startswith(MAGIC):
        raise ValueError("not an ecgbench model")
    nl = data.index(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC):nl])
    pos = nl + 1
    arrays = {}
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arrays[spec["name"]] = np.frombuffer(data, dt, count, pos).reshape(spec["shape"]).astype(
            dt.newbyteorder("="))
        pos += count * dt.itemsize
    kind = header["kind"]
    config = config_from_dict(kind, header["config"])
    return MODEL_TYPES[kind].from_arrays(header["schema"], config, arrays)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return loads_model(fh.read())


assert set(CONFIG_TYPES) == set(MODEL_TYPES)
