"""Versioned single-file model container.

The layout is JSON with float arrays encoded as base64 little-endian float64
bytes, so save/load round-trips are bit-exact and file bytes are identical
across runs given identical state.  The materialized embedding matrix is
stored alongside the network weights so prediction never needs a forward
pass; the metadata encoder state and the encoded feature matrix travel with
the model so the stored embeddings can always be reproduced.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .catalog import Catalog
from .datasets import FeatureEncoder
from .errors import ConfigError
from .network import Architecture, NetworkParams

FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def _decode_array(payload: dict) -> np.ndarray:
    raw = base64.b64decode(payload["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(payload["shape"]).copy()


@dataclass
class ModelFile:
    catalog: Catalog
    arch: Architecture
    params: NetworkParams
    embeddings: np.ndarray
    training_config: dict
    feature_encoder: FeatureEncoder | None = None
    features: np.ndarray | None = None


def save_model(path, model: ModelFile) -> None:
    params = model.params
    payload = {
        "format_version": FORMAT_VERSION,
        "catalog_ids": list(model.catalog.ids),
        "architecture": {
            "catalog_size": model.arch.catalog_size,
            "embedding_dim": model.arch.embedding_dim,
            "hidden_widths": list(model.arch.hidden_widths),
            "meta_width": model.arch.meta_width,
        },
        "params": {
            "id_table": _encode_array(params.id_table),
            "meta_weight": None
            if params.meta_weight is None
            else _encode_array(params.meta_weight),
            "first_bias": _encode_array(params.first_bias),
            "hidden": [[_encode_array(w), _encode_array(b)] for w, b in params.hidden],
        },
        "embeddings": _encode_array(model.embeddings),
        "training_config": model.training_config,
        "feature_encoder": None
        if model.feature_encoder is None
        else model.feature_encoder.to_dict(),
        "features": None if model.features is None else _encode_array(model.features),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(
            f"unsupported model format version {version!r} (expected {FORMAT_VERSION})"
        )
    arch = Architecture(
        catalog_size=payload["architecture"]["catalog_size"],
        embedding_dim=payload["architecture"]["embedding_dim"],
        hidden_widths=tuple(payload["architecture"]["hidden_widths"]),
        meta_width=payload["architecture"]["meta_width"],
    )
    raw = payload["params"]
    params = NetworkParams(
        arch,
        _decode_array(raw["id_table"]),
        None if raw["meta_weight"] is None else _decode_array(raw["meta_weight"]),
        _decode_array(raw["first_bias"]),
        [(_decode_array(w), _decode_array(b)) for w, b in raw["hidden"]],
    )
    return ModelFile(
        catalog=Catalog.from_ids(payload["catalog_ids"]),
        arch=arch,
        params=params,
        embeddings=_decode_array(payload["embeddings"]),
        training_config=payload["training_config"],
        feature_encoder=None
        if payload["feature_encoder"] is None
        else FeatureEncoder.from_dict(payload["feature_encoder"]),
        features=None if payload["features"] is None else _decode_array(payload["features"]),
    )
