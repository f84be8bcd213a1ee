"""Model and checkpoint documents: versioned JSON, bitwise round-trips.

Floats are written with 17 significant decimal digits, which is always
enough to reconstruct the exact float64 bit pattern on load. All model
variants (attention, attention-off, linear) share one schema, discriminated
by the ``mode`` field. Malformed documents are rejected with a located
error: JSON syntax problems carry line/column, semantic problems carry the
JSON path.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .baselines import LinearModel
from .errors import ModelFormatError
from .lstm import LstmLayerParams
from .model import MODE_DLAM, MODE_LTCCP, AttentionParams, DlamModel
from .training import AdadeltaState

__all__ = [
    "model_to_document",
    "model_from_document",
    "save_model",
    "load_model",
    "checkpoint_to_document",
    "checkpoint_from_document",
]

MODEL_SCHEMA = "popdyn-model/1"
CHECKPOINT_SCHEMA = "popdyn-checkpoint/1"

MODE_LINEAR = "linear"


# ---------------------------------------------------------------------------
# writing


def _emit(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(value.items()):
            out.append(f'{pad}  {json.dumps(k)}: ')
            _emit(v, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, v in enumerate(value):
            _emit(v, indent, out)
            if i < len(value) - 1:
                out.append(", ")
        out.append("]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(format(float(value), ".17g"))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"cannot serialize {type(value)!r}")


def _dumps(doc: dict) -> str:
    out: list[str] = []
    _emit(doc, 0, out)
    out.append("\n")
    return "".join(out)


def _array(a: np.ndarray) -> list:
    return a.tolist()


def _layer_doc(p: LstmLayerParams) -> dict:
    return {
        "W_i": _array(p.W_i), "W_f": _array(p.W_f),
        "W_c": _array(p.W_c), "W_o": _array(p.W_o),
        "b_i": _array(p.b_i), "b_f": _array(p.b_f),
        "b_c": _array(p.b_c), "b_o": _array(p.b_o),
    }


def model_to_document(model: DlamModel | LinearModel) -> str:
    if isinstance(model, LinearModel):
        doc = {
            "schema": MODEL_SCHEMA,
            "mode": MODE_LINEAR,
            "feature_dim": model.feature_dim,
            "num_steps": model.num_steps,
            "horizon": model.horizon,
            "target_transform": model.target_transform,
            "weights": _array(model.weights),
        }
        return _dumps(doc)
    doc = {
        "schema": MODEL_SCHEMA,
        "mode": model.mode,
        "feature_dim": model.feature_dim,
        "num_steps": model.num_steps,
        "horizon": model.horizon,
        "input_transform": model.input_transform,
        "target_transform": model.target_transform,
        "hidden_size": model.layers[0].hidden_size,
        "num_layers": len(model.layers),
        "layers": [_layer_doc(p) for p in model.layers],
        "attention": None if model.attn is None else _array(model.attn.w_a),
        "readout_weights": _array(model.w_out),
        "readout_bias": float(model.b_out[0]),
    }
    return _dumps(doc)


# ---------------------------------------------------------------------------
# reading


def _get(doc: dict, key: str, path: str) -> Any:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected an object")
    if key not in doc:
        raise ModelFormatError(f"{path}.{key}: missing field")
    return doc[key]


def _num_array(value: Any, path: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelFormatError(f"{path}: expected a numeric array") from None
    if arr.dtype != np.float64 or not np.all(np.isfinite(arr)):
        raise ModelFormatError(f"{path}: expected finite numbers")
    if shape is not None and arr.shape != shape:
        raise ModelFormatError(f"{path}: shape {arr.shape}, expected {shape}")
    return arr


def _int_field(doc: dict, key: str, path: str) -> int:
    v = _get(doc, key, path)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ModelFormatError(f"{path}.{key}: expected an integer")
    return v


def _str_field(doc: dict, key: str, path: str) -> str:
    v = _get(doc, key, path)
    if not isinstance(v, str):
        raise ModelFormatError(f"{path}.{key}: expected a string")
    return v


def _parse(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(
            f"invalid document at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("$: expected a top-level object")
    return doc


def _layer_from_doc(doc: Any, hidden: int, k_in: int, path: str) -> LstmLayerParams:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected an object")
    wshape = (hidden, hidden + k_in)
    return LstmLayerParams(
        W_i=_num_array(_get(doc, "W_i", path), f"{path}.W_i", wshape),
        W_f=_num_array(_get(doc, "W_f", path), f"{path}.W_f", wshape),
        W_c=_num_array(_get(doc, "W_c", path), f"{path}.W_c", wshape),
        W_o=_num_array(_get(doc, "W_o", path), f"{path}.W_o", wshape),
        b_i=_num_array(_get(doc, "b_i", path), f"{path}.b_i", (hidden,)),
        b_f=_num_array(_get(doc, "b_f", path), f"{path}.b_f", (hidden,)),
        b_c=_num_array(_get(doc, "b_c", path), f"{path}.b_c", (hidden,)),
        b_o=_num_array(_get(doc, "b_o", path), f"{path}.b_o", (hidden,)),
    )


def model_from_document(text: str) -> DlamModel | LinearModel:
    doc = _parse(text)
    schema = _str_field(doc, "schema", "$")
    if schema != MODEL_SCHEMA:
        raise ModelFormatError(
            f"$.schema: unsupported version {schema!r}, expected {MODEL_SCHEMA!r}"
        )
    mode = _str_field(doc, "mode", "$")
    feature_dim = _int_field(doc, "feature_dim", "$")
    num_steps = _int_field(doc, "num_steps", "$")
    horizon = _int_field(doc, "horizon", "$")
    target_transform = _str_field(doc, "target_transform", "$")
    if mode == MODE_LINEAR:
        weights = _num_array(
            _get(doc, "weights", "$"), "$.weights",
            (num_steps * feature_dim + 1,),
        )
        return LinearModel(
            weights=weights,
            feature_dim=feature_dim,
            num_steps=num_steps,
            horizon=horizon,
            target_transform=target_transform,
        )
    if mode not in (MODE_DLAM, MODE_LTCCP):
        raise ModelFormatError(f"$.mode: unknown mode {mode!r}")
    hidden = _int_field(doc, "hidden_size", "$")
    num_layers = _int_field(doc, "num_layers", "$")
    layers_doc = _get(doc, "layers", "$")
    if not isinstance(layers_doc, list) or len(layers_doc) != num_layers:
        raise ModelFormatError(f"$.layers: expected a list of {num_layers} layers")
    layers = []
    k = feature_dim
    for i, ld in enumerate(layers_doc):
        layers.append(_layer_from_doc(ld, hidden, k, f"$.layers[{i}]"))
        k = hidden
    attn_doc = _get(doc, "attention", "$")
    if mode == MODE_DLAM:
        attn = AttentionParams(
            _num_array(attn_doc, "$.attention", (feature_dim + hidden,))
        )
        w_out = _num_array(
            _get(doc, "readout_weights", "$"), "$.readout_weights", (feature_dim,)
        )
    else:
        if attn_doc is not None:
            raise ModelFormatError("$.attention: must be null in lt-ccp mode")
        attn = None
        w_out = _num_array(
            _get(doc, "readout_weights", "$"), "$.readout_weights", (hidden,)
        )
    bias = _get(doc, "readout_bias", "$")
    if not isinstance(bias, (int, float)) or isinstance(bias, bool):
        raise ModelFormatError("$.readout_bias: expected a number")
    return DlamModel(
        layers=layers,
        attn=attn,
        w_out=w_out,
        b_out=np.array([float(bias)]),
        mode=mode,
        feature_dim=feature_dim,
        num_steps=num_steps,
        horizon=horizon,
        input_transform=_str_field(doc, "input_transform", "$"),
        target_transform=target_transform,
    )


def save_model(model: DlamModel | LinearModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_document(model))


def load_model(path) -> DlamModel | LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_document(fh.read())


# ---------------------------------------------------------------------------
# training checkpoints (model + optimizer accumulators)


def checkpoint_to_document(model: DlamModel, state: AdadeltaState) -> str:
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "model": _parse(model_to_document(model)),
        "optimizer": {
            "rho": state.rho,
            "eps": state.eps,
            "acc_grad": [_array(a) for a in state.acc_grad],
            "acc_update": [_array(a) for a in state.acc_update],
        },
    }
    return _dumps(doc)


def checkpoint_from_document(text: str) -> tuple[DlamModel, AdadeltaState]:
    doc = _parse(text)
    schema = _str_field(doc, "schema", "$")
    if schema != CHECKPOINT_SCHEMA:
        raise ModelFormatError(
            f"$.schema: unsupported version {schema!r}, expected {CHECKPOINT_SCHEMA!r}"
        )
    model = model_from_document(_dumps(_get(doc, "model", "$")))
    if isinstance(model, LinearModel):
        raise ModelFormatError("$.model: checkpoints only apply to recurrent models")
    opt = _get(doc, "optimizer", "$")
    rho = _get(opt, "rho", "$.optimizer")
    eps = _get(opt, "eps", "$.optimizer")
    params = model.params()
    acc_grad_doc = _get(opt, "acc_grad", "$.optimizer")
    acc_update_doc = _get(opt, "acc_update", "$.optimizer")
    if not isinstance(acc_grad_doc, list) or len(acc_grad_doc) != len(params):
        raise ModelFormatError("$.optimizer.acc_grad: wrong number of arrays")
    if not isinstance(acc_update_doc, list) or len(acc_update_doc) != len(params):
        raise ModelFormatError("$.optimizer.acc_update: wrong number of arrays")
    acc_grad = [
        _num_array(a, f"$.optimizer.acc_grad[{i}]", p.shape)
        for i, (a, p) in enumerate(zip(acc_grad_doc, params))
    ]
    acc_update = [
        _num_array(a, f"$.optimizer.acc_update[{i}]", p.shape)
        for i, (a, p) in enumerate(zip(acc_update_doc, params))
    ]
    state = AdadeltaState(
        acc_grad=acc_grad, acc_update=acc_update, rho=float(rho), eps=float(eps)
    )
    return model, state
