"""Attention head over the input sequence and the assembled predictor.

The attention scores each timestep independently from [x_t, h_t], turns the
scores into softmax weights, and averages the *input* vectors with those
weights. A learned affine readout maps that context vector to a scalar;
the scalar is pushed through the inverse target transform and clamped at
zero to give a predicted cumulative count.

The attention-off ablation ("lt-ccp") reads out from the last hidden state
instead, with no attention parameters at all. Both variants share the same
LSTM stack code, so they produce identical hidden sequences for identical
stack parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstm import LstmLayerParams, StackCache, init_stack, stack_backward, stack_forward
from .numerics import softmax, uniform_init

__all__ = [
    "AttentionParams",
    "AttentionTrace",
    "DlamModel",
    "attention_forward",
    "attention_backward",
    "MODE_DLAM",
    "MODE_LTCCP",
]

MODE_DLAM = "dlam"
MODE_LTCCP = "lt-ccp"


@dataclass
class AttentionParams:
    """Score projection: a single learned direction over [x_t, h_t]."""

    w_a: np.ndarray  # (K + H,)

    def copy(self) -> "AttentionParams":
        return AttentionParams(self.w_a.copy())


@dataclass
class AttentionTrace:
    """Scores, softmax weights, and context from one attention pass."""

    scores: np.ndarray  # (T,)
    weights: np.ndarray  # (T,)
    context: np.ndarray  # (K,)


def _attention_forward_batch(
    w_a: np.ndarray, X: np.ndarray, H_top: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched attention: X (B,T,K), H_top (B,T,H) -> scores, weights, context."""
    z = np.concatenate([X, H_top], axis=-1)  # (B, T, K+H)
    scores = np.tanh(z @ w_a)  # (B, T)
    weights = softmax(scores, axis=-1)
    context = np.einsum("bt,btk->bk", weights, X)
    return scores, weights, context


def attention_forward(
    p: AttentionParams, X: np.ndarray, H_top: np.ndarray
) -> AttentionTrace:
    """Single-sequence attention pass; X (T,K) and H_top (T,H)."""
    X = np.asarray(X, dtype=np.float64)
    H_top = np.asarray(H_top, dtype=np.float64)
    if X.shape[0] != H_top.shape[0]:
        raise ValueError(
            f"sequence length mismatch: X has {X.shape[0]} steps, "
            f"H_top has {H_top.shape[0]}"
        )
    if X.shape[1] + H_top.shape[1] != p.w_a.shape[0]:
        raise ValueError(
            f"attention width {p.w_a.shape[0]} != K+H = "
            f"{X.shape[1]}+{H_top.shape[1]}"
        )
    scores, weights, context = _attention_forward_batch(
        p.w_a, X[None], H_top[None]
    )
    return AttentionTrace(scores[0], weights[0], context[0])


def _attention_backward_batch(
    w_a: np.ndarray,
    X: np.ndarray,
    H_top: np.ndarray,
    scores: np.ndarray,
    weights: np.ndarray,
    dContext: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reverse pass; returns (dw_a, dX, dH_top).

    The softmax Jacobian couples timesteps: da_t = w_t * (dw_t - sum_s w_s dw_s).
    """
    d_weights = np.einsum("bk,btk->bt", dContext, X)
    inner = np.sum(d_weights * weights, axis=-1, keepdims=True)
    d_scores = weights * (d_weights - inner)
    d_pre = d_scores * (1.0 - scores**2)  # through tanh
    z = np.concatenate([X, H_top], axis=-1)
    dw_a = np.einsum("bt,btj->j", d_pre, z)
    dz = d_pre[:, :, None] * w_a[None, None, :]
    k = X.shape[2]
    dX = dz[:, :, :k] + weights[:, :, None] * dContext[:, None, :]
    dH_top = dz[:, :, k:]
    return dw_a, dX, dH_top


def attention_backward(
    p: AttentionParams,
    trace: AttentionTrace,
    X: np.ndarray,
    H_top: np.ndarray,
    dContext: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-sequence reverse pass matching :func:`attention_forward`."""
    X = np.asarray(X, dtype=np.float64)
    H_top = np.asarray(H_top, dtype=np.float64)
    if trace.scores.shape[0] != X.shape[0]:
        raise ValueError(
            f"trace has {trace.scores.shape[0]} steps, inputs have {X.shape[0]}"
        )
    dw_a, dX, dH = _attention_backward_batch(
        p.w_a, X[None], H_top[None], trace.scores[None],
        trace.weights[None], np.asarray(dContext, dtype=np.float64)[None],
    )
    return dw_a, dX[0], dH[0]


def _transform(name: str, x: np.ndarray) -> np.ndarray:
    if name == "log1p":
        return np.log1p(x)
    if name == "none":
        return np.asarray(x, dtype=np.float64)
    raise ValueError(f"unknown transform {name!r}")


@dataclass
class ForwardCache:
    """Everything the backward pass needs from one batched forward."""

    X: np.ndarray  # transformed features (B, T, K)
    stack_cache: StackCache
    H_top: np.ndarray
    scores: np.ndarray | None
    weights: np.ndarray | None
    context: np.ndarray | None
    readout_in: np.ndarray  # (B, D) input to the affine readout
    s: np.ndarray  # (B,) readout output, transformed scale
    pred: np.ndarray  # (B,) clamped count-space prediction
    pred_raw: np.ndarray  # (B,) unclamped; the smooth training-side prediction


@dataclass
class DlamModel:
    """Stacked LSTM plus attention readout (or the attention-off ablation)."""

    layers: list[LstmLayerParams]
    attn: AttentionParams | None
    w_out: np.ndarray
    b_out: np.ndarray  # shape (1,)
    mode: str
    feature_dim: int
    num_steps: int
    horizon: int
    input_transform: str = "log1p"
    target_transform: str = "log1p"

    def __post_init__(self) -> None:
        if self.mode not in (MODE_DLAM, MODE_LTCCP):
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.attn is None) != (self.mode == MODE_LTCCP):
            raise ValueError("attention parameters present iff mode is dlam")

    @classmethod
    def init(
        cls,
        mode: str,
        feature_dim: int,
        num_steps: int,
        horizon: int,
        hidden_size: int,
        num_layers: int,
        rng: np.random.Generator,
        input_transform: str = "log1p",
        target_transform: str = "log1p",
        output_bias: float = 0.0,
    ) -> "DlamModel":
        """``output_bias`` seeds the readout bias; starting it at the mean
        transformed target keeps early Adadelta steps from having to climb
        several orders of magnitude."""
        layers = init_stack(num_layers, hidden_size, feature_dim, rng)
        if mode == MODE_DLAM:
            width = feature_dim + hidden_size
            attn = AttentionParams(uniform_init(rng, (width,), width))
            w_out = uniform_init(rng, (feature_dim,), feature_dim)
        elif mode == MODE_LTCCP:
            attn = None
            w_out = uniform_init(rng, (hidden_size,), hidden_size)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return cls(
            layers=layers,
            attn=attn,
            w_out=w_out,
            b_out=np.array([float(output_bias)]),
            mode=mode,
            feature_dim=feature_dim,
            num_steps=num_steps,
            horizon=horizon,
            input_transform=input_transform,
            target_transform=target_transform,
        )

    # parameter plumbing -------------------------------------------------

    def params(self) -> list[np.ndarray]:
        """Flat list of parameter arrays; backward_batch mirrors this order."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.arrays())
        if self.attn is not None:
            out.append(self.attn.w_a)
        out.append(self.w_out)
        out.append(self.b_out)
        return out

    def copy(self) -> "DlamModel":
        return DlamModel(
            layers=[p.copy() for p in self.layers],
            attn=None if self.attn is None else self.attn.copy(),
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
            mode=self.mode,
            feature_dim=self.feature_dim,
            num_steps=self.num_steps,
            horizon=self.horizon,
            input_transform=self.input_transform,
            target_transform=self.target_transform,
        )

    def set_params(self, values: list[np.ndarray]) -> None:
        own = self.params()
        if len(own) != len(values):
            raise ValueError(f"expected {len(own)} arrays, got {len(values)}")
        for dst, src in zip(own, values):
            if dst.shape != src.shape:
                raise ValueError(f"shape mismatch {dst.shape} vs {src.shape}")
            dst[...] = src

    # forward / backward -------------------------------------------------

    def _check_features(self, X: np.ndarray) -> None:
        if X.shape[-2:] != (self.num_steps, self.feature_dim):
            raise ValueError(
                f"feature shape {X.shape[-2:]}, expected "
                f"({self.num_steps}, {self.feature_dim})"
            )

    def forward_batch(self, X_raw: np.ndarray) -> ForwardCache:
        X_raw = np.asarray(X_raw, dtype=np.float64)
        self._check_features(X_raw)
        X = _transform(self.input_transform, X_raw)
        H_top, stack_cache = stack_forward(self.layers, X)
        if self.mode == MODE_DLAM:
            scores, weights, context = _attention_forward_batch(
                self.attn.w_a, X, H_top
            )
            readout_in = context
        else:
            scores = weights = context = None
            readout_in = H_top[:, -1, :]
        s = readout_in @ self.w_out + self.b_out[0]
        if self.target_transform == "log1p":
            pred_raw = np.expm1(s)
        else:
            pred_raw = s
        return ForwardCache(
            X=X, stack_cache=stack_cache, H_top=H_top, scores=scores,
            weights=weights, context=context, readout_in=readout_in,
            s=s, pred=np.maximum(pred_raw, 0.0), pred_raw=pred_raw,
        )

    def backward_batch(
        self, cache: ForwardCache, dPred: np.ndarray
    ) -> list[np.ndarray]:
        """Gradients for every parameter array, in params() order.

        Differentiates the unclamped prediction (``pred_raw``); the clamp at
        zero exists only on the serving path, where no gradient is needed.
        """
        dPred = np.asarray(dPred, dtype=np.float64)
        if self.target_transform == "log1p":
            ds = dPred * np.exp(cache.s)
        else:
            ds = dPred.copy()
        dw_out = cache.readout_in.T @ ds
        db_out = np.array([ds.sum()])
        d_readout_in = ds[:, None] * self.w_out[None, :]
        if self.mode == MODE_DLAM:
            dw_a, dX_attn, dH_top = _attention_backward_batch(
                self.attn.w_a, cache.X, cache.H_top,
                cache.scores, cache.weights, d_readout_in,
            )
        else:
            dH_top = np.zeros_like(cache.H_top)
            dH_top[:, -1, :] = d_readout_in
        layer_grads, _ = stack_backward(self.layers, cache.stack_cache, dH_top)
        out: list[np.ndarray] = []
        for g in layer_grads:
            out.extend(g.arrays())
        if self.mode == MODE_DLAM:
            out.append(dw_a)
        out.append(dw_out)
        out.append(db_out)
        return out

    # prediction ---------------------------------------------------------

    def predict(self, X: np.ndarray) -> float:
        """Predicted cumulative popularity (nonnegative) for one sequence."""
        X = np.asarray(X, dtype=np.float64)
        self._check_features(X)
        return float(self.forward_batch(X[None]).pred[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.forward_batch(X).pred

    def predict_with_trace(self, X: np.ndarray) -> tuple[float, AttentionTrace | None]:
        """Prediction plus the attention trace (None in the ablation mode)."""
        X = np.asarray(X, dtype=np.float64)
        self._check_features(X)
        cache = self.forward_batch(X[None])
        trace = None
        if self.mode == MODE_DLAM:
            trace = AttentionTrace(
                cache.scores[0], cache.weights[0], cache.context[0]
            )
        return float(cache.pred[0]), trace
