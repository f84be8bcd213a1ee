"""Stacked LSTM: cell forward, multi-layer unroll, and exact BPTT.

Gate algebra, with [h_prev, x] concatenation in that bracket order:

    i = sigmoid(W_i [h_prev, x] + b_i)
    f = sigmoid(W_f [h_prev, x] + b_f)
    g = tanh(W_c [h_prev, x] + b_c)
    c = f * c_prev + i * g
    o = sigmoid(W_o [h_prev, x] + b_o)
    h = o * tanh(c)

All public entry points accept either a single sequence (T, K) or a batch
(B, T, K); internally everything is batched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import sigmoid, uniform_init

__all__ = [
    "LstmLayerParams",
    "LstmState",
    "StepCache",
    "StackCache",
    "lstm_cell_forward",
    "stack_forward",
    "stack_backward",
    "init_stack",
]


@dataclass
class LstmLayerParams:
    """Gate weights (H x (H+K_in)) and biases (H,) for one layer."""

    W_i: np.ndarray
    W_f: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.W_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_i.shape[1] - self.W_i.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [
            self.W_i, self.W_f, self.W_c, self.W_o,
            self.b_i, self.b_f, self.b_c, self.b_o,
        ]

    def zeros_like(self) -> "LstmLayerParams":
        return LstmLayerParams(*[np.zeros_like(a) for a in self.arrays()])

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(*[a.copy() for a in self.arrays()])

    @classmethod
    def init(
        cls, hidden_size: int, input_size: int, rng: np.random.Generator
    ) -> "LstmLayerParams":
        """Uniform weight init; forget bias starts at +1 so early training
        retains memory, other biases at 0."""
        fan_in = hidden_size + input_size
        shape = (hidden_size, fan_in)
        return cls(
            W_i=uniform_init(rng, shape, fan_in),
            W_f=uniform_init(rng, shape, fan_in),
            W_c=uniform_init(rng, shape, fan_in),
            W_o=uniform_init(rng, shape, fan_in),
            b_i=np.zeros(hidden_size),
            b_f=np.ones(hidden_size),
            b_c=np.zeros(hidden_size),
            b_o=np.zeros(hidden_size),
        )


@dataclass
class LstmState:
    """Working state h and memory cell c, each (H,) or (B, H)."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class StepCache:
    """Activations from one cell step, kept for the backward pass."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_o: np.ndarray
    candidate: np.ndarray
    c: np.ndarray
    h: np.ndarray


@dataclass
class StackCache:
    """Per-layer, per-timestep caches from one stack_forward call."""

    steps: list[list[StepCache]] = field(default_factory=list)

    @property
    def num_layers(self) -> int:
        return len(self.steps)

    @property
    def num_steps(self) -> int:
        return len(self.steps[0]) if self.steps else 0


def _check_layer_shapes(p: LstmLayerParams, layer_index: int) -> None:
    shape = p.W_i.shape
    for name, w in (("W_f", p.W_f), ("W_c", p.W_c), ("W_o", p.W_o)):
        if w.shape != shape:
            raise ValueError(
                f"layer {layer_index}: {name} shape {w.shape} != W_i shape {shape}"
            )
    for name, b in (("b_i", p.b_i), ("b_f", p.b_f), ("b_c", p.b_c), ("b_o", p.b_o)):
        if b.shape != (shape[0],):
            raise ValueError(
                f"layer {layer_index}: {name} shape {b.shape}, expected ({shape[0]},)"
            )


def _cell_forward_batch(
    p: LstmLayerParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> StepCache:
    z = np.concatenate([h_prev, x], axis=-1)
    gate_i = sigmoid(z @ p.W_i.T + p.b_i)
    gate_f = sigmoid(z @ p.W_f.T + p.b_f)
    candidate = np.tanh(z @ p.W_c.T + p.b_c)
    c = gate_f * c_prev + gate_i * candidate
    gate_o = sigmoid(z @ p.W_o.T + p.b_o)
    h = gate_o * np.tanh(c)
    return StepCache(x, h_prev, c_prev, gate_i, gate_f, gate_o, candidate, c, h)


def lstm_cell_forward(
    p: LstmLayerParams, x: np.ndarray, prev: LstmState, layer_index: int = 0
) -> tuple[LstmState, StepCache]:
    """One cell step on a single input vector."""
    _check_layer_shapes(p, layer_index)
    x = np.asarray(x, dtype=np.float64)
    hidden, k_in = p.hidden_size, p.input_size
    if x.shape != (k_in,):
        raise ValueError(
            f"layer {layer_index}: input shape {x.shape}, expected ({k_in},)"
        )
    if prev.h.shape != (hidden,) or prev.c.shape != (hidden,):
        raise ValueError(
            f"layer {layer_index}: state shapes {prev.h.shape}/{prev.c.shape}, "
            f"expected ({hidden},)"
        )
    cache = _cell_forward_batch(p, x[None, :], prev.h[None, :], prev.c[None, :])
    step = StepCache(*[a[0] for a in (
        cache.x, cache.h_prev, cache.c_prev, cache.gate_i, cache.gate_f,
        cache.gate_o, cache.candidate, cache.c, cache.h,
    )])
    return LstmState(h=step.h, c=step.c), step


def init_stack(
    num_layers: int, hidden_size: int, input_size: int, rng: np.random.Generator
) -> list[LstmLayerParams]:
    """Layers chained so layer l>0 consumes the previous layer's h."""
    if num_layers < 1:
        raise ValueError(f"need at least one layer, got {num_layers}")
    layers = []
    k = input_size
    for _ in range(num_layers):
        layers.append(LstmLayerParams.init(hidden_size, k, rng))
        k = hidden_size
    return layers


def stack_forward(
    layers: list[LstmLayerParams], X: np.ndarray
) -> tuple[np.ndarray, StackCache]:
    """Unroll the stack over a batch (B, T, K) or single sequence (T, K).

    Initial h and c are zero. Returns the top layer's hidden sequence with
    the same leading shape as the input.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None, :, :]
    if X.ndim != 3 or X.shape[1] < 1:
        raise ValueError(f"expected a nonempty (B, T, K) input, got shape {X.shape}")
    batch, steps, _ = X.shape
    cache = StackCache()
    inputs = X
    for li, p in enumerate(layers):
        _check_layer_shapes(p, li)
        if inputs.shape[2] != p.input_size:
            raise ValueError(
                f"layer {li}: input dim {inputs.shape[2]}, expected {p.input_size}"
            )
        hidden = p.hidden_size
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        layer_steps = []
        outputs = np.empty((batch, steps, hidden))
        for t in range(steps):
            step = _cell_forward_batch(p, inputs[:, t, :], h, c)
            h, c = step.h, step.c
            outputs[:, t, :] = h
            layer_steps.append(step)
        cache.steps.append(layer_steps)
        inputs = outputs
    top = inputs[0] if single else inputs
    return top, cache


def stack_backward(
    layers: list[LstmLayerParams], cache: StackCache, dH_top: np.ndarray
) -> tuple[list[LstmLayerParams], np.ndarray]:
    """Exact reverse-mode pass through the unrolled stack.

    ``dH_top`` holds the loss gradient w.r.t. every top-layer hidden vector.
    Returns per-layer parameter gradients (mirroring LstmLayerParams) and the
    gradient w.r.t. the input sequence.
    """
    dH_top = np.asarray(dH_top, dtype=np.float64)
    single = dH_top.ndim == 2
    if single:
        dH_top = dH_top[None, :, :]
    if cache.num_layers != len(layers):
        raise ValueError(
            f"cache has {cache.num_layers} layers, params have {len(layers)}"
        )
    steps = cache.num_steps
    if dH_top.shape[1] != steps:
        raise ValueError(
            f"dH_top has {dH_top.shape[1]} steps, cache has {steps}"
        )
    grads = [p.zeros_like() for p in layers]
    d_out = dH_top
    dX = None
    for li in range(len(layers) - 1, -1, -1):
        p, g = layers[li], grads[li]
        layer_steps = cache.steps[li]
        hidden = p.hidden_size
        batch = d_out.shape[0]
        if layer_steps[0].h.shape != (batch, hidden):
            raise ValueError(
                f"layer {li}: cache batch/hidden {layer_steps[0].h.shape} does not "
                f"match gradient {(batch, hidden)}"
            )
        dh_rec = np.zeros((batch, hidden))
        dc_rec = np.zeros((batch, hidden))
        d_below = np.empty((batch, steps, p.input_size))
        for t in range(steps - 1, -1, -1):
            s = layer_steps[t]
            dh = d_out[:, t, :] + dh_rec
            tanh_c = np.tanh(s.c)
            dz_o = dh * tanh_c * s.gate_o * (1.0 - s.gate_o)
            dc = dc_rec + dh * s.gate_o * (1.0 - tanh_c**2)
            dz_f = dc * s.c_prev * s.gate_f * (1.0 - s.gate_f)
            dz_i = dc * s.candidate * s.gate_i * (1.0 - s.gate_i)
            dz_c = dc * s.gate_i * (1.0 - s.candidate**2)
            dc_rec = dc * s.gate_f
            z = np.concatenate([s.h_prev, s.x], axis=-1)
            g.W_i += dz_i.T @ z
            g.W_f += dz_f.T @ z
            g.W_c += dz_c.T @ z
            g.W_o += dz_o.T @ z
            g.b_i += dz_i.sum(axis=0)
            g.b_f += dz_f.sum(axis=0)
            g.b_c += dz_c.sum(axis=0)
            g.b_o += dz_o.sum(axis=0)
            dz = dz_i @ p.W_i + dz_f @ p.W_f + dz_c @ p.W_c + dz_o @ p.W_o
            dh_rec = dz[:, :hidden]
            d_below[:, t, :] = dz[:, hidden:]
        d_out = d_below
        dX = d_below
    return grads, (dX[0] if single else dX)
