"""Shared numerical kernels: activations, softmax, RNG, gradient checking.

Everything operates on float64 numpy arrays. The model is tiny, so precision
is preferred over speed throughout.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "make_rng",
    "spawn_rngs",
    "matvec",
    "sigmoid",
    "tanh",
    "softmax",
    "finite_diff_grad",
    "uniform_init",
]


_TINY = np.finfo(np.float64).tiny
_ONE_BELOW = np.nextafter(1.0, 0.0)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator: same seed gives the same stream on every platform."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent reproducible streams from one corpus seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with an explicit shape check."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(
            f"matvec shape mismatch: matrix {m.shape} vs vector {v.shape}"
        )
    return m @ v


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, saturating without overflow.

    Outputs are strictly inside (0, 1) for finite inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    # keep the open-interval contract even where exp saturates float64
    return np.clip(out, _TINY, _ONE_BELOW)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax (max-subtraction). Rejects empty input."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of empty input")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)
    # strict positivity even where exp underflows; distorts the sum by < 1e-300
    return np.maximum(out, _TINY)


def finite_diff_grad(
    f: Callable[[np.ndarray], float],
    p: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of a scalar function at ``p``.

    The test-side oracle for every hand-derived backward pass; kept
    deliberately independent of any model code.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    p = np.asarray(p, dtype=np.float64)
    grad = np.empty_like(p)
    flat = p.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(p))
        flat[i] = orig - h
        fm = float(f(p))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value at parameter index {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def uniform_init(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int
) -> np.ndarray:
    """Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weight draw."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)
