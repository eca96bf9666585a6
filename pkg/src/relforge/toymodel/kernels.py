"""Hot numeric kernels for training and inference over sparse hashed features.

Two interchangeable backends compute identical results:

  * numba  - the loop implementations below compiled with @njit (default
             when numba imports cleanly)
  * numpy  - vectorized fallbacks built on np.add.at

Selection: set RELFORGE_NUMBA=0 to force the numpy path, RELFORGE_NUMBA=1
to require numba (ImportError if missing); unset/auto prefers numba.
benchmarks/bench_kernels.py compares the two.

All kernels take CSR-style batches: indptr (B+1,), cols (nnz,) feature
indices, vals (nnz,) feature values; weights are dense (V, K) float64.
"""
from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "ema_blend",
    "gather_logits",
    "grad_accumulate",
    "numpy_kernels",
    "build_numba_kernels",
    "sgd_scatter",
]


# --- loop sources (numba-compilable, also a plain-python reference) -----------


def _gather_logits_loops(weights, bias, indptr, cols, vals):
    n_rows = indptr.shape[0] - 1
    n_classes = weights.shape[1]
    out = np.zeros((n_rows, n_classes))
    for i in range(n_rows):
        for e in range(indptr[i], indptr[i + 1]):
            c = cols[e]
            v = vals[e]
            for k in range(n_classes):
                out[i, k] += weights[c, k] * v
    for i in range(n_rows):
        for k in range(n_classes):
            out[i, k] += bias[k]
    return out


def _sgd_scatter_loops(weights, bias, indptr, cols, vals, dlogits, lr):
    n_rows = indptr.shape[0] - 1
    n_classes = weights.shape[1]
    for i in range(n_rows):
        for e in range(indptr[i], indptr[i + 1]):
            c = cols[e]
            v = vals[e]
            for k in range(n_classes):
                weights[c, k] -= lr * v * dlogits[i, k]
    for i in range(n_rows):
        for k in range(n_classes):
            bias[k] -= lr * dlogits[i, k]


def _grad_accumulate_loops(grad_w, grad_b, indptr, cols, vals, dlogits):
    n_rows = indptr.shape[0] - 1
    n_classes = grad_w.shape[1]
    for i in range(n_rows):
        for e in range(indptr[i], indptr[i + 1]):
            c = cols[e]
            v = vals[e]
            for k in range(n_classes):
                grad_w[c, k] += v * dlogits[i, k]
    for i in range(n_rows):
        for k in range(n_classes):
            grad_b[k] += dlogits[i, k]


def _ema_blend_loops(teacher, student, decay):
    flat_t = teacher.reshape(-1)
    flat_s = student.reshape(-1)
    for i in range(flat_t.shape[0]):
        flat_t[i] = decay * flat_t[i] + (1.0 - decay) * flat_s[i]


# --- numpy fallbacks ------------------------------------------------------------


def _row_ids(indptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def _gather_logits_numpy(weights, bias, indptr, cols, vals):
    out = np.zeros((indptr.shape[0] - 1, weights.shape[1]))
    if cols.size:
        np.add.at(out, _row_ids(indptr), weights[cols] * vals[:, None])
    out += bias
    return out


def _sgd_scatter_numpy(weights, bias, indptr, cols, vals, dlogits, lr):
    if cols.size:
        np.add.at(weights, cols, (-lr) * vals[:, None] * dlogits[_row_ids(indptr)])
    bias -= lr * dlogits.sum(axis=0)


def _grad_accumulate_numpy(grad_w, grad_b, indptr, cols, vals, dlogits):
    if cols.size:
        np.add.at(grad_w, cols, vals[:, None] * dlogits[_row_ids(indptr)])
    grad_b += dlogits.sum(axis=0)


def _ema_blend_numpy(teacher, student, decay):
    teacher *= decay
    teacher += (1.0 - decay) * student


_NUMPY_KERNELS = {
    "gather_logits": _gather_logits_numpy,
    "sgd_scatter": _sgd_scatter_numpy,
    "grad_accumulate": _grad_accumulate_numpy,
    "ema_blend": _ema_blend_numpy,
}

_LOOP_SOURCES = {
    "gather_logits": _gather_logits_loops,
    "sgd_scatter": _sgd_scatter_loops,
    "grad_accumulate": _grad_accumulate_loops,
    "ema_blend": _ema_blend_loops,
}


def numpy_kernels() -> dict:
    """The vectorized fallback kernels, regardless of the active backend."""
    return dict(_NUMPY_KERNELS)


def build_numba_kernels() -> dict:
    """JIT-compile the loop sources; raises ImportError when numba is absent."""
    from numba import njit

    return {name: njit(cache=True)(fn) for name, fn in _LOOP_SOURCES.items()}


def _select_backend() -> tuple[str, dict]:
    flag = os.environ.get("RELFORGE_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "no", "numpy"):
        return "numpy", _NUMPY_KERNELS
    try:
        kernels = build_numba_kernels()
        return "numba", kernels
    except ImportError:
        if flag in ("1", "true", "yes", "numba"):
            raise
        return "numpy", _NUMPY_KERNELS


BACKEND, _ACTIVE = _select_backend()

gather_logits = _ACTIVE["gather_logits"]
sgd_scatter = _ACTIVE["sgd_scatter"]
grad_accumulate = _ACTIVE["grad_accumulate"]
ema_blend = _ACTIVE["ema_blend"]
