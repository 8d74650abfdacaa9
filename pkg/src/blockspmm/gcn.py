"""One GCNConv forward pass: dense transform, simulated sparse aggregation, ReLU."""

from __future__ import annotations

import numpy as np

from .graph import VALUE_DTYPE, CsrMatrix
from .partition import PartitionConfig
from .simulate import spmm


def dense_matmul(x, w) -> np.ndarray:
    """Plain float32 GEMM, accumulating one rank-1 update per inner index."""
    x = np.asarray(x, dtype=VALUE_DTYPE)
    w = np.asarray(w, dtype=VALUE_DTYPE)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"cannot multiply {x.shape} by {w.shape}")
    out = np.zeros((x.shape[0], w.shape[1]), dtype=VALUE_DTYPE)
    for k in range(x.shape[1]):
        out += x[:, k, None] * w[k]
    return out


def relu(y):
    return np.maximum(y, 0).astype(VALUE_DTYPE)


def gcn_layer_forward(x, w, a_norm: CsrMatrix, cfg: PartitionConfig | None = None) -> np.ndarray:
    x = np.asarray(x)
    if a_norm.n_rows != a_norm.n_cols:
        raise ValueError("adjacency must be square")
    if x.ndim != 2 or x.shape[0] != a_norm.n_rows:
        raise ValueError(f"features have shape {x.shape}, adjacency is {a_norm.shape}")
    return relu(spmm(a_norm, dense_matmul(x, w), cfg or PartitionConfig()))
