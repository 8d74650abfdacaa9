"""Stable O(n) counting sort of CSR rows by degree, and the inverse row permutation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import CsrMatrix


@dataclass(frozen=True, eq=False)
class RowPermutation:
    sorted_to_orig: np.ndarray
    orig_to_sorted: np.ndarray

    def __len__(self):
        return self.sorted_to_orig.size

    def __eq__(self, other):
        if not isinstance(other, RowPermutation):
            return NotImplemented
        return np.array_equal(self.sorted_to_orig, other.sorted_to_orig)

    __hash__ = None

    @classmethod
    def from_sorted_to_orig(cls, sorted_to_orig) -> "RowPermutation":
        s2o = np.asarray(sorted_to_orig, dtype=np.int64)
        n = s2o.size
        o2s = np.full(n, -1, dtype=np.int64)
        if n and (s2o.min() < 0 or s2o.max() >= n):
            raise ValueError("permutation entry out of range")
        o2s[s2o] = np.arange(n)
        if np.any(o2s < 0):
            raise ValueError("not a permutation: repeated entries")
        return cls(s2o, o2s)

    @classmethod
    def identity(cls, n: int) -> "RowPermutation":
        return cls(np.arange(n), np.arange(n))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.sorted_to_orig, np.arange(len(self))))

    def to_json(self) -> str:
        return json.dumps(self.sorted_to_orig.tolist())

    @classmethod
    def from_json(cls, text: str) -> "RowPermutation":
        return cls.from_sorted_to_orig(json.loads(text))


def counting_sort_order(keys) -> np.ndarray:
    """Stable ascending order of non-negative integer keys by counting sort.

    Returns ``order`` with ``keys[order]`` non-decreasing; equal keys keep their
    input order. Time is O(len(keys) + max(keys)).
    """
    keys = [int(k) for k in np.asarray(keys).tolist()]
    if not keys:
        return np.zeros(0, dtype=np.int64)
    counts = [0] * (max(keys) + 1)
    for k in keys:
        if k < 0:
            raise ValueError("counting sort needs non-negative keys")
        counts[k] += 1
    # exclusive prefix sum -> first slot of each bucket
    nxt = [0] * len(counts)
    total = 0
    for k, c in enumerate(counts):
        nxt[k] = total
        total += c
    order = [0] * len(keys)
    for i, k in enumerate(keys):
        order[nxt[k]] = i
        nxt[k] += 1
    return np.asarray(order, dtype=np.int64)


def permute_csr_rows(a: CsrMatrix, sorted_to_orig) -> CsrMatrix:
    """Row i of the result is row ``sorted_to_orig[i]`` of ``a``; columns untouched."""
    s2o = np.asarray(sorted_to_orig, dtype=np.int64)
    deg = a.degrees()[s2o]
    row_ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(deg, out=row_ptr[1:])
    # gather: nonzero p of new row i comes from old_start[i] + (p - new_start[i])
    shift = np.repeat(a.row_ptr[:-1][s2o] - row_ptr[:-1], deg)
    src = np.arange(row_ptr[-1], dtype=np.int64) + shift
    return CsrMatrix(a.n_rows, a.n_cols, row_ptr, a.col_idx[src], a.values[src])


def sort_rows_by_degree(a: CsrMatrix) -> tuple[CsrMatrix, RowPermutation]:
    """Reorder rows by ascending degree (stable); degree-0 rows go first."""
    order = counting_sort_order(a.degrees())
    perm = RowPermutation.from_sorted_to_orig(order)
    return permute_csr_rows(a, order), perm


def permute_rows(x: np.ndarray, perm: RowPermutation) -> np.ndarray:
    """Original-order dense rows -> sorted order."""
    x = np.asarray(x)
    if x.shape[0] != len(perm):
        raise ValueError(f"matrix has {x.shape[0]} rows, permutation has {len(perm)}")
    return x[perm.sorted_to_orig]


def restore_rows(y_sorted: np.ndarray, perm: RowPermutation) -> np.ndarray:
    """Sorted-order dense rows -> original order (``out[sorted_to_orig[i]] = y_sorted[i]``)."""
    y_sorted = np.asarray(y_sorted)
    if y_sorted.shape[0] != len(perm):
        raise ValueError(f"matrix has {y_sorted.shape[0]} rows, permutation has {len(perm)}")
    out = np.empty_like(y_sorted)
    out[perm.sorted_to_orig] = y_sorted
    return out
