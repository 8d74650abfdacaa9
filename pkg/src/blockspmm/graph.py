"""CSR storage, ingestion, synthetic power-law graphs and degree statistics."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VALUE_DTYPE = np.float32
INDEX_DTYPE = np.int32
PTR_DTYPE = np.int64

SNAPSHOT_MAGIC = b"CSR1"


class MatrixFormatError(ValueError):
    """Malformed input file. ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        # normalise dtypes; frozen, so go through object.__setattr__
        object.__setattr__(self, "row_ptr", np.ascontiguousarray(self.row_ptr, dtype=PTR_DTYPE))
        object.__setattr__(self, "col_idx", np.ascontiguousarray(self.col_idx, dtype=INDEX_DTYPE))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=VALUE_DTYPE))
        for arr in (self.row_ptr, self.col_idx, self.values):
            arr.flags.writeable = False

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1]) if len(self.row_ptr) else 0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def row_ids(self) -> np.ndarray:
        """Row index of every stored nonzero."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), self.degrees())

    def to_dense(self, dtype=VALUE_DTYPE) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=dtype)
        out[self.row_ids(), self.col_idx] = self.values
        return out

    def validate(self) -> None:
        """Raise ValueError unless the canonical-form invariants hold."""
        rp, ci = self.row_ptr, self.col_idx
        if rp.shape != (self.n_rows + 1,):
            raise ValueError(f"row_ptr has length {rp.size}, expected {self.n_rows + 1}")
        if rp[0] != 0:
            raise ValueError("row_ptr[0] must be 0")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        nnz = int(rp[-1])
        if ci.size != nnz or self.values.size != nnz:
            raise ValueError("col_idx/values length does not match row_ptr[-1]")
        if nnz:
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing inside each row: every step that is not a row start must increase
            step_ok = np.diff(ci) > 0
            row_starts = np.zeros(nnz, dtype=bool)
            row_starts[rp[1:-1][rp[1:-1] < nnz]] = True
            if not np.all(step_ok | row_starts[1:]):
                raise ValueError("column indices not strictly increasing within a row")

    def __eq__(self, other):
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> "CsrMatrix":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1), np.zeros(0), np.zeros(0))

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, vals=None) -> "CsrMatrix":
        """Canonical CSR from COO triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if vals is None:
            vals = np.ones(rows.size, dtype=np.float64)
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("triplet arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValueError("column index out of range")
        keys = rows * max(n_cols, 1) + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        summed = np.zeros(uniq.size, dtype=np.float64)
        np.add.at(summed, inverse, vals)
        urows = uniq // max(n_cols, 1)
        ucols = uniq % max(n_cols, 1)
        row_ptr = np.zeros(n_rows + 1, dtype=PTR_DTYPE)
        np.cumsum(np.bincount(urows, minlength=n_rows), out=row_ptr[1:])
        return cls(n_rows, n_cols, row_ptr, ucols, summed)

    @classmethod
    def from_dense(cls, dense) -> "CsrMatrix":
        dense = np.asarray(dense)
        r, c = np.nonzero(dense)
        return cls.from_triplets(dense.shape[0], dense.shape[1], r, c, dense[r, c])


# ---------------------------------------------------------------------------
# ingestion / serialisation


def load_matrix_market(path) -> CsrMatrix:
    """Read a MatrixMarket coordinate file (real/integer/pattern; general or symmetric)."""
    path = Path(path)
    with path.open("r") as fh:
        lines = fh.readlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise MatrixFormatError("missing %%MatrixMarket banner", 1)
    banner = lines[0].lower().split()
    if len(banner) < 5 or banner[1] != "matrix" or banner[2] != "coordinate":
        raise MatrixFormatError("only 'matrix coordinate' files are supported", 1)
    field_kind, symmetry = banner[3], banner[4]
    if field_kind not in ("real", "integer", "pattern"):
        raise MatrixFormatError(f"unsupported field {field_kind!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixFormatError(f"unsupported symmetry {symmetry!r}", 1)

    size_line = None
    rows, cols, vals = [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        tokens = text.split()
        if size_line is None:
            try:
                n_rows, n_cols, declared = (int(t) for t in tokens[:3])
            except ValueError:
                raise MatrixFormatError(f"bad size line {text!r}", lineno) from None
            if len(tokens) != 3 or min(n_rows, n_cols, declared) < 0:
                raise MatrixFormatError(f"bad size line {text!r}", lineno)
            size_line = lineno
            continue
        want = 2 if field_kind == "pattern" else 3
        if len(tokens) != want:
            raise MatrixFormatError(f"expected {want} tokens, got {len(tokens)}", lineno)
        try:
            i, j = int(tokens[0]), int(tokens[1])
            v = 1.0 if field_kind == "pattern" else float(tokens[2])
        except ValueError:
            raise MatrixFormatError(f"cannot parse entry {text!r}", lineno) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixFormatError(f"index ({i}, {j}) outside declared {n_rows}x{n_cols}", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symmetry == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    if size_line is None:
        raise MatrixFormatError("missing size line", len(lines))
    entries = len(rows) if symmetry == "general" else sum(1 for r, c in zip(rows, cols) if r >= c)
    if entries != declared:
        raise MatrixFormatError(f"declared {declared} entries, found {entries}", size_line)
    return CsrMatrix.from_triplets(n_rows, n_cols, rows, cols, vals)


def write_matrix_market(a: CsrMatrix, path) -> None:
    with Path(path).open("w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        for i, j, v in zip(a.row_ids().tolist(), a.col_idx.tolist(), a.values.tolist()):
            # repr of the float32 value as a python float roundtrips exactly
            fh.write(f"{i + 1} {j + 1} {v!r}\n")


def load_edge_list(path) -> CsrMatrix:
    """Whitespace separated ``src dst`` pairs, 0-based, '#' comments."""
    src, dst = [], []
    with Path(path).open("r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            if len(tokens) < 2:
                raise MatrixFormatError(f"expected 'src dst', got {text!r}", lineno)
            try:
                s, d = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise MatrixFormatError(f"non-integer node id in {text!r}", lineno) from None
            if s < 0 or d < 0:
                raise MatrixFormatError(f"negative node id in {text!r}", lineno)
            src.append(s)
            dst.append(d)
    n = max(max(src), max(dst)) + 1 if src else 0
    return CsrMatrix.from_triplets(n, n, src, dst)


def save_snapshot(a: CsrMatrix, path) -> None:
    """Binary CSR snapshot: b"CSR1", <u64 n_rows, n_cols, nnz>, row_ptr i64, col_idx i32, values f32."""
    with Path(path).open("wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<QQQ", a.n_rows, a.n_cols, a.nnz))
        fh.write(a.row_ptr.astype("<i8").tobytes())
        fh.write(a.col_idx.astype("<i4").tobytes())
        fh.write(a.values.astype("<f4").tobytes())


def load_snapshot(path) -> CsrMatrix:
    blob = Path(path).read_bytes()
    if blob[:4] != SNAPSHOT_MAGIC:
        raise MatrixFormatError("bad snapshot magic")
    n_rows, n_cols, nnz = struct.unpack_from("<QQQ", blob, 4)
    off = 4 + 24
    expected = off + 8 * (n_rows + 1) + 4 * nnz + 4 * nnz
    if len(blob) != expected:
        raise MatrixFormatError(f"snapshot is {len(blob)} bytes, expected {expected}")
    row_ptr = np.frombuffer(blob, "<i8", n_rows + 1, off)
    off += 8 * (n_rows + 1)
    col_idx = np.frombuffer(blob, "<i4", nnz, off)
    off += 4 * nnz
    values = np.frombuffer(blob, "<f4", nnz, off)
    a = CsrMatrix(n_rows, n_cols, row_ptr, col_idx, values)
    a.validate()
    return a


# ---------------------------------------------------------------------------
# synthetic inputs


def _power_law_degrees(rng, n_rows, n_cols, avg_degree, skew):
    raw = rng.pareto(skew, n_rows) + 1.0
    target = avg_degree * n_rows
    cap = float(n_cols)
    deg = raw * (target / raw.sum())
    # water-fill: clip at the column count and hand the excess to the unclipped rows
    for _ in range(50):
        over = deg > cap
        if not over.any():
            break
        deg[over] = cap
        free = ~over
        room = target - deg[over].sum()
        if not free.any() or deg[free].sum() <= 0:
            break
        deg[free] *= room / deg[free].sum()
    # cumulative rounding keeps the total within one of the float total
    cum = np.floor(np.cumsum(deg) + 0.5)
    return np.diff(np.concatenate(([0.0], cum))).astype(np.int64).clip(0, n_cols)


def synth_power_law(n_rows: int, avg_degree: float, skew: float, seed: int) -> CsrMatrix:
    """Square unweighted matrix whose row degrees follow a Pareto tail.

    ``skew`` is the Pareto shape: smaller means heavier tail. Columns of each
    row are drawn uniformly without replacement.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    if not avg_degree > 0:
        raise ValueError("avg_degree must be > 0")
    if not skew > 0:
        raise ValueError("skew must be > 0")
    rng = np.random.default_rng(seed)
    n_cols = n_rows
    deg = _power_law_degrees(rng, n_rows, n_cols, avg_degree, skew)

    rows, cols = _sample_columns(rng, deg, n_cols)
    return CsrMatrix.from_triplets(n_rows, n_cols, rows, cols)


def _sample_columns(rng, deg, n_cols):
    """Distinct uniformly random columns for each row, ``deg[i]`` of them for row i."""
    n_rows = deg.size
    rows_out, cols_out = [], []
    dense = deg > n_cols // 2
    for r in np.flatnonzero(dense).tolist():
        rows_out.append(np.full(deg[r], r, dtype=np.int64))
        cols_out.append(rng.permutation(n_cols)[: deg[r]])

    # sparse rows: sample with replacement, drop duplicates, top up the shortfall
    need = np.where(dense, 0, deg)
    keys = np.zeros(0, dtype=np.int64)
    while need.sum():
        r = np.repeat(np.arange(n_rows, dtype=np.int64), need)
        keys = np.unique(np.concatenate((keys, r * n_cols + rng.integers(0, n_cols, r.size))))
        need = np.where(dense, 0, deg - np.bincount(keys // n_cols, minlength=n_rows))
    rows_out.append(keys // n_cols)
    cols_out.append(keys % n_cols)
    return np.concatenate(rows_out), np.concatenate(cols_out)


def synth_uniform_degree(n_rows: int, degree: int, seed: int = 0, n_cols: int | None = None) -> CsrMatrix:
    """Every row has exactly ``degree`` distinct, uniformly chosen columns."""
    n_cols = n_rows if n_cols is None else n_cols
    if not 0 <= degree <= n_cols:
        raise ValueError("degree must lie in [0, n_cols]")
    rng = np.random.default_rng(seed)
    rows, cols = _sample_columns(rng, np.full(n_rows, degree, dtype=np.int64), n_cols)
    return CsrMatrix.from_triplets(n_rows, n_cols, rows, cols)


# ---------------------------------------------------------------------------
# statistics / normalisation


@dataclass(frozen=True)
class DegreeStats:
    min: int
    max: int
    mean: float
    max_over_mean: float
    histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "max_over_mean": self.max_over_mean,
            "histogram": {str(k): v for k, v in self.histogram.items()},
        }


def degree_stats(a: CsrMatrix) -> DegreeStats:
    deg = a.degrees()
    if deg.size == 0:
        return DegreeStats(0, 0, 0.0, 0.0, {})
    counts = np.bincount(deg)
    hist = {int(d): int(c) for d, c in enumerate(counts) if c}
    mean = float(deg.mean())
    dmax = int(deg.max())
    return DegreeStats(int(deg.min()), dmax, mean, dmax / mean if mean > 0 else 0.0, hist)


def gcn_normalize(a: CsrMatrix) -> CsrMatrix:
    """Symmetric normalisation with self loops: D^-1/2 (A + I) D^-1/2."""
    if a.n_rows != a.n_cols:
        raise ValueError(f"gcn_normalize needs a square matrix, got {a.shape}")
    n = a.n_rows
    diag = np.arange(n)
    rows = np.concatenate((a.row_ids(), diag))
    cols = np.concatenate((a.col_idx.astype(np.int64), diag))
    vals = np.concatenate((a.values.astype(np.float64), np.ones(n)))
    tilde = CsrMatrix.from_triplets(n, n, rows, cols, vals)
    # row sums of A + I, in double precision
    d = np.add.reduceat(tilde.values.astype(np.float64), tilde.row_ptr[:-1]) if n else np.zeros(0)
    if np.any(d <= 0):
        raise ValueError("A + I has a row with non-positive degree; cannot normalise")
    inv_sqrt = 1.0 / np.sqrt(d)
    r = tilde.row_ids()
    scaled = tilde.values.astype(np.float64) * inv_sqrt[r] * inv_sqrt[tilde.col_idx]
    return CsrMatrix(n, n, tilde.row_ptr, tilde.col_idx, scaled)
