"""Block-level partitioning with packed 128-bit descriptors, plus the warp-level baseline.

Descriptor layout (little endian, four 32-bit words): ``deg, loc, row, info``.
For ``deg <= deg_bound`` the info word holds ``warp_nzs`` in its high 16 bits
and the number of rows covered by the block in its low 16 bits. For larger
degrees it holds the nonzero count assigned to the block.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .graph import CsrMatrix

WARP_SIZE = 32
U32_MAX = 0xFFFFFFFF
U16_MAX = 0xFFFF


@dataclass(frozen=True)
class PartitionConfig:
    max_block_warps: int = 12
    max_warp_nzs: int = 32
    warp_size: int = WARP_SIZE

    def __post_init__(self):
        if self.max_block_warps < 1 or self.max_warp_nzs < 1:
            raise ValueError("max_block_warps and max_warp_nzs must be >= 1")
        if self.warp_size != WARP_SIZE:
            raise ValueError("warp_size is fixed at 32")
        if self.max_block_warps > U16_MAX or self.max_warp_nzs > U16_MAX:
            raise ValueError("config values must fit the 16-bit info halves")

    @property
    def deg_bound(self) -> int:
        return self.max_block_warps * self.max_warp_nzs

    def to_dict(self) -> dict:
        return {
            "max_block_warps": self.max_block_warps,
            "max_warp_nzs": self.max_warp_nzs,
            "warp_size": self.warp_size,
            "deg_bound": self.deg_bound,
        }


class Pattern(NamedTuple):
    block_rows: int
    warp_nzs: int

    def warps_per_row(self, cfg: PartitionConfig) -> int:
        return cfg.max_block_warps // self.block_rows


@dataclass(frozen=True)
class PatternTable:
    cfg: PartitionConfig
    entries: tuple[Pattern, ...]  # entries[d - 1] is the pattern for degree d

    def __getitem__(self, deg: int) -> Pattern:
        if not 1 <= deg <= len(self.entries):
            raise KeyError(f"no pattern for degree {deg} (table covers 1..{len(self.entries)})")
        return self.entries[deg - 1]

    def __len__(self):
        return len(self.entries)

    def items(self):
        return ((d, p) for d, p in enumerate(self.entries, start=1))

    def to_dict(self) -> dict:
        return {str(d): {"block_rows": p.block_rows, "warp_nzs": p.warp_nzs} for d, p in self.items()}


def get_partition_patterns(cfg: PartitionConfig) -> PatternTable:
    """Per-degree (block_rows, warp_nzs) for degrees 1..deg_bound inclusive.

    Factors of max_block_warps are scanned in ascending order with a cursor
    that only moves forward as the degree grows: the first factor ``f`` with
    ``f * max_warp_nzs >= deg`` gives ``max_block_warps / f`` rows per block
    and ``ceil(deg / f)`` nonzeros per warp.
    """
    mbw, mwn = cfg.max_block_warps, cfg.max_warp_nzs
    factors = [f for f in range(1, mbw + 1) if mbw % f == 0]
    entries = []
    i, deg = 0, 1
    while deg <= cfg.deg_bound:
        f = factors[i]
        if f * mwn >= deg:
            entries.append(Pattern(mbw // f, -(-deg // f)))
            deg += 1
        else:
            i += 1
    return PatternTable(cfg, tuple(entries))


class BlockDescriptor(NamedTuple):
    deg: int
    loc: int
    row: int
    info: int

    def is_oversized(self, cfg: PartitionConfig) -> bool:
        return self.deg > cfg.deg_bound

    @property
    def warp_nzs(self) -> int:
        return self.info >> 16

    @property
    def rows(self) -> int:
        return self.info & U16_MAX

    def nnz(self, cfg: PartitionConfig) -> int:
        """Nonzeros covered by this block."""
        if self.is_oversized(cfg):
            return self.info
        return self.deg * self.rows

    def to_dict(self, cfg: PartitionConfig | None = None) -> dict:
        d = {"deg": self.deg, "loc": self.loc, "row": self.row, "info": self.info}
        if cfg is not None:
            if self.is_oversized(cfg):
                d["block_nnz"] = self.info
            else:
                d["warp_nzs"], d["rows"] = self.warp_nzs, self.rows
        return d


def pack_info(warp_nzs: int, rows: int) -> int:
    if not (0 <= warp_nzs <= U16_MAX and 0 <= rows <= U16_MAX):
        raise OverflowError(f"info halves must fit 16 bits: warp_nzs={warp_nzs}, rows={rows}")
    return (warp_nzs << 16) | rows


class WarpTask(NamedTuple):
    row: int
    col: int  # offset inside the row's nonzero segment
    len: int


# ---------------------------------------------------------------------------


def block_partition(sorted_a: CsrMatrix, patterns: PatternTable, cfg: PartitionConfig) -> list[BlockDescriptor]:
    """Descriptors in nonzero order for a degree-sorted CSR matrix.

    Rows of one degree ``d <= deg_bound`` are grouped ``block_rows`` at a time;
    a trailing partial group gets its own descriptor. Rows above ``deg_bound``
    are cut into ``deg_bound``-sized slices plus a remainder slice. Empty
    groups and empty slices are never emitted; degree-0 rows emit nothing.
    """
    if patterns.cfg != cfg:
        raise ValueError("pattern table was generated from a different config")
    deg = sorted_a.degrees()
    if np.any(np.diff(deg) < 0):
        raise ValueError("input rows are not sorted by non-decreasing degree")
    if deg.size and int(deg[-1]) > U32_MAX:
        raise OverflowError("degree does not fit 32 bits")
    if sorted_a.nnz > U32_MAX or sorted_a.n_rows > U32_MAX:
        raise OverflowError("matrix too large for 32-bit descriptor fields")

    row_ptr = sorted_a.row_ptr
    bound = cfg.deg_bound
    out: list[BlockDescriptor] = []
    # runs of equal degree in the sorted order
    starts = np.flatnonzero(np.diff(deg, prepend=-1)) if deg.size else np.zeros(0, int)
    ends = np.append(starts[1:], deg.size)
    for first, stop in zip(starts.tolist(), ends.tolist()):
        d = int(deg[first])
        if d == 0:
            continue
        if d <= bound:
            pat = patterns[d]
            row = first
            rows_remaining = stop - first
            while rows_remaining >= pat.block_rows:
                out.append(BlockDescriptor(d, int(row_ptr[row]), row, pack_info(pat.warp_nzs, pat.block_rows)))
                row += pat.block_rows
                rows_remaining -= pat.block_rows
            if rows_remaining:
                out.append(BlockDescriptor(d, int(row_ptr[row]), row, pack_info(pat.warp_nzs, rows_remaining)))
        else:
            for row in range(first, stop):
                loc = int(row_ptr[row])
                deg_remaining = d
                while deg_remaining >= bound:
                    out.append(BlockDescriptor(d, loc, row, bound))
                    loc += bound
                    deg_remaining -= bound
                if deg_remaining:
                    out.append(BlockDescriptor(d, loc, row, deg_remaining))
    return out


def descriptor_spans(blocks, cfg: PartitionConfig) -> np.ndarray:
    """(k, 2) array of [loc, loc + block_nnz) nonzero intervals."""
    spans = np.array([(b.loc, b.loc + b.nnz(cfg)) for b in blocks], dtype=np.int64)
    return spans.reshape(-1, 2)


def warp_partition(a: CsrMatrix, max_warp_nzs: int) -> list[WarpTask]:
    """Fixed-size nonzero groups, one task per warp (the warp-level baseline)."""
    if max_warp_nzs < 1:
        raise ValueError("max_warp_nzs must be >= 1")
    deg = a.degrees()
    n_tasks = -(-deg // max_warp_nzs)
    rows = np.repeat(np.arange(a.n_rows, dtype=np.int64), n_tasks)
    # chunk index within the row
    first_task = np.cumsum(n_tasks) - n_tasks
    chunk = np.arange(rows.size, dtype=np.int64) - np.repeat(first_task, n_tasks)
    col = chunk * max_warp_nzs
    length = np.minimum(max_warp_nzs, deg[rows] - col)
    return [WarpTask(*t) for t in zip(rows.tolist(), col.tolist(), length.tolist())]


def storage_ratio(blocks, warps) -> float:
    """Block metadata bytes over warp metadata bytes (both padded to 128-bit records)."""
    if not len(warps):
        raise ValueError("warp partition is empty")
    return (len(blocks) * 128) / (len(warps) * 128)


# ---------------------------------------------------------------------------
# 128-bit records

_REC = struct.Struct("<4I")


def pack_descriptor(d: BlockDescriptor) -> int:
    """128-bit integer whose little-endian bytes are (deg, loc, row, info)."""
    for name, v in zip(BlockDescriptor._fields, d):
        if not 0 <= v <= U32_MAX:
            raise OverflowError(f"descriptor field {name}={v} does not fit 32 bits")
    return d.deg | (d.loc << 32) | (d.row << 64) | (d.info << 96)


def unpack_descriptor(word: int, cfg: PartitionConfig | None = None) -> BlockDescriptor:
    if not 0 <= word < (1 << 128):
        raise OverflowError("descriptor word must fit 128 bits")
    d = BlockDescriptor(word & U32_MAX, (word >> 32) & U32_MAX, (word >> 64) & U32_MAX, word >> 96)
    if cfg is not None and d.deg and d.deg > cfg.deg_bound and not 1 <= d.info <= cfg.deg_bound:
        raise ValueError(f"oversized descriptor carries {d.info} nonzeros, bound is {cfg.deg_bound}")
    return d


def descriptors_to_bytes(blocks) -> bytes:
    return b"".join(pack_descriptor(b).to_bytes(16, "little") for b in blocks)


def descriptors_from_bytes(blob: bytes) -> list[BlockDescriptor]:
    if len(blob) % 16:
        raise ValueError("descriptor stream length is not a multiple of 16 bytes")
    return [BlockDescriptor(*_REC.unpack_from(blob, off)) for off in range(0, len(blob), 16)]


def warp_tasks_to_bytes(tasks) -> bytes:
    """Each task is 96 bits of payload plus 32 bits of zero padding."""
    return b"".join(_REC.pack(t.row, t.col, t.len, 0) for t in tasks)


def warp_tasks_from_bytes(blob: bytes) -> list[WarpTask]:
    if len(blob) % 16:
        raise ValueError("warp task stream length is not a multiple of 16 bytes")
    out = []
    for off in range(0, len(blob), 16):
        row, col, length, pad = _REC.unpack_from(blob, off)
        if pad:
            raise ValueError(f"non-zero padding in warp task record at byte {off}")
        out.append(WarpTask(row, col, length))
    return out


def write_descriptors(blocks, path) -> None:
    Path(path).write_bytes(descriptors_to_bytes(blocks))


def read_descriptors(path) -> list[BlockDescriptor]:
    return descriptors_from_bytes(Path(path).read_bytes())
