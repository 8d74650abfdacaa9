import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockspmm.graph import (
    CsrMatrix,
    MatrixFormatError,
    degree_stats,
    gcn_normalize,
    load_edge_list,
    load_matrix_market,
    load_snapshot,
    save_snapshot,
    synth_power_law,
    synth_uniform_degree,
    write_matrix_market,
)
from oracles import triplet_dense


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- MatrixMarket -----------------------------------------------------------


def test_mtx_basic(tmp_path):
    p = write(
        tmp_path,
        "a.mtx",
        "%%MatrixMarket matrix coordinate real general\n% comment\n3 3 3\n1 1 2.0\n2 3 1.0\n3 2 5.0\n",
    )
    a = load_matrix_market(p)
    assert a.row_ptr.tolist() == [0, 1, 2, 3]
    assert a.col_idx.tolist() == [0, 2, 1]
    assert a.values.tolist() == [2.0, 1.0, 5.0]
    a.validate()


def test_mtx_empty(tmp_path):
    a = load_matrix_market(write(tmp_path, "e.mtx", "%%MatrixMarket matrix coordinate real general\n3 3 0\n"))
    assert a.row_ptr.tolist() == [0, 0, 0, 0]
    assert a.nnz == 0


def test_mtx_duplicates_summed(tmp_path):
    text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 2.0\n1 1 3.0\n"
    a = load_matrix_market(write(tmp_path, "d.mtx", text))
    expected = triplet_dense(2, 2, [(0, 0, 2.0), (0, 0, 3.0)])
    assert a.nnz == 1
    assert a.to_dense().tolist() == expected


def test_mtx_pattern_gets_ones(tmp_path):
    text = "%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n"
    a = load_matrix_market(write(tmp_path, "p.mtx", text))
    assert a.values.tolist() == [1.0, 1.0]
    assert a.shape == (2, 3)


def test_mtx_symmetric_expands(tmp_path):
    text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 4.0\n3 3 1.0\n"
    a = load_matrix_market(write(tmp_path, "s.mtx", text))
    d = a.to_dense()
    assert d[1, 0] == d[0, 1] == 4.0 and d[2, 2] == 1.0 and a.nnz == 3


@pytest.mark.parametrize(
    "body, line",
    [
        ("3 3 1\n1 x 2.0\n", 3),
        ("3 3 1\n4 1 2.0\n", 3),
        ("3 3 2\n1 1 2.0\n\n2 2\n", 5),
        ("3 3\n", 2),
    ],
)
def test_mtx_errors_carry_line_numbers(tmp_path, body, line):
    p = write(tmp_path, "bad.mtx", "%%MatrixMarket matrix coordinate real general\n" + body)
    with pytest.raises(MatrixFormatError) as exc:
        load_matrix_market(p)
    assert exc.value.lineno == line
    assert f"line {line}" in str(exc.value)


def test_mtx_missing_banner(tmp_path):
    with pytest.raises(MatrixFormatError):
        load_matrix_market(write(tmp_path, "x.mtx", "3 3 0\n"))


def test_mtx_count_mismatch(tmp_path):
    p = write(tmp_path, "c.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n")
    with pytest.raises(MatrixFormatError, match="declared 3"):
        load_matrix_market(p)


# --- edge lists -------------------------------------------------------------


def test_edge_list_symmetric_pair(tmp_path):
    a = load_edge_list(write(tmp_path, "g.txt", "0 1\n1 0\n"))
    assert a.shape == (2, 2) and a.nnz == 2
    assert np.array_equal(a.to_dense(), a.to_dense().T)


def test_edge_list_comment(tmp_path):
    a = load_edge_list(write(tmp_path, "g.txt", "# comment\n0 2\n"))
    assert a.shape == (3, 3) and a.nnz == 1


@pytest.mark.parametrize("body", ["0 a\n", "0 -1\n", "3\n"])
def test_edge_list_errors(tmp_path, body):
    with pytest.raises(MatrixFormatError):
        load_edge_list(write(tmp_path, "g.txt", "0 1\n" + body))


def test_edge_list_random_matches_triplet_oracle(tmp_path):
    rng = random.Random(11)
    edges = [(rng.randrange(200), rng.randrange(200)) for _ in range(1000)]
    p = write(tmp_path, "g.txt", "".join(f"{s} {d}\n" for s, d in edges))
    a = load_edge_list(p)
    n = max(max(e) for e in edges) + 1
    expected = triplet_dense(n, n, [(s, d, 1.0) for s, d in edges])
    assert a.shape == (n, n)
    assert a.to_dense(np.float64).tolist() == expected
    a.validate()


# --- canonical form / roundtrips ----------------------------------------------

triplets = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.integers(1, 12),
    ).flatmap(
        lambda nm: st.tuples(
            st.just(nm[0]),
            st.just(nm[1]),
            st.lists(
                st.tuples(st.integers(0, nm[0] - 1), st.integers(0, nm[1] - 1), st.integers(-5, 5)),
                max_size=60,
            ),
        )
    )
)


@given(triplets)
def test_from_triplets_canonical(data):
    n, m, trip = data
    a = CsrMatrix.from_triplets(n, m, [t[0] for t in trip], [t[1] for t in trip], [t[2] for t in trip])
    a.validate()
    assert a.to_dense(np.float64).tolist() == triplet_dense(n, m, trip)


@settings(max_examples=30, deadline=None)
@given(triplets)
def test_serialisation_roundtrips(tmp_path_factory, data):
    n, m, trip = data
    a = CsrMatrix.from_triplets(n, m, [t[0] for t in trip], [t[1] for t in trip], [t[2] / 3 for t in trip])
    d = tmp_path_factory.mktemp("rt")
    write_matrix_market(a, d / "a.mtx")
    assert load_matrix_market(d / "a.mtx") == a
    save_snapshot(a, d / "a.csr")
    assert load_snapshot(d / "a.csr") == a


def test_snapshot_layout(tmp_path, golden):
    save_snapshot(golden, tmp_path / "f.csr")
    blob = (tmp_path / "f.csr").read_bytes()
    assert blob[:4] == b"CSR1"
    assert np.frombuffer(blob, "<u8", 3, 4).tolist() == [3, 4, 8]
    assert len(blob) == 4 + 24 + 8 * 4 + 4 * 8 + 4 * 8


def test_snapshot_rejects_truncation(tmp_path, golden):
    save_snapshot(golden, tmp_path / "f.csr")
    blob = (tmp_path / "f.csr").read_bytes()
    (tmp_path / "g.csr").write_bytes(blob[:-4])
    with pytest.raises(MatrixFormatError):
        load_snapshot(tmp_path / "g.csr")


def test_validate_catches_unsorted_columns():
    bad = CsrMatrix(1, 3, [0, 2], [2, 0], [1.0, 1.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        bad.validate()


# --- synthetic graphs ---------------------------------------------------------


def test_synth_degenerate():
    a = synth_power_law(1, 1, 1, 0)
    assert a.shape == (1, 1) and a.nnz <= 1


def test_synth_deterministic():
    assert synth_power_law(500, 6, 1.5, 3) == synth_power_law(500, 6, 1.5, 3)
    assert synth_power_law(500, 6, 1.5, 3) != synth_power_law(500, 6, 1.5, 4)


@pytest.mark.parametrize("n, avg, skew, seed", [(10_000, 8, 1.5, 7), (1000, 4, 2.0, 1), (2000, 10, 1.1, 5)])
def test_synth_heavy_tail_and_size(n, avg, skew, seed):
    a = synth_power_law(n, avg, skew, seed)
    a.validate()
    assert abs(a.nnz - n * avg) <= 0.1 * n * avg
    assert degree_stats(a).max_over_mean >= 5


@pytest.mark.parametrize("args", [(0, 1, 1, 0), (10, 0, 1, 0), (10, 1, 0, 0), (10, -1, 1, 0)])
def test_synth_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        synth_power_law(*args)


def test_uniform_degree():
    a = synth_uniform_degree(120, 7, seed=2)
    a.validate()
    assert set(a.degrees().tolist()) == {7}


# --- degree statistics ----------------------------------------------------------


def test_degree_stats_golden(golden):
    s = degree_stats(golden)
    assert (s.min, s.max) == (2, 4)
    assert s.mean == pytest.approx(8 / 3)
    assert s.max_over_mean == pytest.approx(4 / (8 / 3))
    assert s.histogram == {2: 2, 4: 1}


def test_degree_stats_empty_rows():
    s = degree_stats(CsrMatrix.empty(5, 5))
    assert s.min == s.max == 0 and s.mean == 0.0
    assert s.histogram == {0: 5}


def test_degree_stats_histogram_recount():
    a = synth_power_law(10_000, 8, 1.5, 7)
    s = degree_stats(a)
    assert sum(s.histogram.values()) == 10_000
    recount = {}
    for i in range(a.n_rows):
        d = int(a.row_ptr[i + 1] - a.row_ptr[i])
        recount[d] = recount.get(d, 0) + 1
    assert recount == s.histogram
    assert s.max_over_mean == pytest.approx(s.max / s.mean)


# --- normalisation ----------------------------------------------------------------


def test_normalize_single_zero():
    out = gcn_normalize(CsrMatrix.empty(1, 1))
    assert out.to_dense().tolist() == [[1.0]]


def test_normalize_two_nodes():
    a = CsrMatrix.from_triplets(2, 2, [0, 1], [1, 0])
    assert gcn_normalize(a).to_dense().tolist() == [[0.5, 0.5], [0.5, 0.5]]


def test_normalize_rejects_rectangular(golden):
    with pytest.raises(ValueError):
        gcn_normalize(golden)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 80), st.integers(0, 2**16))
def test_normalize_row_identity(n, n_edges, seed):
    rng = random.Random(seed)
    src = [rng.randrange(n) for _ in range(n_edges)]
    dst = [rng.randrange(n) for _ in range(n_edges)]
    a = CsrMatrix.from_triplets(n, n, src + dst, dst + src)
    out = gcn_normalize(a)
    out.validate()
    # degree of A + I from the dense oracle
    dense = np.array(triplet_dense(n, n, [(s, d, 1.0) for s, d in zip(src + dst, dst + src)]))
    dt = dense.sum(axis=1) + 1.0
    o = out.to_dense(np.float64)
    lhs = (o * np.sqrt(dt[None, :] / dt[:, None])).sum(axis=1)
    assert np.allclose(lhs, 1.0, rtol=1e-6)
