import io
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from betacopula.core import (
    RankMatrix,
    RngStream,
    TiePolicy,
    check_sample,
    compute_ranks,
    map_replicates,
    pseudo_observations,
    read_sample_csv,
    sample_simplex_uniform,
    simplex_to_weights,
    weight_g,
    write_rows_csv,
)
from betacopula.exceptions import DimensionError, SampleError, TieError

unit = st.floats(0.0, 1.0, allow_nan=False)


def g_bruteforce(u):
    d = len(u)
    return min(min(u[j], max(1 - u[k] for k in range(d) if k != j)) for j in range(d))


# --- ranks ----------------------------------------------------------------------


def test_ranks_of_column():
    x = np.array([[3.1, 0.0], [0.2, 1.0], [7.7, 2.0]])
    assert compute_ranks(x).ranks[:, 0].tolist() == [2, 1, 3]


def test_tie_error():
    with pytest.raises(TieError):
        compute_ranks([[5.0, 1.0], [5.0, 2.0]])


def test_tie_stable_order():
    rm = compute_ranks([[5.0, 1.0], [5.0, 2.0]], TiePolicy.STABLE)
    assert rm.ranks[:, 0].tolist() == [1, 2]
    assert rm.tie_flag == (True, False)
    assert rm.has_ties


def test_sample_validation():
    with pytest.raises(DimensionError):
        check_sample([[1.0], [2.0]])
    with pytest.raises(SampleError):
        check_sample([[1.0, np.nan]])
    with pytest.raises(SampleError):
        check_sample([[1.0, np.inf]])


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(2, 4)),
              elements=st.floats(-1e6, 1e6, allow_nan=False), unique=True))
def test_rank_columns_are_permutations(x):
    rm = compute_ranks(x, TiePolicy.STABLE)
    for col in rm.ranks.T:
        assert sorted(col.tolist()) == list(range(1, rm.n + 1))


@given(arrays(np.int64, st.tuples(st.integers(1, 30), st.integers(2, 4)),
              elements=st.integers(-500, 500), unique=True))
def test_rank_invariance_under_monotone_maps(x):
    # integer-valued data so the maps below cannot create ties by rounding
    x = x.astype(float)
    base = pseudo_observations(compute_ranks(x))
    assert np.array_equal(base, pseudo_observations(compute_ranks(np.exp(x / 10))))
    assert np.array_equal(base, pseudo_observations(compute_ranks(3.0 * x - 7.0)))


# --- pseudo-observations --------------------------------------------------------


def test_pseudo_observation_values():
    rm = RankMatrix.from_ranks([[2, 1], [1, 2], [3, 4], [4, 3]])
    assert pseudo_observations(rm)[0, 0] == 0.5
    assert pseudo_observations(RankMatrix.from_ranks([[1, 1]])).tolist() == [[1.0, 1.0]]
    rm10 = RankMatrix.from_ranks(np.column_stack([np.arange(1, 11), np.arange(10, 0, -1)]))
    assert np.array_equal(pseudo_observations(rm10)[:, 0], np.arange(1, 11) / 10)


# --- weight function ------------------------------------------------------------


def test_weight_g_examples():
    assert weight_g([0.5, 0.5]) == 0.5
    assert weight_g([1.0, 1.0]) == 0.0
    assert weight_g([0.2, 0.9, 0.7]) == pytest.approx(0.2)


def test_weight_g_rejects_d1():
    with pytest.raises(DimensionError):
        weight_g([0.3])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_weight_g_zero_set_on_corner_lattice(d):
    for u in itertools.product([0.0, 0.5, 1.0], repeat=d):
        some_zero = any(c == 0 for c in u)
        all_but_one_at_one = any(all(u[k] == 1 for k in range(d) if k != j) for j in range(d))
        assert (weight_g(u) == 0) == (some_zero or all_but_one_at_one), u


@given(st.lists(unit, min_size=2, max_size=5))
def test_weight_g_matches_formula_and_bounds(u):
    g = weight_g(u)
    assert g == pytest.approx(g_bruteforce(u), abs=1e-15)
    assert 0 <= g <= min(u) <= 1


@given(unit, unit)
def test_weight_g_symmetric_d2(a, b):
    assert weight_g([a, b]) == weight_g([b, a])


def test_weight_g_vectorised(rng):
    u = rng.random((50, 3))
    assert np.allclose(weight_g(u), [g_bruteforce(row) for row in u], atol=0)


# --- simplex --------------------------------------------------------------------


def test_simplex_uniform_d2_mean():
    t = sample_simplex_uniform(RngStream(1), 2, size=100_000)
    assert t.shape == (100_000, 1)
    assert abs(t.mean() - 0.5) < 0.01


def test_simplex_uniform_d3():
    t = sample_simplex_uniform(RngStream(2), 3, size=100_000)
    assert np.all(t.sum(axis=1) <= 1.0) and np.all(t >= 0)
    assert abs(t[:, 0].mean() - 1 / 3) < 0.01


def test_simplex_sampling_deterministic():
    a = sample_simplex_uniform(RngStream(9, 4), 3, size=10)
    b = sample_simplex_uniform(RngStream(9, 4), 3, size=10)
    assert np.array_equal(a, b)


def test_simplex_to_weights_clamps_rounding():
    w = simplex_to_weights([0.7, 0.3 + 5e-13])
    assert w[-1] == 0.0
    with pytest.raises(ValueError):
        simplex_to_weights([0.7, 0.4])


# --- streams --------------------------------------------------------------------


def test_stream_identity_and_independence():
    a = RngStream(7, 3).generator().random(5)
    assert np.array_equal(a, RngStream(7, 3).generator().random(5))
    assert not np.array_equal(a, RngStream(7, 4).generator().random(5))
    assert not np.array_equal(a, RngStream(8, 3).generator().random(5))
    assert RngStream(7).child(1) != RngStream(7).child(2)
    assert RngStream(7).named("null") != RngStream(7).named("data")


def test_stream_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)


def test_map_replicates_thread_invariant():
    def draw(i, s):
        return float(s.generator().random())

    one = map_replicates(draw, 300, RngStream(5), threads=1)
    four = map_replicates(draw, 300, RngStream(5), threads=4, chunk_size=7)
    assert one == four


# --- CSV ------------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1.5,2\n-3,4e-3\n")
    assert read_sample_csv(str(p)).tolist() == [[1.5, 2.0], [-3.0, 0.004]]
    p.write_text("1,2\n3,4\n")
    assert read_sample_csv(str(p)).shape == (2, 2)


@pytest.mark.parametrize("body", ["a,b\n1,\n", "1,nan\n", "1,inf\n", "1,2\n3\n", "a,b\n"])
def test_csv_rejects_bad_cells(tmp_path, body):
    p = tmp_path / "x.csv"
    p.write_text(body)
    with pytest.raises(SampleError):
        read_sample_csv(str(p))


def test_write_rows_csv_comments():
    buf = io.StringIO()
    write_rows_csv(buf, ["x", "y"], [(1, 0.1)], ["seed 3"])
    assert buf.getvalue() == "# seed 3\nx,y\n1,0.1\n"
