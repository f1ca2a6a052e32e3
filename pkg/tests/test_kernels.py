import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostaction import _kernels_py, kernels

compiled = kernels.BACKENDS.get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")

codes = st.lists(st.integers(0, 2 ** 20 - 1), min_size=1, max_size=40)


def test_backend_switch_round_trips():
    before = kernels.BACKEND
    kernels.use("python")
    assert kernels.max_xor_bitlen is _kernels_py.max_xor_bitlen
    kernels.use(before)
    with pytest.raises(ValueError):
        kernels.use("fortran")


@settings(max_examples=100, deadline=None)
@given(codes, st.randoms())
def test_max_xor_bitlen_matches_python_ints(xs, rnd):
    a = np.array(xs, dtype=np.int64)
    b = a.copy()
    rnd.shuffle(b)
    want = max((int(x) ^ int(y)).bit_length() for x, y in zip(a, b))
    assert _kernels_py.max_xor_bitlen(a, b) == want
    if compiled is not None:
        assert compiled.max_xor_bitlen(a, b) == want


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2 ** 12 - 1), min_size=1, max_size=30, unique=True), st.randoms())
def test_greedy_match_agrees(xs, rnd):
    src = np.array(xs, dtype=np.int64)
    dst = src ^ np.array([rnd.randrange(4) for _ in xs], dtype=np.int64)
    a = _kernels_py.greedy_match(src, dst)
    b = compiled.greedy_match(src, dst)
    assert np.array_equal(a, b)
    assert sorted(a.tolist()) == list(range(len(xs)))


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_cell_map_and_trace_search_agree(c, seed):
    rng = np.random.default_rng(seed)
    cells = rng.integers(0, 1 << c, size=12)
    img = rng.integers(0, 1 << c, size=1 << c)[cells]
    a, ok_a = _kernels_py.cell_map(cells, img, 1 << c)
    b, ok_b = compiled.cell_map(cells, img, 1 << c)
    assert ok_a and ok_b and np.array_equal(a, b)

    depth, d = 8, 2
    perms = np.stack([rng.permutation(1 << d) for _ in range(3)]).astype(np.int64)
    anchors = rng.integers(0, 1 << depth, size=10).astype(np.int64)
    xs = rng.integers(0, 1 << depth, size=3).astype(np.int64)
    for threshold in range(depth + 1):
        assert (_kernels_py.trace_search(anchors, perms, xs, depth - d, threshold)
                == compiled.trace_search(anchors, perms, xs, depth - d, threshold))


def test_cell_map_flags_inconsistency(backend):
    m, ok = kernels.cell_map(np.array([0, 0, 1]), np.array([2, 3, 1]), 4)
    assert not ok
    m, ok = kernels.cell_map(np.array([0, 0, 1]), np.array([2, 2, 1]), 4)
    assert ok and m.tolist() == [2, 1, -1, -1]
