import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcube import kernels
from starcube.kernels import fallback

IMPLS = [fallback]
if kernels.HAVE_NATIVE:
    from starcube.kernels import _native

    IMPLS.append(_native)


def _dict_oracle(keys, values):
    out = {}
    for k, v in zip(keys.tolist(), values.tolist()):
        s, c = out.get(k, (0, 0))
        out[k] = (s + v, c + 1)
    return out


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@pytest.mark.parametrize("bound", [64, 10**9])  # dense and hashed paths
def test_sum_by_key_matches_dict_oracle(impl, bound):
    rng = np.random.default_rng(3)
    keys = rng.integers(0, 60, 5_000).astype(np.int64)
    values = rng.integers(-10**12, 10**12, 5_000).astype(np.int64)
    uniq, sums, counts = impl.sum_by_key(keys, values, bound)
    oracle = _dict_oracle(keys, values)
    assert uniq.tolist() == sorted(oracle)
    for k, s, c in zip(uniq.tolist(), sums.tolist(), counts.tolist()):
        assert oracle[k] == (s, c)


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_sum2_by_key_sums_both_columns(impl):
    keys = np.array([5, 1, 5, 1, 3], dtype=np.int64)
    a = np.array([10, 20, 30, 40, 50], dtype=np.int64)
    b = np.array([1, 1, 1, 1, 1], dtype=np.int64)
    uniq, sa, sb = impl.sum2_by_key(keys, a, b, 6)
    assert uniq.tolist() == [1, 3, 5]
    assert sa.tolist() == [60, 50, 40]
    assert sb.tolist() == [2, 1, 2]


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_empty_input(impl):
    empty = np.empty(0, dtype=np.int64)
    uniq, sums, counts = impl.sum_by_key(empty, empty, 10)
    assert uniq.size == sums.size == counts.size == 0


@pytest.mark.skipif(not kernels.HAVE_NATIVE, reason="compiled extension not built")
@given(
    data=st.lists(
        st.tuples(st.integers(0, 500), st.integers(-10**9, 10**9)),
        max_size=300,
    ),
    dense=st.booleans(),
)
def test_native_equals_fallback(data, dense):
    keys = np.array([k for k, _ in data], dtype=np.int64)
    values = np.array([v for _, v in data], dtype=np.int64)
    bound = 501 if dense else 10**9
    n_u, n_s, n_c = _native.sum_by_key(keys, values, bound)
    f_u, f_s, f_c = fallback.sum_by_key(keys, values, bound)
    assert n_u.tolist() == f_u.tolist()
    assert n_s.tolist() == f_s.tolist()
    assert n_c.tolist() == f_c.tolist()


@given(
    codes=st.lists(
        st.tuples(st.integers(0, 4), st.integers(0, 6), st.integers(0, 2)),
        max_size=200,
    )
)
def test_pack_unpack_round_trip(codes):
    radices = [5, 7, 3]
    columns = [
        np.array([c[i] for c in codes], dtype=np.int32) for i in range(3)
    ]
    keys, bound = kernels.pack_codes(columns, radices)
    assert bound == 105
    back = kernels.unpack_codes(keys, radices)
    for original, restored in zip(columns, back):
        assert original.tolist() == restored.tolist()


def test_pack_codes_is_lexicographic():
    columns = [
        np.array([0, 0, 1, 1], dtype=np.int32),
        np.array([0, 1, 0, 1], dtype=np.int32),
    ]
    keys, _ = kernels.pack_codes(columns, [2, 2])
    assert keys.tolist() == sorted(keys.tolist())


def test_pack_codes_overflow_guard():
    columns = [np.zeros(1, dtype=np.int32)] * 8
    with pytest.raises(OverflowError):
        kernels.pack_codes(columns, [10**9] * 8)


def test_selector_reports_active_implementation():
    assert kernels.ACTIVE in ("native", "fallback")
    if kernels.HAVE_NATIVE:
        assert kernels.ACTIVE == "native"
