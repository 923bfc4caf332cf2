import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from pcptensor.tensor_core import (
    hadamard,
    hdivide,
    hpower,
    khatri_rao,
    matricize,
    matricize_pair,
    tvc_all_but_one,
    tvc_all_but_two,
    unmatricize,
    unvec,
    vec,
)

dims_st = st.lists(st.integers(1, 4), min_size=2, max_size=4).map(tuple)


def test_vec_is_first_index_fastest():
    t = np.arange(6).reshape(2, 3, order="F")
    assert t[1, 0] == 1
    np.testing.assert_array_equal(vec(t), np.arange(6))
    np.testing.assert_array_equal(vec(t), oracles.natural_vec(t))


def test_unvec_rejects_bad_length():
    with pytest.raises(ValueError, match="does not match"):
        unvec(np.arange(5), (2, 3))


def test_matricize_small_example():
    # 2x2x2 tensor with entries 1..8 in natural order
    t = unvec(np.arange(1, 9), (2, 2, 2))
    np.testing.assert_array_equal(matricize(t, 0), [[1, 3, 5, 7], [2, 4, 6, 8]])
    np.testing.assert_array_equal(matricize(t, 1), [[1, 2, 5, 6], [3, 4, 7, 8]])
    np.testing.assert_array_equal(matricize(t, 2), [[1, 2, 3, 4], [5, 6, 7, 8]])


@settings(max_examples=40, deadline=None)
@given(dims=dims_st, data=st.data())
def test_matricize_matches_loop_and_roundtrips(dims, data):
    t = data.draw(arrays(float, dims, elements=st.floats(-5, 5)))
    for p in range(len(dims)):
        mat = matricize(t, p)
        np.testing.assert_array_equal(mat, oracles.matricize(t, p))
        np.testing.assert_array_equal(unmatricize(mat, p, dims), t)


def test_matricize_pair_rows_run_first_mode_fastest(rng):
    t = rng.normal(size=(2, 3, 4, 2))
    mp = matricize_pair(t, 1, 2)
    # row j_k + N_k * j_l, columns over modes 0 and 3 in natural order
    for jk in range(3):
        for jl in range(4):
            row = mp[jk + 3 * jl]
            np.testing.assert_array_equal(row, vec(t[:, jk, jl, :]))


def test_khatri_rao_matches_kron_columns(rng):
    mats = [rng.normal(size=(n, 3)) for n in (2, 3, 4)]
    np.testing.assert_allclose(khatri_rao(mats), oracles.khatri_rao_desc(mats), rtol=1e-14)
    np.testing.assert_allclose(
        khatri_rao(mats, skip={1}), oracles.khatri_rao_desc([mats[0], mats[2]]), rtol=1e-14
    )


def test_khatri_rao_rejects_rank_mismatch():
    with pytest.raises(ValueError, match="column count"):
        khatri_rao([np.ones((2, 2)), np.ones((3, 3))])


@settings(max_examples=30, deadline=None)
@given(dims=st.lists(st.integers(1, 4), min_size=3, max_size=4).map(tuple), seed=st.integers(0, 2**16))
def test_contractions_match_loops(dims, seed):
    rng = np.random.default_rng(seed)
    t = rng.normal(size=dims)
    vecs = [rng.normal(size=n) for n in dims]
    P = len(dims)
    for k in range(P):
        np.testing.assert_allclose(
            tvc_all_but_one(t, vecs, k), oracles.tvc(t, vecs, {k}), rtol=1e-12, atol=1e-12
        )
        for l in range(P):
            if l == k:
                continue
            got = tvc_all_but_two(t, vecs, k, l)
            ref = oracles.tvc(t, vecs, {k, l})
            ref = ref if k < l else ref.T
            np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_contraction_accepts_short_vector_list(rng):
    t = rng.normal(size=(2, 3, 4))
    full = [rng.normal(size=n) for n in (2, 3, 4)]
    np.testing.assert_allclose(
        tvc_all_but_one(t, [full[0], full[2]], 1), tvc_all_but_one(t, full, 1)
    )


def test_contraction_shape_errors(rng):
    t = rng.normal(size=(2, 3, 4))
    with pytest.raises(ValueError):
        tvc_all_but_one(t, [np.ones(3), np.ones(4)], 1)
    with pytest.raises(ValueError):
        tvc_all_but_two(t, [np.ones(2), np.ones(3), np.ones(4)], 1, 1)
    with pytest.raises(ValueError):
        tvc_all_but_two(np.ones((2, 2)), [], 0, 1)


def test_elementwise_ops(rng):
    a, b = rng.uniform(1, 2, size=(2, 3)), rng.uniform(1, 2, size=(2, 3))
    np.testing.assert_array_equal(hadamard(a, b), a * b)
    np.testing.assert_array_equal(hdivide(a, b), a / b)
    np.testing.assert_array_equal(hpower(a, 2), a**2)
    with pytest.raises(ValueError, match="shape"):
        hadamard(a, b.T)


def test_hdivide_names_zero_position():
    b = np.ones((2, 3))
    b[1, 1] = 0.0  # natural index 1 + 2*1 = 3
    with pytest.raises(ZeroDivisionError, match="flat index 3"):
        hdivide(np.ones((2, 3)), b)
