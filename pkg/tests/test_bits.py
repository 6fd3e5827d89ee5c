import numpy as np
from hypothesis import given, settings, strategies as st

from dagsampler._bits import (compress, expand, masks_by_size, members, n_parent_sets,
                              subset_logsumexp, to_mask, canonical_parent_sets, LINEAR_RANGE)


@given(st.integers(0, 2 ** 20 - 1))
def test_members_round_trip(mask):
    assert to_mask(members(mask)) == mask


@given(st.integers(1, 12), st.data())
def test_compress_expand_inverse(n, data):
    i = data.draw(st.integers(0, n - 1))
    mask = data.draw(st.integers(0, (1 << n) - 1)) & ~(1 << i)
    c = compress(mask, i)
    assert c < 1 << (n - 1)
    assert expand(c, i) == mask


def test_masks_by_size_partition():
    b = masks_by_size(5)
    assert sum(x.size for x in b) == 32
    for s, arr in enumerate(b):
        assert all(int(m).bit_count() == s for m in arr)


def test_parent_set_counts():
    assert n_parent_sets(5, 2) == 11
    assert canonical_parent_sets(5, 2, 2).size == 11
    assert canonical_parent_sets(1, 0, 3).tolist() == [0]


def _brute(logv):
    d = logv.size.bit_length() - 1
    out = np.empty_like(logv)
    for S in range(1 << d):
        sub = [logv[T] for T in range(1 << d) if T & ~S == 0]
        out[S] = np.logaddexp.reduce(sub)
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10_000), st.sampled_from([1.0, 50.0, 2 * LINEAR_RANGE]))
def test_subset_logsumexp_matches_brute_force(d, seed, spread):
    rng = np.random.default_rng(seed)
    logv = rng.uniform(-spread, 0, size=1 << d)
    logv[rng.random(1 << d) < 0.2] = -np.inf
    got = subset_logsumexp(logv)
    want = _brute(logv)
    fin = np.isfinite(want)
    assert np.array_equal(fin, np.isfinite(got))
    np.testing.assert_allclose(got[fin], want[fin], rtol=1e-12, atol=1e-12)


def test_subset_logsumexp_all_neg_inf():
    assert np.all(subset_logsumexp(np.full(8, -np.inf)) == -np.inf)
