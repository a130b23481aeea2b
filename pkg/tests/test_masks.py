import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from crossmpt.codes import bundled_codes, load_code
from crossmpt.masks import (AttentionMask, build_crossmpt_masks, build_ecct_mask, ecct_block_counts,
                            mask_density, mask_density_exact)

TREE = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)


def ecct_oracle(H):
    # pairwise enumeration of the depth-2 rule
    m, n = H.shape
    L = n + m
    A = np.zeros((L, L), dtype=bool)
    for i, j in itertools.product(range(n), repeat=2):
        A[i, j] = i == j or any(H[r, i] and H[r, j] for r in range(m))
    for i, r in itertools.product(range(n), range(m)):
        A[i, n + r] = A[n + r, i] = bool(H[r, i])
    for r in range(m):
        A[n + r, n + r] = True
    return A


def test_crossmpt_small():
    ms = build_crossmpt_masks(np.array([[1, 1]]))
    assert ms.m2s.shape == (2, 1) and ms.s2m.shape == (1, 2)
    assert (ms.m2s.additive == 0).all() and (ms.s2m.additive == 0).all()
    ms = build_crossmpt_masks(np.array([[1, 0]]))
    assert ms.m2s.additive[1, 0] == -np.inf
    assert ms.m2s.additive[0, 0] == 0


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 8)), elements=st.integers(0, 1)))
def test_crossmpt_transpose_and_density(H):
    ms = build_crossmpt_masks(H)
    assert np.array_equal(ms.m2s.additive, ms.s2m.additive.T)
    assert set(np.unique(ms.m2s.additive)) <= {0.0, -np.inf}
    m, n = H.shape
    assert mask_density(ms.m2s) == pytest.approx(H.sum() / (n * m))
    assert mask_density(ms) == pytest.approx(H.sum() / (n * m))


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 5), st.integers(1, 7)), elements=st.integers(0, 1)))
def test_ecct_matches_pairwise_oracle(H):
    mask = build_ecct_mask(H)
    assert np.array_equal(mask.allowed, ecct_oracle(H))
    assert np.array_equal(mask.allowed, mask.allowed.T)


def test_ecct_tree_counts():
    mask = build_ecct_mask(TREE)
    assert mask.shape == (5, 5)
    assert mask.unmasked_count == 17
    assert ecct_block_counts(mask, 3) == ecct_block_counts(mask, 3).__class__(mm=7, ms=4, sm=4, ss=2)
    assert mask_density(mask) == pytest.approx(0.68)


def test_ecct_all_ones():
    H = np.ones((3, 5), dtype=np.uint8)
    a = build_ecct_mask(H).allowed
    assert a[:5].all() and a[:, :5].all()
    assert np.array_equal(a[5:, 5:], np.eye(3, dtype=bool))


def test_ecct_ablation():
    a = build_ecct_mask(TREE, ablate_self_blocks=True).allowed
    assert np.array_equal(a[:3, :3], np.eye(3, dtype=bool))
    assert not a[3:, 3:].any()
    assert np.array_equal(a[:3, 3:], TREE.T.astype(bool))
    assert np.array_equal(a[3:, :3], TREE.astype(bool))


def test_density_edge_cases():
    assert mask_density(AttentionMask(np.zeros((3, 4), dtype=bool))) == 0.0
    assert mask_density_exact(build_ecct_mask(TREE)).denominator == 25


def test_index_list():
    ms = build_crossmpt_masks(TREE)
    idx = ms.s2m.index_list()
    assert idx.tolist() == [[0, 0], [0, 1], [1, 1], [1, 2]]


TABLE = {
    "bch_63_45": (32.45, 53.09),
    "ldpc_121_70": (9.09, 24.01),
    "ldpc_121_80": (9.09, 21.94),
    "turbo_132_40": (11.43, 14.25),
    "wran_384_320": (5.21, 13.25),
}


@pytest.mark.parametrize("name", sorted(TABLE))
def test_reference_densities(name):
    code = load_code(name)
    rho2 = round(100 * mask_density(build_crossmpt_masks(code.H)), 2)
    rho1 = round(100 * mask_density(build_ecct_mask(code.H)), 2)
    assert (rho2, rho1) == TABLE[name]


@pytest.mark.parametrize("name", bundled_codes())
def test_crossmpt_sparser_and_smaller(name):
    code = load_code(name)
    assert mask_density(build_crossmpt_masks(code.H)) < mask_density(build_ecct_mask(code.H))
    n, k = code.n, code.k
    assert 2 * n * (n - k) <= (2 * n - k) ** 2 / 2
