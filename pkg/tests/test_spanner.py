from itertools import combinations

import numpy as np
import pytest

from conduel.errors import StructuralError
from conduel.spanner import Spanner, build_spanner, spanner_coefficients, spanner_lambda_b


def unit_rows(a):
    a = np.asarray(a, dtype=float)
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def test_standard_basis_with_duplicates():
    feats = np.vstack([np.eye(3), np.eye(3)])
    s = build_spanner(feats)
    assert sorted(s.member_ids) == [0, 1, 2]
    assert abs(abs(np.linalg.det(s.basis)) - 1.0) < 1e-12


def test_coefficient_bound_small_instance():
    feats = unit_rows([[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
    s = build_spanner(feats, approx_factor=2.0)
    for x in feats:
        c = spanner_coefficients(s, x)
        assert np.all(np.abs(c) <= 2.0 + 1e-6)


def test_determinant_near_maximal_by_enumeration():
    # |det(basis)| >= |det(any d-subset)| / C^d on small instances
    rng = np.random.default_rng(0)
    for trial in range(5):
        k = int(rng.integers(6, 12))
        feats = unit_rows(rng.normal(size=(k, 3)))
        s = build_spanner(feats, approx_factor=2.0)
        got = abs(np.linalg.det(s.basis))
        best = max(
            abs(np.linalg.det(feats[list(idx)].T)) for idx in combinations(range(k), 3)
        )
        assert got >= best / 2.0 ** 3 - 1e-12


def test_rank_deficient_reports_rank():
    feats = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    with pytest.raises(StructuralError, match="rank 2 of 3"):
        build_spanner(feats)


def test_too_few_keyterms_rejected():
    with pytest.raises(StructuralError):
        build_spanner(np.eye(3)[:2])


def test_approx_factor_validated():
    with pytest.raises(StructuralError):
        build_spanner(np.eye(2), approx_factor=1.0)


def test_coefficients_of_members_are_indicators():
    rng = np.random.default_rng(1)
    feats = unit_rows(rng.normal(size=(9, 4)))
    s = build_spanner(feats)
    for slot, kid in enumerate(s.member_ids):
        c = spanner_coefficients(s, feats[kid])
        expect = np.zeros(4)
        expect[slot] = 1.0
        np.testing.assert_allclose(c, expect, atol=1e-9)
    # linearity: sum of two members
    c = spanner_coefficients(s, feats[s.member_ids[0]] + feats[s.member_ids[1]])
    expect = np.zeros(4)
    expect[[0, 1]] = 1.0
    np.testing.assert_allclose(c, expect, atol=1e-9)


def test_random_keyterm_coefficients_bounded():
    rng = np.random.default_rng(2)
    feats = unit_rows(rng.normal(size=(40, 5)))
    s = build_spanner(feats, approx_factor=2.0)
    for x in feats:
        assert np.all(np.abs(spanner_coefficients(s, x)) <= 2.0 + 1e-6)


def test_invariant_under_appended_convex_combinations():
    rng = np.random.default_rng(3)
    feats = unit_rows(rng.normal(size=(12, 3)))
    s1 = build_spanner(feats)
    lam = rng.dirichlet(np.ones(3), size=6)
    extra = lam @ feats[list(s1.member_ids)]
    s2 = build_spanner(np.vstack([feats, extra]))
    assert s1.member_ids == s2.member_ids


def test_lambda_b_standard_basis_oracle():
    # hand-oracle: enumerate the 4 ordered pairs for members {e1, e2}
    s = Spanner((0, 1), np.eye(2))
    cols = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    sigma = np.zeros((2, 2))
    for a in cols:
        for b in cols:
            sigma += np.outer(a - b, a - b)
    sigma /= 4.0
    np.testing.assert_allclose(sigma, np.array([[0.5, -0.5], [-0.5, 0.5]]))
    oracle = np.linalg.eigvalsh(sigma)[0]
    assert abs(spanner_lambda_b(s) - max(oracle, 0.0)) < 1e-12
    # pair differences of d points span d-1 dims, so the floor is 0 here
    assert spanner_lambda_b(s) <= 1e-12


def test_lambda_b_degenerate_single_direction():
    s = Spanner((0,), np.array([[0.8]]))
    assert spanner_lambda_b(s) == 0.0


def test_lambda_b_bounded_by_member_covariance():
    rng = np.random.default_rng(4)
    for _ in range(10):
        basis = rng.normal(size=(3, 3))
        s = Spanner((0, 1, 2), basis)
        cov = np.cov(basis.T, rowvar=False, bias=True)  # members are basis columns
        lam_max = np.linalg.eigvalsh(cov)[-1]
        assert spanner_lambda_b(s) <= 2.0 * lam_max + 1e-12
