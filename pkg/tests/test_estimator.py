import math

import numpy as np
import pytest

from conduel.errors import DomainError, NumericalError, StructuralError
from conduel.estimator import (
    ARM_LEVEL,
    KEYTERM_LEVEL,
    InteractionHistory,
    dueling_radius,
    log_likelihood,
    mean_map,
    mle_fit,
    project_theta,
    score,
)
from conduel.glm import DesignMatrix, get_link

SIG = get_link("sigmoid")


def history_from(diffs, outcomes, levels=None):
    diffs = np.asarray(diffs, dtype=float)
    h = InteractionHistory(diffs.shape[1])
    levels = levels if levels is not None else [ARM_LEVEL] * len(diffs)
    for d, o, lv in zip(diffs, outcomes, levels):
        h.append(d, int(o), lv)
    return h


def random_history(rng, d=2, n=30):
    theta_star = rng.normal(size=d)
    theta_star /= np.linalg.norm(theta_star)
    arms = rng.normal(size=(n, 2, d))
    arms /= np.linalg.norm(arms, axis=2, keepdims=True)
    diffs = arms[:, 0] - arms[:, 1]
    probs = 1.0 / (1.0 + np.exp(-diffs @ theta_star))
    outcomes = (rng.random(n) < probs).astype(int)
    levels = [ARM_LEVEL if i % 3 else KEYTERM_LEVEL for i in range(n)]
    return history_from(diffs, outcomes, levels), theta_star


def loglik_direct(diffs, outcomes, theta, lam):
    # straight-line evaluation of the dueling objective, kept independent
    z = diffs @ theta
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(outcomes @ z - softplus.sum() - 0.5 * lam * theta @ theta)


# ---------------------------------------------------------------- history


def test_history_validates_entries():
    h = InteractionHistory(2)
    with pytest.raises(StructuralError):
        h.append([3.0, 0.0], 1, ARM_LEVEL)  # norm > 2
    with pytest.raises(StructuralError):
        h.append([1.0, 0.0], 2, ARM_LEVEL)
    with pytest.raises(StructuralError):
        h.append([1.0], 1, ARM_LEVEL)
    with pytest.raises(StructuralError):
        h.append([1.0, 0.0], 1, 7)
    h.append([1.0, 0.0], 1, ARM_LEVEL)
    h.append([0.0, 1.0], 0, KEYTERM_LEVEL)
    assert len(h) == 2
    assert h.count(ARM_LEVEL) == 1 and h.count(KEYTERM_LEVEL) == 1


def test_history_buffers_grow():
    h = InteractionHistory(3, capacity=2)
    for i in range(200):
        h.append(np.eye(3)[i % 3], i % 2, ARM_LEVEL)
    assert len(h) == 200
    np.testing.assert_array_equal(h.diffs[0], [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(h.diffs[199], [0.0, 1.0, 0.0])


# ---------------------------------------------------------------- likelihood


def test_log_likelihood_empty_is_zero():
    h = InteractionHistory(3)
    assert log_likelihood(h, np.zeros(3), 1.0, SIG) == 0.0


def test_log_likelihood_single_observation_hand_value():
    h = history_from([[1.0, 0.0]], [1])
    # o z - m(z) - reg at theta = 0: 0 - log 2 - 0
    assert abs(log_likelihood(h, np.zeros(2), 1.0, SIG) + math.log(2.0)) < 1e-12


def test_log_likelihood_concave_midpoint():
    rng = np.random.default_rng(0)
    h, _ = random_history(rng, d=3, n=25)
    for _ in range(25):
        t1, t2 = rng.normal(size=3), rng.normal(size=3)
        mid = 0.5 * (t1 + t2)
        lhs = log_likelihood(h, mid, 1.0, SIG)
        rhs = 0.5 * (log_likelihood(h, t1, 1.0, SIG) + log_likelihood(h, t2, 1.0, SIG))
        assert lhs >= rhs - 1e-10


def test_log_likelihood_rejects_bad_lam():
    h = InteractionHistory(2)
    with pytest.raises(DomainError):
        log_likelihood(h, np.zeros(2), 0.0, SIG)


# ---------------------------------------------------------------- score / mean map


def test_score_empty_is_ridge_pull():
    h = InteractionHistory(2)
    theta = np.array([0.4, -0.2])
    np.testing.assert_allclose(score(h, theta, 2.0, SIG), -2.0 * theta)


def test_score_matches_finite_differences():
    rng = np.random.default_rng(1)
    h, _ = random_history(rng, d=3, n=20)
    for _ in range(10):
        theta = rng.normal(size=3)
        s = score(h, theta, 1.0, SIG)
        num = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            num[i] = (
                log_likelihood(h, theta + e, 1.0, SIG)
                - log_likelihood(h, theta - e, 1.0, SIG)
            ) / 2e-6
        np.testing.assert_allclose(s, num, atol=1e-5)


def test_score_zero_at_fit():
    rng = np.random.default_rng(2)
    h, _ = random_history(rng, d=2, n=30)
    est = mle_fit(h, 1.0, SIG)
    assert np.linalg.norm(score(h, est.theta_raw, 1.0, SIG)) <= 1e-8


def test_mean_map_empty_and_fit_identity():
    h = InteractionHistory(2)
    theta = np.array([1.0, -1.0])
    np.testing.assert_allclose(mean_map(h, theta, 1.5, SIG), 1.5 * theta)

    rng = np.random.default_rng(3)
    h, _ = random_history(rng, d=2, n=30)
    est = mle_fit(h, 1.0, SIG)
    # at the fit, g(theta) equals the outcome-weighted sum of differences
    lhs = mean_map(h, est.theta_raw, 1.0, SIG)
    rhs = h.diffs.T @ h.outcomes
    np.testing.assert_allclose(lhs, rhs, atol=1e-7)


def test_mean_map_strong_monotonicity():
    rng = np.random.default_rng(4)
    h, _ = random_history(rng, d=3, n=15)
    kappa1 = SIG.kappa1
    lam = 1.0
    m = lam / kappa1 * np.eye(3)
    for row in h.diffs:
        m = m + np.outer(row, row)
    for _ in range(20):
        t1 = rng.normal(size=3)
        t1 /= max(np.linalg.norm(t1), 1.0)
        t2 = rng.normal(size=3)
        t2 /= max(np.linalg.norm(t2), 1.0)
        delta = t1 - t2
        lhs = float((mean_map(h, t1, lam, SIG) - mean_map(h, t2, lam, SIG)) @ delta)
        rhs = kappa1 * float(delta @ m @ delta)
        assert lhs >= rhs - 1e-9


# ---------------------------------------------------------------- mle_fit


def test_mle_fit_empty_history_returns_zero():
    h = InteractionHistory(4)
    est = mle_fit(h, 1.0, SIG)
    np.testing.assert_array_equal(est.theta_raw, np.zeros(4))
    assert not est.projected and est.newton_iters == 0


def test_mle_fit_balanced_mirror_data_gives_zero():
    diffs, outcomes = [], []
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = rng.normal(size=2)
        d *= 1.5 / np.linalg.norm(d)
        diffs += [d, d]
        outcomes += [1, 0]
    h = history_from(diffs, outcomes)
    est = mle_fit(h, 1.0, SIG)
    np.testing.assert_array_equal(est.theta_raw, np.zeros(2))


def grid_search_mle(diffs, outcomes, lam, lo=-1.5, hi=1.5):
    """Concave-objective grid maximizer refined to resolution 1e-3."""
    center = np.zeros(2)
    half = hi - lo  # first window spans the whole box
    best = None
    for res in (0.05, 0.005, 0.001):
        lo1 = np.maximum(center - half, lo)
        hi1 = np.minimum(center + half, hi)
        g1 = np.arange(lo1[0], hi1[0] + res / 2, res)
        g2 = np.arange(lo1[1], hi1[1] + res / 2, res)
        t1, t2 = np.meshgrid(g1, g2, indexing="ij")
        grid = np.column_stack([t1.ravel(), t2.ravel()])
        z = grid @ diffs.T
        softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        vals = z @ outcomes - softplus.sum(axis=1) - 0.5 * lam * (grid ** 2).sum(axis=1)
        best = grid[int(np.argmax(vals))]
        center, half = best, 3 * res  # concavity keeps the optimum in this window
    return best


def test_mle_fit_matches_grid_search():
    rng = np.random.default_rng(6)
    for trial in range(5):
        h, _ = random_history(rng, d=2, n=40)
        est = mle_fit(h, 1.0, SIG)
        grid = grid_search_mle(h.diffs, h.outcomes, 1.0)
        assert np.linalg.norm(est.theta_raw - grid) <= 2e-3


def test_mle_fit_warm_start_agrees():
    rng = np.random.default_rng(7)
    h, _ = random_history(rng, d=3, n=30)
    cold = mle_fit(h, 1.0, SIG)
    warm = mle_fit(h, 1.0, SIG, theta0=rng.normal(size=3))
    np.testing.assert_allclose(cold.theta_raw, warm.theta_raw, atol=1e-7)


def test_mle_fit_objective_never_below_start():
    rng = np.random.default_rng(8)
    for _ in range(10):
        h, _ = random_history(rng, d=3, n=20)
        est = mle_fit(h, 1.0, SIG)
        assert log_likelihood(h, est.theta_raw, 1.0, SIG) >= log_likelihood(
            h, np.zeros(3), 1.0, SIG
        )


def test_mle_fit_nonconvergence_raises():
    rng = np.random.default_rng(9)
    h, _ = random_history(rng, d=2, n=30)
    with pytest.raises(NumericalError):
        mle_fit(h, 1.0, SIG, tol=1e-14, max_iters=1)


# ---------------------------------------------------------------- projection


def test_projection_feasible_start_returned_unchanged():
    h = InteractionHistory(2)
    design = DesignMatrix(2, 1.0)
    t = np.array([0.6, 0.8])
    np.testing.assert_array_equal(project_theta(t, h, 1.0, SIG, design), t)


def test_projection_empty_history_is_radial_shrink():
    h = InteractionHistory(3)
    design = DesignMatrix(3, 1.0 / SIG.kappa1)
    raw = np.array([1.2, -0.9, 0.3])
    got = project_theta(raw, h, 1.0, SIG, design)
    np.testing.assert_allclose(got, raw / np.linalg.norm(raw), atol=1e-12)


def test_projection_matches_angular_grid():
    rng = np.random.default_rng(10)
    h, _ = random_history(rng, d=2, n=10)
    lam = 1.0
    design = DesignMatrix(2, lam / SIG.kappa1)
    for row in h.diffs:
        design.update(row)
    raw = np.array([1.3, 1.1])
    got = project_theta(raw, h, lam, SIG, design)
    assert np.linalg.norm(got) <= 1.0 + 1e-12

    minv = np.linalg.inv(design.m)

    def objective(th):
        z_r = h.diffs @ raw
        z_t = h.diffs @ th
        g_t = h.diffs.T @ (1 / (1 + np.exp(-z_t))) + lam * th
        g_r = h.diffs.T @ (1 / (1 + np.exp(-z_r))) + lam * raw
        r = g_t - g_r
        return float(r @ minv @ r)

    angles = np.linspace(0.0, 2.0 * np.pi, 10_000, endpoint=False)
    grid_best = min(objective(np.array([np.cos(a), np.sin(a)])) for a in angles)
    assert abs(objective(got) - grid_best) <= 1e-6


def test_projection_output_always_feasible():
    rng = np.random.default_rng(11)
    for _ in range(10):
        h, _ = random_history(rng, d=3, n=12)
        design = DesignMatrix(3, 1.0 / SIG.kappa1)
        for row in h.diffs:
            design.update(row)
        raw = rng.normal(size=3) * 2.0
        if np.linalg.norm(raw) <= 1.0:
            raw *= 3.0
        got = project_theta(raw, h, 1.0, SIG, design)
        assert np.linalg.norm(got) <= 1.0 + 1e-9


# ---------------------------------------------------------------- radius


def test_radius_monotone_in_round():
    vals = [dueling_radius(t, 0.0, 10, 1.0, 0.105) for t in range(1, 101)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_radius_hand_evaluation():
    t, b, d, lam, kappa1, r, delta = 1, 0.0, 10, 1.0, 0.105, 0.5, 0.1
    expect = (2.0 / kappa1) * (
        r * math.sqrt(d * math.log((1.0 + 4.0 * kappa1 * (t + b) / (d * lam)) / delta))
        + math.sqrt(lam * kappa1)
    )
    assert abs(dueling_radius(t, b, d, lam, kappa1) - expect) < 1e-12


def test_radius_kappa1_scaling_direct():
    for kappa1 in (0.105, 0.21):
        got = dueling_radius(50, 5.0, 4, 1.0, kappa1)
        expect = (2.0 / kappa1) * (
            0.5 * math.sqrt(4 * math.log((1.0 + 4.0 * kappa1 * 55.0 / 4.0) / 0.1))
            + math.sqrt(kappa1)
        )
        assert abs(got - expect) < 1e-12


def test_radius_domain_errors():
    with pytest.raises(DomainError):
        dueling_radius(0, 0.0, 10, 1.0, 0.1)
    with pytest.raises(DomainError):
        dueling_radius(1, 0.0, 10, 1.0, 0.1, delta=1.5)
    with pytest.raises(DomainError):
        dueling_radius(1, -1.0, 10, 1.0, 0.1)


# ---------------------------------------------------------------- consistency


def _fit_error(seed, n):
    rng = np.random.default_rng(seed)
    theta_star = rng.normal(size=5)
    theta_star /= np.linalg.norm(theta_star)
    arms = rng.normal(size=(n, 2, 5))
    arms /= np.linalg.norm(arms, axis=2, keepdims=True)
    diffs = arms[:, 0] - arms[:, 1]
    probs = 1.0 / (1.0 + np.exp(-diffs @ theta_star))
    outcomes = (rng.random(n) < probs).astype(int)
    h = history_from(diffs, outcomes)
    est = mle_fit(h, 1.0, SIG)
    return float(np.linalg.norm(est.theta_proj - theta_star))


@pytest.mark.xfail(
    strict=False,
    reason="information floor: 2000 duels with ||diff|| <= 2 and slope <= 1/4 "
    "cannot place the estimate within 0.1 of a unit preference vector in 9 of "
    "10 seeds for any sampling design",
)
def test_consistency_tight_threshold():
    errs = [_fit_error(seed, 2000) for seed in range(10)]
    assert sum(e <= 0.1 for e in errs) >= 9


def test_consistency_attainable_scale():
    errs_small = [_fit_error(seed, 250) for seed in range(10)]
    errs_large = [_fit_error(seed, 2000) for seed in range(10)]
    assert sum(e <= 0.3 for e in errs_large) >= 9
    assert np.median(errs_large) < np.median(errs_small)
