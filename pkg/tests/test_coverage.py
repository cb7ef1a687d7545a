import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from aoisgd.coverage import (
    CoverageProblem,
    UniformXi,
    annulus_positions,
    detection_prob,
    disk_quadrature,
    error_prob,
    grad_objective_sample,
    grad_penalty,
    objective_sample,
    pentagon_targets,
    penalty,
    sample_unit_disk,
    xi_sample,
)
from aoisgd.errors import InvalidInput

FAR = np.array([[1e3, 1e3], [-1e3, 2e3]])


def fd_gradient(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# -- detection and error probability --------------------------------------------


def test_detection_examples():
    assert detection_prob([0.3, 0.2], [0.3, 0.2], 1.7) == 1.0
    assert math.isclose(detection_prob([1.0, 0.0], [0.0, 0.0], 1.0), math.exp(-1))
    assert detection_prob([1.0, 0.0], [0.0, 0.0], 1e6) == 0.0


def test_error_prob_examples():
    assert error_prob([[0.2, 0.1], [5.0, 5.0]], [0.2, 0.1], 1.0) == 0.0
    assert error_prob(FAR, [0.0, 0.0], 1.0) == 1.0
    pos = [[1.0, 0.0], [0.0, -1.0]]
    assert math.isclose(error_prob(pos, [0.0, 0.0], 1.0), (1 - math.exp(-1)) ** 2)
    assert abs((1 - math.exp(-1)) ** 2 - 0.3996) < 1e-4


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=6),
       st.tuples(st.floats(-1, 1), st.floats(-1, 1)), st.floats(0.1, 5),
       st.integers(0, 5), st.floats(1.0, 3.0))
def test_error_prob_monotone_in_distance(pos, y, xi, k, stretch):
    pos = np.array(pos)
    y = np.array(y)
    k = k % len(pos)
    base = error_prob(pos, y, xi)
    moved = pos.copy()
    moved[k] = y + stretch * (pos[k] - y)
    assert 0.0 <= base <= 1.0
    assert error_prob(moved, y, xi) >= base - 1e-15


# -- objective ------------------------------------------------------------------


def test_objective_all_far_is_exactly_one():
    pts = sample_unit_disk(100, np.random.default_rng(0))
    assert objective_sample(FAR, 1.0, pts) == 1.0


def test_objective_empty_samples_rejected():
    with pytest.raises(InvalidInput):
        objective_sample(FAR, 1.0, np.zeros((0, 2)))


def test_objective_single_agent_at_origin_matches_radial_quadrature():
    oracle, _ = integrate.quad(lambda r: 2 * r * (1 - math.exp(-r * r)), 0, 1)
    rng = np.random.default_rng(5)
    pts = sample_unit_disk(1_000_000, rng)
    vals = 1 - np.exp(-(pts ** 2).sum(axis=1))
    est = objective_sample(np.zeros((1, 2)), 1.0, pts)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(est - oracle) <= 3 * se
    assert math.isclose(oracle, math.exp(-1), rel_tol=1e-12)


def test_objective_with_rng_draws_fresh_samples():
    pos = np.array([[0.1, 0.2], [0.5, -0.3]])
    a = objective_sample(pos, 1.0, rng=np.random.default_rng(3), count=500)
    b = objective_sample(pos, 1.0, sample_unit_disk(500, np.random.default_rng(3)))
    assert a == b and 0.0 <= a <= 1.0


def test_objective_permutation_invariant():
    rng = np.random.default_rng(2)
    pos = rng.uniform(-1, 1, (6, 2))
    pts = sample_unit_disk(300, rng)
    perm = rng.permutation(6)
    assert math.isclose(objective_sample(pos, 1.2, pts), objective_sample(pos[perm], 1.2, pts),
                        rel_tol=1e-14)


def test_disk_quadrature_weights_and_accuracy():
    pts, w = disk_quadrature(12, 24)
    assert math.isclose(w.sum(), 1.0, rel_tol=1e-14)
    assert np.all(np.hypot(pts[:, 0], pts[:, 1]) <= 1.0)
    approx = w @ (1 - np.exp(-(pts ** 2).sum(axis=1)))
    assert abs(approx - math.exp(-1)) < 1e-12


# -- penalty --------------------------------------------------------------------


def test_penalty_examples():
    targets = pentagon_targets()
    assert penalty(targets + 0.0, 1.0, targets, 0.25) == 0.0
    # one agent at distance d from a single target with p_e = delta
    delta = 0.3
    d = math.sqrt(-math.log(1 - delta))
    assert abs(penalty([[d, 0.0]], 1.0, [[0.0, 0.0]], delta)) < 1e-28
    d = math.sqrt(-math.log(1 - (delta + 0.1)))
    assert math.isclose(penalty([[d, 0.0]], 1.0, [[0.0, 0.0]], delta), 0.01, rel_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=6),
       st.floats(0.2, 3), st.floats(0.05, 0.95))
def test_penalty_zero_exactly_on_feasible_set(pos, xi, delta):
    pos = np.array(pos)
    targets = pentagon_targets()
    worst = max(error_prob(pos, y, xi) for y in targets)
    assert (penalty(pos, xi, targets, delta) == 0.0) == (worst <= delta)


# -- gradients ------------------------------------------------------------------


def test_gradient_vanishes_for_agent_on_target():
    pos = np.array([[0.0, 0.6], [0.9, -0.4]])
    g = grad_penalty(pos, 1.0, [[0.0, 0.6]], 0.01)
    assert np.all(g[0] == 0.0)


def test_objective_gradient_vanishes_far_away():
    pts = sample_unit_disk(100, np.random.default_rng(0))
    assert np.linalg.norm(grad_objective_sample(FAR, 1.0, pts)) == 0.0


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(123)
    targets = pentagon_targets()
    for _ in range(25):
        D = int(rng.integers(1, 7))
        pos = rng.uniform(-1.5, 1.5, (D, 2))
        xi = rng.uniform(0.5, 1.5)
        pts = sample_unit_disk(64, rng)
        go = grad_objective_sample(pos, xi, pts)
        assert rel_err(go, fd_gradient(lambda x: objective_sample(x, xi, pts), pos)) <= 1e-5
        delta = rng.uniform(0.01, 0.5)
        gp = grad_penalty(pos, xi, targets, delta)
        fd = fd_gradient(lambda x: penalty(x, xi, targets, delta), pos)
        if np.linalg.norm(fd) > 1e-8:
            assert rel_err(gp, fd) <= 1e-5


# -- xi and problem -------------------------------------------------------------


def test_xi_sampling():
    rng = np.random.default_rng(6)
    assert all(xi_sample(UniformXi(1.0, 1.0), rng) == 1.0 for _ in range(10))
    draws = np.array([xi_sample(UniformXi(), rng) for _ in range(100_000)])
    assert abs(draws.mean() - 1.0) <= 0.01
    assert draws.min() >= 0.5 and draws.max() <= 1.5
    with pytest.raises(InvalidInput):
        UniformXi(0.0, 1.0)


def test_problem_validation_and_evaluation():
    with pytest.raises(InvalidInput):
        CoverageProblem(3, targets=[[2.0, 0.0]])
    with pytest.raises(InvalidInput):
        CoverageProblem(3, delta=1.0)
    prob = CoverageProblem(3)
    ev = prob.evaluate(FAR.tolist() + [[5e3, 0.0]])
    assert math.isclose(ev["objective"], 1.0) and ev["target_error"].shape == (5,)
    assert math.isclose(ev["penalty"], 5 * 0.75 ** 2)


def test_annulus_positions():
    pos = annulus_positions(200, 1.2, 2.0, seed=3)
    r = np.hypot(pos[:, 0], pos[:, 1])
    assert r.min() >= 1.2 and r.max() <= 2.0
    assert np.array_equal(pos, annulus_positions(200, 1.2, 2.0, seed=3))
