import numpy as np
import pytest

from esgt.errors import DimensionMismatch, MaxIterations, NoAnalyticGradient
from esgt.problem import (
    LocalCost,
    Problem,
    personalized_cost,
    personalized_instance,
    quadratic_cost,
    quadratic_instance,
    solve_centralized,
    source_centers,
    source_seeking_instance,
)


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_forced_one_dim_instance():
    c = personalized_cost([[1.0]], [0.0], [1.0], [0.0])
    for w in (-2.0, 0.0, 0.5, 3.0):
        assert c(np.array([w])) == pytest.approx(w * w, abs=1e-15)
    w = solve_centralized(Problem((c,)), tol=1e-12)
    assert abs(w[0]) <= 1e-12


def test_logsumexp_gradient_at_zero():
    # pure logsumexp part: Q = 0, r = 0, a = 1
    b = np.array([0.3, -0.7, 0.9, 0.1])
    n = len(b)
    c = personalized_cost(np.zeros((n, n)), np.zeros(n), np.ones(n), b)
    np.testing.assert_allclose(c.grad(np.zeros(n)), b / n, atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("family", ["personalized", "quadratic"])
def test_gradients_match_finite_differences(seed, family):
    make = personalized_instance if family == "personalized" else quadratic_instance
    prob = make(4, 3, seed)
    rng = np.random.default_rng(seed)
    for cost in prob.costs:
        for _ in range(20):
            x = rng.uniform(-2, 2, 3)
            g = cost.grad(x)
            fd = central_diff(cost, x)
            assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("seed", range(5))
def test_strong_convexity_probe(seed):
    prob = personalized_instance(5, 3, seed)
    rng = np.random.default_rng(100 + seed)
    for _ in range(20):
        w1, w2 = rng.uniform(-5, 5, (2, 3))
        assert (w1 - w2) @ (prob.total_grad(w1) - prob.total_grad(w2)) > 0


def test_personalized_draws_ranges():
    prob = personalized_instance(3, 2, seed=0)
    for c in prob.costs:
        assert np.isfinite(c(np.array([50.0, -50.0])))


def test_source_seeking_tiny_sigma():
    prob = source_seeking_instance(5, [1.0, -2.0], 1e-12, seed=4)
    np.testing.assert_allclose(source_centers(prob), np.tile([1.0, -2.0], (5, 1)), atol=1e-4)
    np.testing.assert_allclose(solve_centralized(prob), [1.0, -2.0], atol=1e-4)


def test_source_seeking_forced_centroid():
    prob = Problem((quadratic_cost(np.eye(2), [0.0, 0.0]), quadratic_cost(np.eye(2), [-4.0, 0.0], 4.0)))
    # ||w||^2 and ||w - (2,0)||^2
    np.testing.assert_allclose(solve_centralized(prob, tol=1e-12), [1.0, 0.0], atol=1e-12)


def test_source_seeking_zero_at_center():
    prob = source_seeking_instance(4, [0.0, 0.0], 0.5, seed=1)
    for c, center in zip(prob.costs, source_centers(prob)):
        assert c(center) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_source_seeking_solution_is_centroid(seed):
    prob = source_seeking_instance(6, [2.0, 3.0], 0.5, seed)
    np.testing.assert_allclose(solve_centralized(prob, tol=1e-10), source_centers(prob).mean(0), atol=1e-10)


def test_solve_simple_quadratics():
    prob = Problem((quadratic_cost(np.eye(3)),))
    assert np.linalg.norm(solve_centralized(prob, tol=1e-10)) <= 1e-10
    w = solve_centralized(Problem((quadratic_cost([[1.0]], [1.0]),)), tol=1e-12)
    assert w[0] == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_solve_stationary(seed):
    prob = personalized_instance(6, 4, seed)
    w = solve_centralized(prob, tol=1e-10)
    assert np.linalg.norm(prob.total_grad(w)) <= 1e-10


def test_solve_errors():
    prob = Problem((LocalCost(1, lambda w: float(w @ w)),))
    with pytest.raises(NoAnalyticGradient):
        solve_centralized(prob)
    with pytest.raises(MaxIterations):
        solve_centralized(personalized_instance(3, 3, 0), tol=1e-14, max_iter=3)


def test_problem_dimension_check():
    with pytest.raises(DimensionMismatch):
        Problem((quadratic_cost(np.eye(2)), quadratic_cost(np.eye(3))))
    with pytest.raises(ValueError):
        Problem(())


@pytest.mark.parametrize(
    "prob",
    [personalized_instance(3, 2, 11), quadratic_instance(4, 3, 2), source_seeking_instance(5, [1.0, 2.0], 0.5, 7)],
    ids=["personalized", "quadratic", "source_seeking"],
)
def test_text_round_trip(prob):
    text = prob.to_text()
    assert text.startswith(f"kind={prob.kind}\n")
    again = Problem.from_text(text)
    x = np.linspace(-1, 1, prob.dim)
    assert [c(x) for c in again.costs] == [c(x) for c in prob.costs]


def test_custom_not_serializable():
    with pytest.raises(ValueError):
        Problem((quadratic_cost(np.eye(1)),)).to_text()
