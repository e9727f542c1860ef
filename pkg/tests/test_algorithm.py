from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from esgt.algorithm import AlgorithmParams, esgt_emit, esgt_init, esgt_round, run
from esgt.dither import design_dither, paper_recipe_periods
from esgt.errors import NonFinite
from esgt.graph import erdos_renyi_connected
from esgt.problem import LocalCost, Problem, personalized_instance, quadratic_cost


def xz_oracle(problem, graph, dithers, gamma, w0, rounds):
    """
    Stacked recursion in dither-free coordinates x = w - delta d, z = s - gamma F,
    with F_i = (2/delta_i) f_i(x_i + delta_i d_i) d_i:

        x+ = A x - gamma (z + gamma F),   z+ = A z + gamma (A - I) F,   z0 = 0.

    Returns the trajectory of x.
    """
    A = graph.weights
    N = problem.n_agents
    delta = np.array([d.delta for d in dithers])[:, None]
    D = lambda t: np.array([d.sample(t) for d in dithers])
    x = np.asarray(w0, float) - delta * D(0)
    z = np.zeros_like(x)
    xs = [x]
    for t in range(rounds):
        Dt = D(t)
        W = x + delta * Dt
        F = np.array([2.0 / delta[i, 0] * problem.costs[i](W[i]) * Dt[i] for i in range(N)])
        x, z = A @ x - gamma * (z + gamma * F), A @ z + gamma * (A - np.eye(N)) @ F
        xs.append(x)
    return xs


def esgt_x(states, dithers):
    return np.array([st.w - d.delta * d.sample(st.t) for st, d in zip(states, dithers)])


def test_init_example():
    prob = Problem((quadratic_cost([[2.0]]), quadratic_cost([[2.0]], [-2.0], 1.0)))  # w^2, (w-1)^2
    d = design_dither(1, [4], np.pi / 2, 0.5)  # d(0) = 1
    params = AlgorithmParams(0.1, (0.5, 0.5), 1)
    states = esgt_init(prob, params, [[0.0], [1.0]], [d, d])
    assert states[0].s[0] == 0.0
    # (2*0.1/0.5) * f_2(1) * 1 = 0 too; use w0 = 0 for the second agent instead
    states = esgt_init(prob, params, [[0.0], [0.0]], [d, d])
    assert states[1].s[0] == pytest.approx(2 * 0.1 / 0.5 * 1.0 * 1.0)


def test_message_is_shifted():
    d = design_dither(2, [4], 0.0, 0.3)
    prob = Problem((quadratic_cost(np.eye(2)),))
    st = esgt_init(prob, AlgorithmParams(0.1, (0.3,), 1), [[1.0, 2.0]], [d])[0]
    msg = esgt_emit(0, st, d)
    np.testing.assert_allclose(msg.shifted_decision, st.w - 0.3 * d.sample(0))


@pytest.mark.parametrize("seed", range(4))
def test_matches_xz_oracle(seed):
    rng = np.random.default_rng(seed)
    N, n = 5, 3
    graph = erdos_renyi_connected(N, 0.4, seed)
    prob = personalized_instance(N, n, seed)
    dithers = [design_dither(n, paper_recipe_periods(n), float(rng.uniform(0, 6)), float(rng.uniform(0.05, 0.3))) for _ in range(N)]
    w0 = rng.uniform(-1, 1, (N, n))
    params = AlgorithmParams.for_dithers(0.05, dithers, 200)
    xs = xz_oracle(prob, graph, dithers, 0.05, w0, 200)
    states = esgt_init(prob, params, w0, dithers)
    for t in range(200):
        states = esgt_round(states, graph, dithers, params, prob)
        if t % 40 == 39:
            np.testing.assert_allclose(esgt_x(states, dithers), xs[t + 1], rtol=0, atol=1e-10)


def test_single_agent_square():
    # N = 1, f = w^2: decay follows the oracle; effective step is gamma^2 per round
    prob = Problem((LocalCost(1, lambda w: float(w[0] ** 2), lambda w: 2 * w),))
    graph = erdos_renyi_connected(1, 0.5, 0)
    d = design_dither(1, [6], 0.0, 0.1)
    R = 50 * d.period
    rec = run("esgt", prob, graph, AlgorithmParams(0.05, (0.1,), R), [d], [[1.0]], probe_every=R, w_star=[0.0])
    x_end = esgt_x(rec.final_states, [d])[0, 0]
    assert x_end == pytest.approx(xz_oracle(prob, graph, [d], 0.05, [[1.0]], R)[-1][0, 0], abs=1e-12)
    assert 0.0 < abs(x_end) < 0.25  # (1 - 2 gamma^2)^R ~ 0.22


def test_gamma_zero_freezes_x():
    prob = Problem((quadratic_cost(np.eye(2)),))
    d = design_dither(2, [6], 0.0, 0.2)
    graph = erdos_renyi_connected(1, 0.5, 0)
    params = AlgorithmParams(0.0, (0.2,), 30)
    states = esgt_init(prob, params, [[1.0, -1.0]], [d])
    x0 = esgt_x(states, [d])
    for _ in range(30):
        states = esgt_round(states, graph, [d], params, prob)
        np.testing.assert_allclose(esgt_x(states, [d]), x0, atol=1e-15)


def test_symmetric_agents_stay_equal():
    cost = quadratic_cost(np.eye(2), [0.5, -0.2])
    prob = Problem((cost,) * 3)
    graph = erdos_renyi_connected(3, 1.0, 0)
    d = design_dither(2, [6], 0.0, 0.2)
    params = AlgorithmParams(0.05, (0.2,) * 3, 100)
    states = esgt_init(prob, params, [0.3, 0.3], [d] * 3)
    for _ in range(100):
        states = esgt_round(states, graph, [d] * 3, params, prob)
    W = np.array([st.w for st in states])
    assert np.max(np.abs(W - W[0])) <= 1e-12


def test_gt_fixed_point():
    prob = personalized_instance(4, 2, 0)
    from esgt.problem import solve_centralized

    w_star = solve_centralized(prob, tol=1e-12)
    graph = erdos_renyi_connected(4, 0.5, 0)
    from esgt.algorithm import AgentState, gt_round

    # consensus at w* with zero trackers is a fixed point of the iteration
    states = [AgentState(w_star.copy(), np.zeros(2), 0, c.grad(w_star)) for c in prob.costs]

    for _ in range(5):
        states = gt_round(states, graph, prob, 0.05)
    W = np.array([st.w for st in states])
    assert np.max(np.abs(W - w_star)) <= 1e-10


def test_gt_single_agent_is_gradient_descent():
    prob = personalized_instance(1, 3, 2)
    graph = erdos_renyi_connected(1, 0.5, 0)
    w = np.array([1.0, -0.5, 0.2])
    rec = run("gt", prob, graph, AlgorithmParams(0.05, (1.0,), 40), None, w, w_star=np.zeros(3))
    for _ in range(40):
        w = w - 0.05 * prob.total_grad(w)
    np.testing.assert_allclose(rec.final_states[0].w, w, atol=1e-12)


def test_gt_linear_rate():
    prob = personalized_instance(5, 2, 1)
    graph = erdos_renyi_connected(5, 0.5, 1)
    rec = run("gt", prob, graph, AlgorithmParams(0.02, (1.0,) * 5, 300), None, np.ones(2) * 3, probe_every=50)
    err = rec.series("var_rel_err")
    assert err[-1] < 1e-6 * err[0]
    assert np.all(np.diff(np.log(err[1:])) < 0)


@pytest.mark.parametrize("kind", ["esgt", "gt"])
def test_tracker_conservation(kind, small_setup):
    graph, prob, dithers, w0 = small_setup
    params = AlgorithmParams.for_dithers(0.05, dithers, 150)
    rec = run(kind, prob, graph, params, dithers, w0, probe_every=10)
    assert np.max(rec.series("zbar_norm")) <= 1e-12


def test_threaded_matches_serial(small_setup):
    graph, prob, dithers, w0 = small_setup
    params = AlgorithmParams.for_dithers(0.05, dithers, 120)
    serial = run("esgt", prob, graph, params, dithers, w0)
    with ThreadPoolExecutor(4) as pool:
        threaded = run("esgt", prob, graph, params, dithers, w0, executor=pool)
    for a, b in zip(serial.final_states, threaded.final_states):
        assert np.array_equal(a.w, b.w) and np.array_equal(a.s, b.s)
    assert serial.to_csv_text() == threaded.to_csv_text()


def test_nonfinite_carries_round(small_setup):
    graph, prob, dithers, w0 = small_setup
    params = AlgorithmParams.for_dithers(50.0, dithers, 500)
    with pytest.raises(NonFinite) as info:
        run("esgt", prob, graph, params, dithers, w0 * 100)
    assert 1 <= info.value.round <= 500


def test_zero_rounds(small_setup):
    graph, prob, dithers, w0 = small_setup
    rec = run("esgt", prob, graph, AlgorithmParams.for_dithers(0.05, dithers, 0), dithers, w0)
    assert list(rec.rounds) == [0]


def test_params_validation():
    with pytest.raises(ValueError):
        AlgorithmParams(-0.1, (0.1,), 1)
    with pytest.raises(ValueError):
        AlgorithmParams(0.1, (0.0,), 1)
    with pytest.raises(ValueError):
        AlgorithmParams(0.1, (0.1,), -1)
