import numpy as np
import pytest

from esgt.dither import design_dither, paper_recipe_periods
from esgt.graph import erdos_renyi_connected
from esgt.problem import personalized_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_setup():
    """N=4, n=2 personalized instance on a connected ER graph with recipe dithers."""
    N, n = 4, 2
    graph = erdos_renyi_connected(N, 0.5, seed=3)
    problem = personalized_instance(N, n, seed=3)
    d = design_dither(n, paper_recipe_periods(n), 0.0, 0.2)
    w0 = np.random.default_rng(3).uniform(-1, 1, (N, n))
    return graph, problem, [d] * N, w0


def random_valid_odd_periods(rng, k, lo=3, hi=30):
    """Rejection-sample ``k`` admissible odd-component periods."""
    from esgt.dither import _sum_collision

    while True:
        periods = [int(v) for v in rng.choice(np.arange(lo, hi), size=k, replace=False)]
        if _sum_collision(periods) is None:
            return periods


_criteria: dict[int, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    k = int(name.split("_")[2])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[k] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        terminalreporter.write_line(f"criterion {k}: {_criteria[k]}")
